//! Lexical analysis of generated texts: from-scratch TF-IDF similarity with
//! same-trait neighbor averaging, a rule-based lemmatizer/POS tagger, and
//! POS-grouped lexicon extraction with overlap statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{BigFiveTrait, PromptScore};

/// Errors raised by the lexical analyses.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinguisticsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
    #[error("trait {trait_} has {have} texts; top-{k} neighbors need at least {need}")]
    InsufficientCorpus {
        trait_: BigFiveTrait,
        have: usize,
        need: usize,
        k: usize,
    },
    #[error("overlap undefined for an empty reference set")]
    EmptySet,
    #[error("tagger failed: {0}")]
    TaggerFailure(String),
    #[error("metadata length {meta} does not match corpus length {docs}")]
    MetadataMismatch { meta: usize, docs: usize },
    #[error("duplicate document id {0}")]
    DuplicateId(String),
}

/// Lowercase word tokenization on Unicode alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Sparse document vector: (term index, weight) sorted by index.
pub type SparseVector = Vec<(u32, f64)>;

/// A fitted TF-IDF model over one corpus.
///
/// tf is the raw in-document count; idf is the smoothed
/// `ln((1+N)/(1+df)) + 1`; document vectors are `tf * idf`, L2-normalized
/// only inside cosine computations.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: BTreeMap<String, u32>,
    idf: Vec<f64>,
    vectors: Vec<SparseVector>,
}

/// Fits the model. Vocabulary order is lexicographic, so the same corpus
/// always produces the same model.
pub fn fit_tfidf<S: AsRef<str>>(corpus: &[S]) -> Result<TfIdfModel, LinguisticsError> {
    if corpus.is_empty() {
        return Err(LinguisticsError::EmptyCorpus);
    }
    let tokenized: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(d.as_ref())).collect();

    let mut vocabulary: BTreeMap<String, u32> = BTreeMap::new();
    for doc in &tokenized {
        for token in doc {
            let next = vocabulary.len() as u32;
            vocabulary.entry(token.clone()).or_insert(next);
        }
    }
    // Re-index lexicographically for a stable column order.
    for (index, (_, slot)) in vocabulary.iter_mut().enumerate() {
        *slot = index as u32;
    }

    let mut document_frequency = alloc::vec![0u64; vocabulary.len()];
    for doc in &tokenized {
        let distinct: BTreeSet<&String> = doc.iter().collect();
        for token in distinct {
            document_frequency[vocabulary[token] as usize] += 1;
        }
    }
    let n = corpus.len() as f64;
    let idf: Vec<f64> = document_frequency
        .iter()
        .map(|&df| libm::log((1.0 + n) / (1.0 + df as f64)) + 1.0)
        .collect();

    let vectors = tokenized
        .iter()
        .map(|doc| {
            let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
            for token in doc {
                *counts.entry(vocabulary[token]).or_insert(0) += 1;
            }
            counts
                .into_iter()
                .map(|(term, count)| (term, count as f64 * idf[term as usize]))
                .collect()
        })
        .collect();

    Ok(TfIdfModel {
        vocabulary,
        idf,
        vectors,
    })
}

impl TfIdfModel {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, doc: usize) -> &SparseVector {
        &self.vectors[doc]
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i as usize])
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }
}

fn norm(vector: &SparseVector) -> f64 {
    libm::sqrt(vector.iter().map(|(_, w)| w * w).sum::<f64>())
}

fn dot(a: &SparseVector, b: &SparseVector) -> f64 {
    let mut total = 0.0;
    let mut ai = 0;
    let mut bi = 0;
    while ai < a.len() && bi < b.len() {
        match a[ai].0.cmp(&b[bi].0) {
            core::cmp::Ordering::Less => ai += 1,
            core::cmp::Ordering::Greater => bi += 1,
            core::cmp::Ordering::Equal => {
                total += a[ai].1 * b[bi].1;
                ai += 1;
                bi += 1;
            }
        }
    }
    total
}

/// Cosine similarity of two sparse vectors; in [0, 1] for non-negative
/// weights. Zero vectors are an error.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> Result<f64, LinguisticsError> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(LinguisticsError::ZeroVector);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Per-document metadata for neighbor analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraitDocMeta {
    pub id: String,
    pub trait_: BigFiveTrait,
    pub prompt_score: PromptScore,
}

/// One text's neighborhood result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborMean {
    pub id: String,
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub prompt_score: u8,
    pub neighbor_ids: Vec<String>,
    /// Mean prompted score of the k most similar same-trait texts.
    pub mean_neighbor_score: f64,
}

/// For every document, ranks all *other* documents of the same trait by
/// cosine similarity, takes the top `k`, and averages their prompted
/// scores. Texts of other traits are never considered. Ties break on
/// ascending text id; zero-vector documents count as similarity 0.
pub fn top_k_similar_trait_means(
    model: &TfIdfModel,
    meta: &[TraitDocMeta],
    k: usize,
) -> Result<Vec<NeighborMean>, LinguisticsError> {
    if meta.len() != model.len() {
        return Err(LinguisticsError::MetadataMismatch {
            meta: meta.len(),
            docs: model.len(),
        });
    }
    // Ids break similarity ties, so they must be unique for the ranking to
    // be well-defined.
    let mut ids = BTreeSet::new();
    for doc in meta {
        if !ids.insert(doc.id.as_str()) {
            return Err(LinguisticsError::DuplicateId(doc.id.clone()));
        }
    }
    let mut by_trait: BTreeMap<BigFiveTrait, Vec<usize>> = BTreeMap::new();
    for (index, doc) in meta.iter().enumerate() {
        by_trait.entry(doc.trait_).or_default().push(index);
    }
    for (trait_, docs) in &by_trait {
        if docs.len() < k + 1 {
            return Err(LinguisticsError::InsufficientCorpus {
                trait_: *trait_,
                have: docs.len(),
                need: k + 1,
                k,
            });
        }
    }

    let mut results = Vec::with_capacity(meta.len());
    for (index, doc) in meta.iter().enumerate() {
        let candidates = &by_trait[&doc.trait_];
        let mut scored: Vec<(f64, &str, usize)> = candidates
            .iter()
            .filter(|&&other| other != index)
            .map(|&other| {
                let similarity =
                    cosine_similarity(model.vector(index), model.vector(other)).unwrap_or(0.0);
                (similarity, meta[other].id.as_str(), other)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(b.1))
        });
        let top: Vec<&(f64, &str, usize)> = scored.iter().take(k).collect();
        let mean_neighbor_score = top
            .iter()
            .map(|(_, _, other)| meta[*other].prompt_score.get() as f64)
            .sum::<f64>()
            / k as f64;
        results.push(NeighborMean {
            id: doc.id.clone(),
            trait_: doc.trait_,
            prompt_score: doc.prompt_score.get(),
            neighbor_ids: top.iter().map(|(_, id, _)| id.to_string()).collect(),
            mean_neighbor_score,
        });
    }
    Ok(results)
}

/// One cell of the similarity heatmap: texts prompted with `query_score` on
/// `trait_`, and the average of their neighbor means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub query_score: u8,
    pub texts: u32,
    pub mean_neighbor_score: f64,
}

/// Aggregates neighbor means into one row per (trait, query score) with at
/// least one text.
pub fn similarity_heatmap(results: &[NeighborMean]) -> Vec<HeatmapRow> {
    let mut cells: BTreeMap<(BigFiveTrait, u8), (f64, u32)> = BTreeMap::new();
    for result in results {
        let cell = cells
            .entry((result.trait_, result.prompt_score))
            .or_insert((0.0, 0));
        cell.0 += result.mean_neighbor_score;
        cell.1 += 1;
    }
    cells
        .into_iter()
        .map(|((trait_, query_score), (sum, count))| HeatmapRow {
            trait_,
            query_score,
            texts: count,
            mean_neighbor_score: sum / count as f64,
        })
        .collect()
}

/// Coarse part-of-speech classes the lexicon analysis cares about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Other,
}

impl PosTag {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "noun" => Some(PosTag::Noun),
            "verb" => Some(PosTag::Verb),
            "adj" => Some(PosTag::Adj),
            "other" => Some(PosTag::Other),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PosTag::Noun => "noun",
            PosTag::Verb => "verb",
            PosTag::Adj => "adj",
            PosTag::Other => "other",
        }
    }
}

/// A token with its lemma and coarse POS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub token: String,
    pub lemma: String,
    pub pos: PosTag,
}

/// The pluggable tagging contract. Output order must follow input order.
/// Bind any external NLP tagger by implementing this; the crate ships
/// [`RuleTagger`] as the dependency-free default.
pub trait PosTagger {
    fn tag(&self, text: &str) -> Result<Vec<TaggedToken>, LinguisticsError>;
}

/// Rule-based lemmatizer and POS heuristic: an exception lexicon consulted
/// first, then suffix-driven POS guessing and suffix-stripping lemma rules
/// with doubled-consonant and silent-e repair. All rule tables are plain
/// data files.
#[derive(Debug, Clone, Default)]
pub struct RuleTagger {
    lexicon: BTreeMap<String, (String, PosTag)>,
    pos_suffixes: Vec<(String, PosTag)>,
    e_restore: BTreeSet<String>,
}

const DEFAULT_LEXICON: &str = include_str!("../data/lemmatizer_lexicon.tsv");
const DEFAULT_POS_SUFFIXES: &str = include_str!("../data/pos_suffixes.tsv");
const DEFAULT_E_RESTORE: &str = include_str!("../data/e_restore.txt");

/// The built-in stopword list, one word per line with `#` comments.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Parses a stopword file into a lowercase set.
pub fn parse_stopwords(source: &str) -> BTreeSet<String> {
    source
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(|line| line.to_lowercase())
        .collect()
}

fn data_lines(source: &str) -> impl Iterator<Item = &str> {
    source
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
}

impl RuleTagger {
    /// Builds a tagger from rule file contents (lexicon TSV, POS suffix TSV,
    /// e-restore list). Malformed lines report as tagger failures.
    pub fn from_rules(
        lexicon_tsv: &str,
        pos_suffix_tsv: &str,
        e_restore_list: &str,
    ) -> Result<Self, LinguisticsError> {
        let mut lexicon = BTreeMap::new();
        for line in data_lines(lexicon_tsv) {
            let mut fields = line.split('\t');
            let (Some(word), Some(lemma), Some(pos)) =
                (fields.next(), fields.next(), fields.next())
            else {
                return Err(LinguisticsError::TaggerFailure(alloc::format!(
                    "bad lexicon line: `{line}`"
                )));
            };
            let pos = PosTag::parse(pos.trim()).ok_or_else(|| {
                LinguisticsError::TaggerFailure(alloc::format!("bad POS tag in `{line}`"))
            })?;
            lexicon.insert(word.to_lowercase(), (lemma.to_lowercase(), pos));
        }

        let mut pos_suffixes: Vec<(String, PosTag)> = Vec::new();
        for line in data_lines(pos_suffix_tsv) {
            let mut fields = line.split('\t');
            let (Some(suffix), Some(pos)) = (fields.next(), fields.next()) else {
                return Err(LinguisticsError::TaggerFailure(alloc::format!(
                    "bad suffix line: `{line}`"
                )));
            };
            let pos = PosTag::parse(pos.trim()).ok_or_else(|| {
                LinguisticsError::TaggerFailure(alloc::format!("bad POS tag in `{line}`"))
            })?;
            pos_suffixes.push((suffix.to_lowercase(), pos));
        }
        pos_suffixes.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        let e_restore = data_lines(e_restore_list)
            .map(|line| line.to_lowercase())
            .collect();

        Ok(RuleTagger {
            lexicon,
            pos_suffixes,
            e_restore,
        })
    }

    /// The tagger built from the bundled rule files.
    pub fn builtin() -> Self {
        Self::from_rules(DEFAULT_LEXICON, DEFAULT_POS_SUFFIXES, DEFAULT_E_RESTORE)
            .expect("bundled rule files parse")
    }

    fn guess_pos(&self, token: &str) -> PosTag {
        for (suffix, pos) in &self.pos_suffixes {
            if token.len() > suffix.len() + 1 && token.ends_with(suffix.as_str()) {
                return *pos;
            }
        }
        PosTag::Noun
    }

    /// Undoubles trailing consonants ("runn" -> "run") and restores silent
    /// e's from the data list ("explor" -> "explore").
    fn repair_stem(&self, stem: &str) -> String {
        let chars: Vec<char> = stem.chars().collect();
        if chars.len() >= 3 {
            let last = chars[chars.len() - 1];
            let prev = chars[chars.len() - 2];
            if last == prev && matches!(last, 'b' | 'd' | 'g' | 'm' | 'n' | 'p' | 'r' | 't') {
                return chars[..chars.len() - 1].iter().collect();
            }
        }
        if self.e_restore.contains(stem) {
            let mut restored = stem.to_string();
            restored.push('e');
            return restored;
        }
        stem.to_string()
    }

    fn lemmatize(&self, token: &str, pos: PosTag) -> String {
        let strip = |suffix: &str| token.strip_suffix(suffix).map(|s| s.to_string());
        let long_enough = |stem: &str| stem.chars().count() >= 2;
        match pos {
            PosTag::Noun => {
                if let Some(stem) = token.strip_suffix("ies").filter(|s| long_enough(s)) {
                    return alloc::format!("{stem}y");
                }
                for sibilant in ["ches", "shes", "sses", "xes", "zes"] {
                    if let Some(stem) = strip(sibilant).filter(|s| long_enough(s)) {
                        return alloc::format!("{stem}{}", &sibilant[..sibilant.len() - 2]);
                    }
                }
                if token.ends_with('s')
                    && !token.ends_with("ss")
                    && !token.ends_with("us")
                    && !token.ends_with("is")
                {
                    if let Some(stem) = strip("s").filter(|s| long_enough(s)) {
                        return stem;
                    }
                }
                token.to_string()
            }
            PosTag::Verb => {
                if let Some(stem) = token.strip_suffix("ies").filter(|s| long_enough(s)) {
                    return alloc::format!("{stem}y");
                }
                if let Some(stem) = token.strip_suffix("ied").filter(|s| long_enough(s)) {
                    return alloc::format!("{stem}y");
                }
                for suffix in ["ing", "ed"] {
                    if let Some(stem) = strip(suffix).filter(|s| long_enough(s)) {
                        return self.repair_stem(&stem);
                    }
                }
                for sibilant in ["ches", "shes", "sses", "xes", "zes"] {
                    if let Some(stem) = strip(sibilant).filter(|s| long_enough(s)) {
                        return alloc::format!("{stem}{}", &sibilant[..sibilant.len() - 2]);
                    }
                }
                if token.ends_with('s') && !token.ends_with("ss") {
                    if let Some(stem) = strip("s").filter(|s| long_enough(s)) {
                        return stem;
                    }
                }
                token.to_string()
            }
            PosTag::Adj => {
                for (suffix, replacement) in [("iest", "y"), ("ier", "y")] {
                    if let Some(stem) = strip(suffix).filter(|s| long_enough(s)) {
                        return alloc::format!("{stem}{replacement}");
                    }
                }
                for suffix in ["est", "er"] {
                    if let Some(stem) = strip(suffix).filter(|s| long_enough(s)) {
                        return self.repair_stem(&stem);
                    }
                }
                token.to_string()
            }
            PosTag::Other => token.to_string(),
        }
    }
}

impl PosTagger for RuleTagger {
    fn tag(&self, text: &str) -> Result<Vec<TaggedToken>, LinguisticsError> {
        let mut tagged = Vec::new();
        for token in tokenize(text) {
            let (lemma, pos) = match self.lexicon.get(&token) {
                Some((lemma, pos)) => (lemma.clone(), *pos),
                None => {
                    let pos = self.guess_pos(&token);
                    (self.lemmatize(&token, pos), pos)
                }
            };
            tagged.push(TaggedToken { token, lemma, pos });
        }
        Ok(tagged)
    }
}

/// High/neutral/low prompt-score bands for lexicon grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreBand {
    High,
    Neutral,
    Low,
}

impl ScoreBand {
    pub const ALL: [ScoreBand; 3] = [ScoreBand::High, ScoreBand::Neutral, ScoreBand::Low];

    /// Prompt scores 4-5 are high, 3 neutral, 1-2 low.
    pub fn from_prompt_score(score: PromptScore) -> Self {
        match score.get() {
            4 | 5 => ScoreBand::High,
            3 => ScoreBand::Neutral,
            _ => ScoreBand::Low,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ScoreBand::High => "high",
            ScoreBand::Neutral => "neutral",
            ScoreBand::Low => "low",
        }
    }
}

/// Text to feed lexicon extraction: either full generated texts or just the
/// spans annotators highlighted, each labeled with its trait and band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconSource {
    pub text: String,
    pub trait_: BigFiveTrait,
    pub band: ScoreBand,
}

/// One counted lemma in one (trait, band, POS) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub lemma: String,
    pub pos: PosTag,
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub band: ScoreBand,
    pub frequency: u64,
}

/// Tags every source, keeps noun/verb/adjective lemmas, removes stopwords,
/// and counts per (trait, band, POS, lemma). Entries are sorted by trait,
/// band, POS, then descending frequency with lemma as tiebreak.
pub fn extract_lexicon(
    sources: &[LexiconSource],
    tagger: &dyn PosTagger,
    stopwords: &BTreeSet<String>,
) -> Result<Vec<LexiconEntry>, LinguisticsError> {
    let mut counts: BTreeMap<(BigFiveTrait, ScoreBand, PosTag, String), u64> = BTreeMap::new();
    for source in sources {
        for tagged in tagger.tag(&source.text)? {
            if !matches!(tagged.pos, PosTag::Noun | PosTag::Verb | PosTag::Adj) {
                continue;
            }
            if stopwords.contains(&tagged.token) || stopwords.contains(&tagged.lemma) {
                continue;
            }
            *counts
                .entry((source.trait_, source.band, tagged.pos, tagged.lemma))
                .or_insert(0) += 1;
        }
    }
    let mut entries: Vec<LexiconEntry> = counts
        .into_iter()
        .map(|((trait_, band, pos, lemma), frequency)| LexiconEntry {
            lemma,
            pos,
            trait_,
            band,
            frequency,
        })
        .collect();
    entries.sort_by(|a, b| {
        (a.trait_, a.band, a.pos)
            .cmp(&(b.trait_, b.band, b.pos))
            .then_with(|| b.frequency.cmp(&a.frequency))
            .then_with(|| a.lemma.cmp(&b.lemma))
    });
    Ok(entries)
}

/// Keeps only the `n` most frequent lemmas of each (trait, band, POS) cell.
pub fn top_n_per_cell(entries: &[LexiconEntry], n: usize) -> Vec<LexiconEntry> {
    let mut kept = Vec::new();
    let mut cell_counts: BTreeMap<(BigFiveTrait, ScoreBand, PosTag), usize> = BTreeMap::new();
    for entry in entries {
        let cell = cell_counts
            .entry((entry.trait_, entry.band, entry.pos))
            .or_insert(0);
        if *cell < n {
            *cell += 1;
            kept.push(entry.clone());
        }
    }
    kept
}

/// The distinct lemmas of the entries matching a (trait, band) cell.
pub fn lemma_set(
    entries: &[LexiconEntry],
    trait_: BigFiveTrait,
    band: ScoreBand,
) -> BTreeSet<String> {
    entries
        .iter()
        .filter(|e| e.trait_ == trait_ && e.band == band)
        .map(|e| e.lemma.clone())
        .collect()
}

/// Directional overlap: the share of `reference`'s lemmas found in `other`.
pub fn pattern_overlap(
    reference: &BTreeSet<String>,
    other: &BTreeSet<String>,
) -> Result<f64, LinguisticsError> {
    if reference.is_empty() {
        return Err(LinguisticsError::EmptySet);
    }
    let shared = reference.intersection(other).count();
    Ok(shared as f64 / reference.len() as f64)
}

/// Type- and token-level fractions of lexicon lemmas that also occur in the
/// prompt material.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PromptDerivedFractions {
    /// Distinct lexicon lemmas found among prompt lemmas / distinct lemmas.
    pub type_level: f64,
    /// Same, weighted by lemma frequency.
    pub token_level: f64,
    pub lexicon_lemmas: u64,
    pub derived_lemmas: u64,
}

/// Measures how much of an extracted lexicon is vocabulary the prompts
/// themselves supplied. Empty lexicons yield zero fractions.
pub fn prompt_derived_fraction<S: AsRef<str>>(
    entries: &[LexiconEntry],
    prompt_texts: &[S],
    tagger: &dyn PosTagger,
) -> Result<PromptDerivedFractions, LinguisticsError> {
    let mut prompt_lemmas: BTreeSet<String> = BTreeSet::new();
    for text in prompt_texts {
        for tagged in tagger.tag(text.as_ref())? {
            prompt_lemmas.insert(tagged.lemma);
        }
    }
    let mut distinct: BTreeMap<&str, u64> = BTreeMap::new();
    for entry in entries {
        *distinct.entry(entry.lemma.as_str()).or_insert(0) += entry.frequency;
    }
    if distinct.is_empty() {
        return Ok(PromptDerivedFractions::default());
    }
    let total_types = distinct.len() as f64;
    let total_tokens: u64 = distinct.values().sum();
    let derived: Vec<(&&str, &u64)> = distinct
        .iter()
        .filter(|(lemma, _)| prompt_lemmas.contains(**lemma))
        .collect();
    let derived_types = derived.len() as f64;
    let derived_tokens: u64 = derived.iter().map(|(_, &count)| count).sum();
    Ok(PromptDerivedFractions {
        type_level: derived_types / total_types,
        token_level: derived_tokens as f64 / total_tokens as f64,
        lexicon_lemmas: distinct.len() as u64,
        derived_lemmas: derived.len() as u64,
    })
}
