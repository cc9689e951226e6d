//! The declarative experiment configuration: one TOML file naming
//! providers, data files, and analysis settings. CLI flags override file
//! values; unset paths fall back to the bundled defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use personaforge_core::domain::{BigFiveTrait, PromptScore, Temperature};
use personaforge_core::generation::{
    LeakageLexicon, ProfileSamplerConfig, QuestionBank, QuestionBankEntry, TraitDefinition,
    TraitDefinitions,
};
use personaforge_core::linguistics::{parse_stopwords, RuleTagger, DEFAULT_STOPWORDS};
use personaforge_core::metrics::LambdaVariant;
use personaforge_core::provider::{ChatProvider, MockScript, ProviderConfig, ProviderKind};
use personaforge_core::questionnaire::{Questionnaire, QuestionnaireItem, TargetLevel};

use crate::assets;
use crate::fsio::{file_digest, read_to_string, sha256_hex};
use crate::providers::{
    Counters, CountingProvider, DiskCacheProvider, HttpProvider, LimitedProvider,
};
use crate::{config_error, CliResult};

fn default_provider_name() -> String {
    "mock".to_string()
}

/// Top-level configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub default_provider: String,
    pub run: RunSection,
    pub provider: BTreeMap<String, ProviderSection>,
    pub questionnaire: QuestionnaireSection,
    pub generation: GenerationSection,
    pub classifier: ClassifierSection,
    pub evaluation: EvaluationSection,
    pub linguistics: LinguisticsSection,
}

impl Default for Config {
    fn default() -> Self {
        let mut provider = BTreeMap::new();
        provider.insert("mock".to_string(), ProviderSection::default_mock());
        Config {
            default_provider: default_provider_name(),
            run: RunSection::default(),
            provider,
            questionnaire: QuestionnaireSection::default(),
            generation: GenerationSection::default(),
            classifier: ClassifierSection::default(),
            evaluation: EvaluationSection::default(),
            linguistics: LinguisticsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            out_dir: PathBuf::from("out"),
            seed: 7,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    /// `openai`, `anthropic`, `mistral`, or `mock`.
    pub kind: String,
    /// Base URL without the API path; each kind appends its standard route.
    pub endpoint: Option<String>,
    pub model: String,
    pub credential_env: Option<String>,
    pub timeout_s: u64,
    pub max_retries: u32,
    pub max_in_flight: u32,
    pub cache: bool,
    /// Mock script path (mock kind only); unset means the bundled demo.
    pub script: Option<PathBuf>,
}

impl Default for ProviderSection {
    fn default() -> Self {
        ProviderSection {
            kind: "mock".to_string(),
            endpoint: None,
            model: "mock-model".to_string(),
            credential_env: None,
            timeout_s: 60,
            max_retries: 3,
            max_in_flight: 1,
            cache: true,
            script: None,
        }
    }
}

impl ProviderSection {
    fn default_mock() -> Self {
        ProviderSection::default()
    }

    pub fn kind(&self) -> CliResult<ProviderKind> {
        match self.kind.as_str() {
            "openai" => Ok(ProviderKind::OpenAi),
            "anthropic" => Ok(ProviderKind::Anthropic),
            "mistral" => Ok(ProviderKind::Mistral),
            "mock" => Ok(ProviderKind::Mock),
            other => Err(config_error(format!("unknown provider kind `{other}`"))),
        }
    }

    fn default_endpoint(kind: ProviderKind) -> &'static str {
        match kind {
            ProviderKind::OpenAi => "https://api.openai.com",
            ProviderKind::Anthropic => "https://api.anthropic.com",
            ProviderKind::Mistral => "https://api.mistral.ai",
            ProviderKind::Mock => "",
        }
    }

    pub fn to_core_config(&self) -> CliResult<ProviderConfig> {
        let kind = self.kind()?;
        let endpoint = self
            .endpoint
            .clone()
            .unwrap_or_else(|| Self::default_endpoint(kind).to_string());
        let mut config = ProviderConfig::new(kind, endpoint, self.model.clone());
        if let Some(credential_env) = &self.credential_env {
            config.credential_env = credential_env.clone();
        }
        config.timeout = std::time::Duration::from_secs(self.timeout_s.max(1));
        config.max_retries = self.max_retries;
        config.max_in_flight = self.max_in_flight.max(1);
        Ok(config)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestionnaireSection {
    /// Questionnaire JSON; unset means the bundled 44-item inventory.
    pub file: Option<PathBuf>,
    /// Directory of `<trait>_<level>.txt` persona files; unset = bundled.
    pub trait_prompts_dir: Option<PathBuf>,
    pub repetitions: u32,
    pub temperature: String,
    /// `lambda6` (default) or `lambda2`.
    pub lambda: String,
}

impl Default for QuestionnaireSection {
    fn default() -> Self {
        QuestionnaireSection {
            file: None,
            trait_prompts_dir: None,
            repetitions: 10,
            temperature: "0".to_string(),
            lambda: "lambda6".to_string(),
        }
    }
}

impl QuestionnaireSection {
    pub fn lambda_variant(&self) -> CliResult<LambdaVariant> {
        match self.lambda.as_str() {
            "lambda6" => Ok(LambdaVariant::Lambda6),
            "lambda2" => Ok(LambdaVariant::Lambda2),
            other => Err(config_error(format!("unknown lambda variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplerStat {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    /// Question bank JSON; unset means the bundled questions.
    pub questions_file: Option<PathBuf>,
    /// Directory of `<trait>.json` definition files; unset = bundled.
    pub definitions_dir: Option<PathBuf>,
    /// Traits for the single-trait grid; empty means all five.
    pub traits: Vec<String>,
    pub scores: Vec<u8>,
    pub temperatures: Vec<String>,
    /// `single`, `full`, or `both`.
    pub mode: String,
    /// Sampled full profiles per run.
    pub profile_count: usize,
    pub mask_leakage: bool,
    pub leakage_lexicon: Option<PathBuf>,
    /// Per-trait normal-distribution statistics for full-profile sampling.
    /// These are experiment parameters; replace the placeholder values with
    /// statistics from your own reference population.
    pub sampler: BTreeMap<String, SamplerStat>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let sampler = BigFiveTrait::ALL
            .iter()
            .map(|t| {
                (
                    t.key().to_string(),
                    SamplerStat {
                        mean: 3.0,
                        variance: 1.0,
                    },
                )
            })
            .collect();
        GenerationSection {
            questions_file: None,
            definitions_dir: None,
            traits: Vec::new(),
            scores: vec![1, 2, 3, 4, 5],
            temperatures: ["0", "0.5", "0.7", "0.9"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            mode: "single".to_string(),
            profile_count: 10,
            mask_leakage: true,
            leakage_lexicon: None,
            sampler,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    /// Judge provider name; unset means the run's default provider.
    pub provider: Option<String>,
    pub retry_limit: u32,
    /// `prompted` or `all`.
    pub traits: String,
    pub temperature: String,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            provider: None,
            retry_limit: 2,
            traits: "prompted".to_string(),
            temperature: "0".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Share threshold for directional bias flags, in (0.5, 1].
    pub bias_threshold: f64,
    pub annotations_file: Option<PathBuf>,
    /// Closed vocabulary for annotator reasons, one per line; unset leaves
    /// reasons unchecked.
    pub reasons_file: Option<PathBuf>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            bias_threshold: 0.7,
            annotations_file: None,
            reasons_file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinguisticsSection {
    /// Neighbors averaged per text.
    pub k: usize,
    /// Lemmas kept per (trait, band, POS) cell in the lexicon tables.
    pub top_n: usize,
    pub stopwords: Option<PathBuf>,
    /// Directory holding `lemmatizer_lexicon.tsv`, `pos_suffixes.tsv`, and
    /// `e_restore.txt`; unset means the bundled rules.
    pub lemmatizer_dir: Option<PathBuf>,
    /// `texts` (whole masked texts) or `spans` (annotator highlights).
    pub source: String,
}

impl Default for LinguisticsSection {
    fn default() -> Self {
        LinguisticsSection {
            k: 5,
            top_n: 5,
            stopwords: None,
            lemmatizer_dir: None,
            source: "texts".to_string(),
        }
    }
}

fn resolve(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&p);
        }
    }
}

impl Config {
    /// Loads the config file, or the builtin defaults when `path` is unset
    /// and `./personaforge.toml` does not exist. Relative paths inside the
    /// file resolve against the file's directory.
    pub fn load(path: Option<&Path>) -> CliResult<(Config, Option<PathBuf>)> {
        let candidate = match path {
            Some(p) => {
                if !p.exists() {
                    return Err(config_error(format!(
                        "config file {} does not exist",
                        p.display()
                    )));
                }
                Some(p.to_path_buf())
            }
            None => {
                let default = PathBuf::from("personaforge.toml");
                default.exists().then_some(default)
            }
        };
        match candidate {
            None => Ok((Config::default(), None)),
            Some(file) => {
                let text = read_to_string(&file)?;
                let mut config: Config = toml::from_str(&text)
                    .map_err(|e| config_error(format!("{}: {e}", file.display())))?;
                let base = file
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| PathBuf::from("."));
                config.resolve_paths(&base);
                Ok((config, Some(file)))
            }
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        if self.run.out_dir.is_relative() {
            self.run.out_dir = base.join(&self.run.out_dir);
        }
        for section in self.provider.values_mut() {
            resolve(base, &mut section.script);
        }
        resolve(base, &mut self.questionnaire.file);
        resolve(base, &mut self.questionnaire.trait_prompts_dir);
        resolve(base, &mut self.generation.questions_file);
        resolve(base, &mut self.generation.definitions_dir);
        resolve(base, &mut self.generation.leakage_lexicon);
        resolve(base, &mut self.evaluation.annotations_file);
        resolve(base, &mut self.evaluation.reasons_file);
        resolve(base, &mut self.linguistics.stopwords);
        resolve(base, &mut self.linguistics.lemmatizer_dir);
    }

    pub fn provider_section(&self, name: &str) -> CliResult<&ProviderSection> {
        self.provider
            .get(name)
            .ok_or_else(|| config_error(format!("provider `{name}` is not configured")))
    }
}

/// One input the run consumed, recorded in the manifest. Bundled defaults
/// appear with a `builtin:` pseudo-path so the manifest stays complete.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Resolved run state shared by every command.
pub struct Context {
    pub config: Config,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub provider_name: String,
    pub inputs: Vec<InputRecord>,
}

impl Context {
    pub fn new(config: Config, config_path: Option<&Path>) -> CliResult<Self> {
        let mut inputs = Vec::new();
        if let Some(path) = config_path {
            inputs.push(InputRecord {
                path: path.display().to_string(),
                sha256: file_digest(path)?,
            });
        }
        let out_dir = config.run.out_dir.clone();
        let seed = config.run.seed;
        let workers = config.run.workers.max(1);
        let provider_name = config.default_provider.clone();
        Ok(Context {
            config,
            out_dir,
            seed,
            workers,
            provider_name,
            inputs,
        })
    }

    fn record_file_input(&mut self, path: &Path) -> CliResult<()> {
        let record = InputRecord {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        };
        if !self.inputs.contains(&record) {
            self.inputs.push(record);
        }
        Ok(())
    }

    fn record_builtin_input(&mut self, name: &str, content: &str) {
        let record = InputRecord {
            path: format!("builtin:{name}"),
            sha256: sha256_hex(content.as_bytes()),
        };
        if !self.inputs.contains(&record) {
            self.inputs.push(record);
        }
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Questionnaire from the configured file or the bundled inventory.
    pub fn load_questionnaire(&mut self) -> CliResult<Questionnaire> {
        let text = match self.config.questionnaire.file.clone() {
            Some(path) => {
                let text = read_to_string(&path)?;
                self.record_file_input(&path)?;
                text
            }
            None => {
                self.record_builtin_input("bfi44.json", assets::BFI44_JSON);
                assets::BFI44_JSON.to_string()
            }
        };
        let items: Vec<QuestionnaireItem> = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("questionnaire file: {e}")))?;
        Questionnaire::new(items).map_err(|e| config_error(format!("questionnaire file: {e}")))
    }

    /// Persona texts per (trait, level), from a directory of
    /// `<trait>_<level>.txt` files or the bundled set.
    pub fn load_trait_prompts(
        &mut self,
    ) -> CliResult<BTreeMap<(BigFiveTrait, TargetLevel), String>> {
        match self.config.questionnaire.trait_prompts_dir.clone() {
            None => {
                for ((trait_, level), text) in assets::builtin_trait_prompts() {
                    self.record_builtin_input(
                        &format!("trait_prompts/{}_{}.txt", trait_.key(), level.as_str()),
                        &text,
                    );
                }
                Ok(assets::builtin_trait_prompts())
            }
            Some(dir) => {
                let mut prompts = BTreeMap::new();
                for trait_ in BigFiveTrait::ALL {
                    for level in TargetLevel::ALL {
                        let path = dir.join(format!("{}_{}.txt", trait_.key(), level.as_str()));
                        let text = read_to_string(&path)?;
                        self.record_file_input(&path)?;
                        prompts.insert((trait_, level), text.trim().to_string());
                    }
                }
                Ok(prompts)
            }
        }
    }

    /// Question bank from the configured file or the bundled questions.
    pub fn load_questions(&mut self) -> CliResult<QuestionBank> {
        let text = match self.config.generation.questions_file.clone() {
            Some(path) => {
                let text = read_to_string(&path)?;
                self.record_file_input(&path)?;
                text
            }
            None => {
                self.record_builtin_input("questions.json", assets::QUESTIONS_JSON);
                assets::QUESTIONS_JSON.to_string()
            }
        };
        let entries: Vec<QuestionBankEntry> = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("questions file: {e}")))?;
        QuestionBank::new(entries).map_err(|e| config_error(format!("questions file: {e}")))
    }

    /// Trait definitions from `<trait>.json` files or the bundled set.
    pub fn load_definitions(&mut self) -> CliResult<TraitDefinitions> {
        match self.config.generation.definitions_dir.clone() {
            None => {
                let definitions = assets::builtin_trait_definitions();
                for (trait_, definition) in &definitions.0 {
                    self.record_builtin_input(
                        &format!("trait_definitions/{}.json", trait_.key()),
                        &serde_json::to_string(definition).unwrap_or_default(),
                    );
                }
                Ok(definitions)
            }
            Some(dir) => {
                let mut definitions = TraitDefinitions::default();
                for trait_ in BigFiveTrait::ALL {
                    let path = dir.join(format!("{}.json", trait_.key()));
                    let text = read_to_string(&path)?;
                    self.record_file_input(&path)?;
                    let parsed: TraitDefinition = serde_json::from_str(&text)
                        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                    definitions.insert(trait_, parsed);
                }
                Ok(definitions)
            }
        }
    }

    pub fn load_leakage_lexicon(&mut self) -> CliResult<LeakageLexicon> {
        match self.config.generation.leakage_lexicon.clone() {
            Some(path) => {
                let text = read_to_string(&path)?;
                self.record_file_input(&path)?;
                Ok(LeakageLexicon::parse(&text))
            }
            None => {
                self.record_builtin_input("leakage_lexicon.txt", assets::LEAKAGE_LEXICON);
                Ok(LeakageLexicon::parse(assets::LEAKAGE_LEXICON))
            }
        }
    }

    /// Optional closed vocabulary for annotator reasons.
    pub fn load_reason_vocabulary(&mut self) -> CliResult<Option<BTreeSet<String>>> {
        match self.config.evaluation.reasons_file.clone() {
            None => Ok(None),
            Some(path) => {
                let text = read_to_string(&path)?;
                self.record_file_input(&path)?;
                Ok(Some(
                    text.lines()
                        .map(str::trim)
                        .filter(|line| !line.is_empty() && !line.starts_with('#'))
                        .map(str::to_string)
                        .collect(),
                ))
            }
        }
    }

    pub fn load_stopwords(&mut self) -> CliResult<BTreeSet<String>> {
        match self.config.linguistics.stopwords.clone() {
            Some(path) => {
                let text = read_to_string(&path)?;
                self.record_file_input(&path)?;
                Ok(parse_stopwords(&text))
            }
            None => {
                self.record_builtin_input("stopwords.txt", DEFAULT_STOPWORDS);
                Ok(parse_stopwords(DEFAULT_STOPWORDS))
            }
        }
    }

    pub fn load_tagger(&mut self) -> CliResult<RuleTagger> {
        match self.config.linguistics.lemmatizer_dir.clone() {
            None => {
                self.record_builtin_input("lemmatizer", "builtin rule files");
                Ok(RuleTagger::builtin())
            }
            Some(dir) => {
                let lexicon_path = dir.join("lemmatizer_lexicon.tsv");
                let suffix_path = dir.join("pos_suffixes.tsv");
                let restore_path = dir.join("e_restore.txt");
                let lexicon = read_to_string(&lexicon_path)?;
                let suffixes = read_to_string(&suffix_path)?;
                let restore = read_to_string(&restore_path)?;
                self.record_file_input(&lexicon_path)?;
                self.record_file_input(&suffix_path)?;
                self.record_file_input(&restore_path)?;
                RuleTagger::from_rules(&lexicon, &suffixes, &restore)
                    .map_err(|e| config_error(format!("lemmatizer rules: {e}")))
            }
        }
    }

    /// Parsed sampler statistics covering all five traits.
    pub fn sampler_config(&self, count: usize) -> CliResult<ProfileSamplerConfig> {
        let mut stats = BTreeMap::new();
        for trait_ in BigFiveTrait::ALL {
            let stat = self
                .config
                .generation
                .sampler
                .get(trait_.key())
                .ok_or_else(|| {
                    config_error(format!("sampler statistics missing for {}", trait_.key()))
                })?;
            stats.insert(trait_, (stat.mean, stat.variance));
        }
        Ok(ProfileSamplerConfig {
            stats,
            seed: self.seed,
            count,
        })
    }

    /// Grid dimensions parsed from the generation section.
    pub fn grid_dimensions(
        &self,
    ) -> CliResult<(Vec<BigFiveTrait>, Vec<PromptScore>, Vec<Temperature>)> {
        let traits = if self.config.generation.traits.is_empty() {
            BigFiveTrait::ALL.to_vec()
        } else {
            self.config
                .generation
                .traits
                .iter()
                .map(|name| BigFiveTrait::parse(name).map_err(|e| config_error(e.to_string())))
                .collect::<CliResult<Vec<_>>>()?
        };
        let scores = self
            .config
            .generation
            .scores
            .iter()
            .map(|&s| PromptScore::new(s).map_err(|e| config_error(e.to_string())))
            .collect::<CliResult<Vec<_>>>()?;
        let temperatures = self
            .config
            .generation
            .temperatures
            .iter()
            .map(|t| Temperature::parse(t).map_err(|e| config_error(e.to_string())))
            .collect::<CliResult<Vec<_>>>()?;
        Ok((traits, scores, temperatures))
    }

    /// Builds the full provider stack (limiter, counters, optional disk
    /// cache) for a configured provider name.
    pub fn build_provider(
        &mut self,
        name: &str,
    ) -> CliResult<(Box<dyn ChatProvider>, Arc<Counters>, String)> {
        let section = self.config.provider_section(name)?.clone();
        let counters = Arc::new(Counters::default());
        let kind = section.kind()?;
        let model = section.model.clone();

        let base: Box<dyn ChatProvider> = match kind {
            ProviderKind::Mock => {
                let script_text = match &section.script {
                    Some(path) => {
                        let text = read_to_string(path)?;
                        self.record_file_input(path)?;
                        text
                    }
                    None => {
                        self.record_builtin_input("mock_script.json", assets::MOCK_SCRIPT_JSON);
                        assets::MOCK_SCRIPT_JSON.to_string()
                    }
                };
                let script: MockScript = serde_json::from_str(&script_text)
                    .map_err(|e| config_error(format!("mock script: {e}")))?;
                let provider = script
                    .compile()
                    .map_err(|e| config_error(format!("mock script: {e}")))?;
                Box::new(provider)
            }
            _ => {
                let core_config = section.to_core_config()?;
                Box::new(HttpProvider::new(core_config).map_err(|e| config_error(e.to_string()))?)
            }
        };

        let limited = LimitedProvider::new(base, section.max_in_flight.max(1));
        let counted = CountingProvider::new(limited, counters.clone());
        let provider: Box<dyn ChatProvider> = if section.cache {
            let cache_dir = self.out_dir.join("cache");
            Box::new(DiskCacheProvider::new(counted, cache_dir, counters.clone()))
        } else {
            Box::new(counted)
        };
        Ok((provider, counters, model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_a_working_mock_provider() {
        let config = Config::default();
        assert_eq!(config.default_provider, "mock");
        assert!(config.provider.contains_key("mock"));
        assert_eq!(config.questionnaire.repetitions, 10);
        assert_eq!(config.generation.temperatures.len(), 4);
        assert_eq!(config.evaluation.bias_threshold, 0.7);
        assert_eq!(config.linguistics.k, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<Config>("unknown_key = 1");
        assert!(err.is_err());
    }

    #[test]
    fn provider_sections_parse() {
        let text = r#"
            default_provider = "judge"
            [provider.judge]
            kind = "openai"
            model = "gpt-test"
            timeout_s = 30
        "#;
        let config: Config = toml::from_str(text).unwrap();
        let section = config.provider_section("judge").unwrap();
        assert_eq!(section.kind().unwrap(), ProviderKind::OpenAi);
        let core = section.to_core_config().unwrap();
        assert_eq!(core.credential_env, "PERSONAFORGE_API_KEY_OPENAI");
        assert_eq!(core.timeout.as_secs(), 30);
    }
}
