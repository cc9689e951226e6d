//! Reliability coefficients, inter-rater agreement, voting, classifier vs.
//! annotator agreement levels, confusion matrices, and bias detection.
//!
//! Conventions used throughout and relied on by the tests:
//!
//! * variances are population variances (divide by N);
//! * weighted precision/recall/F1 weight per-class metrics by true-class
//!   support, so weighted recall equals plain accuracy;
//! * Guttman's lambda is computed as lambda-6 by default, with lambda-2
//!   available as a switch.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{
    AnnotationScore, BigFiveTrait, ClassifierOutput, GeneratedText, PromptScore, PromptedLevel,
    ScoreGroup,
};

/// Errors raised by the statistics in this module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("rating matrix must be rectangular")]
    NotRectangular,
    #[error("rating matrix needs at least 2 rows and 2 columns, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("rating matrix cell {0} outside 1..=5")]
    CellOutOfRange(i64),
    #[error("total score variance is zero; reliability undefined")]
    DegenerateMatrix,
    #[error("item covariance structure is degenerate; lambda undefined")]
    SingularCovariance,
    #[error("chance agreement is 1; kappa undefined")]
    DegenerateAgreement,
    #[error("rater counts must be rectangular with equal row sums >= 2")]
    BadRaterCounts,
    #[error("no input pairs")]
    EmptyInput,
    #[error("voting requires exactly 3 scores, got {0}")]
    VoteArity(usize),
    #[error("ids present on one side only: {0}")]
    Misaligned(String),
}

/// Respondents x items matrix of integer scores in 1..=5.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
}

impl RatingMatrix {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, MetricsError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(MetricsError::NotRectangular);
        }
        if n_rows < 2 || n_cols < 2 {
            return Err(MetricsError::TooSmall {
                rows: n_rows,
                cols: n_cols,
            });
        }
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            for &cell in row {
                if !(1..=5).contains(&cell) {
                    return Err(MetricsError::CellOutOfRange(cell as i64));
                }
                cells.push(cell as f64);
            }
        }
        Ok(RatingMatrix {
            rows: n_rows,
            cols: n_cols,
            cells,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.cols + col]
    }

    fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    fn row_totals(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c)).sum())
            .collect()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divide by N).
fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / a.len() as f64
}

/// Cronbach's alpha: `k/(k-1) * (1 - sum(item variances) / total variance)`.
pub fn cronbach_alpha(matrix: &RatingMatrix) -> Result<f64, MetricsError> {
    let k = matrix.cols() as f64;
    let item_variance_sum: f64 = (0..matrix.cols())
        .map(|c| variance(&matrix.column(c)))
        .sum();
    let total_variance = variance(&matrix.row_totals());
    if total_variance == 0.0 {
        return Err(MetricsError::DegenerateMatrix);
    }
    Ok(k / (k - 1.0) * (1.0 - item_variance_sum / total_variance))
}

/// Residual variance of `target` after least-squares projection onto
/// `predictors` (all centered). Modified Gram-Schmidt with rank tolerance:
/// exactly collinear predictors contribute nothing instead of failing, so a
/// perfectly predictable item has residual exactly zero.
fn projection_residual_variance(target: &[f64], predictors: &[Vec<f64>]) -> f64 {
    let n = target.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale: f64 = predictors
        .iter()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0f64, f64::max);
    let tolerance = scale * 1e-24;
    for predictor in predictors {
        let mut vector = predictor.clone();
        for b in &basis {
            let dot: f64 = vector.iter().zip(b).map(|(x, y)| x * y).sum();
            for (v, bv) in vector.iter_mut().zip(b) {
                *v -= dot * bv;
            }
        }
        let norm_sq: f64 = vector.iter().map(|v| v * v).sum();
        if norm_sq > tolerance && norm_sq > 0.0 {
            let norm = libm::sqrt(norm_sq);
            for v in &mut vector {
                *v /= norm;
            }
            basis.push(vector);
        }
    }
    let mut residual = target.to_vec();
    for b in &basis {
        let dot: f64 = residual.iter().zip(b).map(|(x, y)| x * y).sum();
        for (r, bv) in residual.iter_mut().zip(b) {
            *r -= dot * bv;
        }
    }
    residual.iter().map(|v| v * v).sum::<f64>() / n as f64
}

fn centered_columns(matrix: &RatingMatrix) -> Vec<Vec<f64>> {
    (0..matrix.cols())
        .map(|c| {
            let column = matrix.column(c);
            let m = mean(&column);
            column.into_iter().map(|v| v - m).collect()
        })
        .collect()
}

/// Guttman's lambda-6: `1 - sum(residual variances) / total variance`, where
/// each item's residual variance comes from regressing it on all other
/// items.
///
/// Residuals are computed by rank-tolerant projection, so matrices with
/// exactly parallel items yield 1.0 instead of failing on a singular
/// covariance matrix. [`MetricsError::SingularCovariance`] is reserved for
/// matrices with no total-score variance at all.
pub fn guttman_lambda6(matrix: &RatingMatrix) -> Result<f64, MetricsError> {
    let total_variance = variance(&matrix.row_totals());
    if total_variance == 0.0 {
        return Err(MetricsError::SingularCovariance);
    }
    let centered = centered_columns(matrix);
    let mut residual_sum = 0.0;
    for i in 0..matrix.cols() {
        let predictors: Vec<Vec<f64>> = centered
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, c)| c.clone())
            .collect();
        residual_sum += projection_residual_variance(&centered[i], &predictors);
    }
    Ok(1.0 - residual_sum / total_variance)
}

/// Guttman's lambda-2, the switchable alternative coefficient.
pub fn guttman_lambda2(matrix: &RatingMatrix) -> Result<f64, MetricsError> {
    let total_variance = variance(&matrix.row_totals());
    if total_variance == 0.0 {
        return Err(MetricsError::DegenerateMatrix);
    }
    let k = matrix.cols() as f64;
    let columns: Vec<Vec<f64>> = (0..matrix.cols()).map(|c| matrix.column(c)).collect();
    let item_variance_sum: f64 = columns.iter().map(|c| variance(c)).sum();
    let mut cross_sq = 0.0;
    for i in 0..matrix.cols() {
        for j in 0..matrix.cols() {
            if i != j {
                let c = covariance(&columns[i], &columns[j]);
                cross_sq += c * c;
            }
        }
    }
    let lambda1 = 1.0 - item_variance_sum / total_variance;
    Ok(lambda1 + libm::sqrt(k / (k - 1.0) * cross_sq) / total_variance)
}

/// Which Guttman lambda the reliability report uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaVariant {
    #[default]
    Lambda6,
    Lambda2,
}

pub fn guttman_lambda(matrix: &RatingMatrix, variant: LambdaVariant) -> Result<f64, MetricsError> {
    match variant {
        LambdaVariant::Lambda6 => guttman_lambda6(matrix),
        LambdaVariant::Lambda2 => guttman_lambda2(matrix),
    }
}

/// Fleiss' kappa over per-subject category counts. Every subject must be
/// rated by the same number of raters (n >= 2).
pub fn fleiss_kappa(counts: &[Vec<u64>]) -> Result<f64, MetricsError> {
    let subjects = counts.len();
    let categories = counts.first().map(|r| r.len()).unwrap_or(0);
    if subjects == 0 || categories == 0 {
        return Err(MetricsError::BadRaterCounts);
    }
    if counts.iter().any(|r| r.len() != categories) {
        return Err(MetricsError::BadRaterCounts);
    }
    let raters: u64 = counts[0].iter().sum();
    if raters < 2 || counts.iter().any(|r| r.iter().sum::<u64>() != raters) {
        return Err(MetricsError::BadRaterCounts);
    }
    let n = raters as f64;
    let per_subject_agreement: f64 = counts
        .iter()
        .map(|row| {
            let pairs: f64 = row.iter().map(|&c| (c * c) as f64 - c as f64).sum();
            pairs / (n * (n - 1.0))
        })
        .sum::<f64>()
        / subjects as f64;
    let total = subjects as f64 * n;
    let chance_agreement: f64 = (0..categories)
        .map(|c| {
            let share = counts.iter().map(|row| row[c]).sum::<u64>() as f64 / total;
            share * share
        })
        .sum();
    if 1.0 - chance_agreement == 0.0 {
        return Err(MetricsError::DegenerateAgreement);
    }
    Ok((per_subject_agreement - chance_agreement) / (1.0 - chance_agreement))
}

/// Maps an annotation score into its four-way group: -2,-1 low; 0 mid;
/// +1,+2 high; non-distinguishable stays its own category.
pub fn score_to_group(score: AnnotationScore) -> ScoreGroup {
    match score {
        AnnotationScore::Value(v) if v < 0 => ScoreGroup::Low,
        AnnotationScore::Value(0) => ScoreGroup::Mid,
        AnnotationScore::Value(_) => ScoreGroup::High,
        AnnotationScore::NonDistinguishable => ScoreGroup::NonDistinguishable,
    }
}

/// Maps a prompted 1..=5 score into its L/M/H band: 1,2 low; 3 mid; 4,5 high.
pub fn prompt_score_to_level(score: PromptScore) -> PromptedLevel {
    match score.get() {
        1 | 2 => PromptedLevel::Low,
        3 => PromptedLevel::Mid,
        _ => PromptedLevel::High,
    }
}

/// Majority vote over exactly three scores.
///
/// * Any score held by at least two raters wins.
/// * Three distinct numeric scores: the median.
/// * Two distinct numeric scores plus one non-distinguishable: the mean of
///   the numeric pair, rounded toward zero.
pub fn majority_vote(scores: [AnnotationScore; 3]) -> AnnotationScore {
    for candidate in scores {
        let support = scores.iter().filter(|&&s| s == candidate).count();
        if support >= 2 {
            return candidate;
        }
    }
    // All three distinct from here on.
    let mut numeric: Vec<i8> = scores.iter().filter_map(|s| s.as_value()).collect();
    numeric.sort_unstable();
    match numeric.len() {
        3 => AnnotationScore::Value(numeric[1]),
        2 => {
            let doubled = numeric[0] as i32 + numeric[1] as i32;
            // Mean with truncation toward zero; doubled/2 truncates in Rust.
            AnnotationScore::Value((doubled / 2) as i8)
        }
        // Unreachable with three distinct scores (at most one can be ND),
        // but total anyway.
        _ => AnnotationScore::NonDistinguishable,
    }
}

/// Weighted precision, recall, and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Multi-class weighted P/R/F1 over (true, predicted) label pairs. Class
/// weights are proportional to true-class support; classes never seen as a
/// true label contribute nothing.
pub fn weighted_prf(
    pairs: &[(usize, usize)],
    n_classes: usize,
) -> Result<WeightedPrf, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total = pairs.len() as f64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f1 = 0.0;
    for class in 0..n_classes {
        let tp = pairs
            .iter()
            .filter(|(t, p)| *t == class && *p == class)
            .count() as f64;
        let fp = pairs
            .iter()
            .filter(|(t, p)| *t != class && *p == class)
            .count() as f64;
        let fn_ = pairs
            .iter()
            .filter(|(t, p)| *t == class && *p != class)
            .count() as f64;
        let support = tp + fn_;
        if support == 0.0 {
            continue;
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = tp / support;
        let f = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        let weight = support / total;
        precision += weight * p;
        recall += weight * r;
        f1 += weight * f;
    }
    Ok(WeightedPrf {
        precision,
        recall,
        f1,
        support: pairs.len() as u64,
    })
}

/// Level 1: presence (numeric score) versus absence (non-distinguishable).
pub fn agreement_level1(
    pairs: &[(AnnotationScore, AnnotationScore)],
) -> Result<WeightedPrf, MetricsError> {
    let encoded: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(truth, pred)| {
            (
                usize::from(!truth.is_numeric()),
                usize::from(!pred.is_numeric()),
            )
        })
        .collect();
    weighted_prf(&encoded, 2)
}

/// Level 2: four-way score groups.
pub fn agreement_level2(
    pairs: &[(AnnotationScore, AnnotationScore)],
) -> Result<WeightedPrf, MetricsError> {
    let encoded: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(truth, pred)| {
            (
                score_to_group(*truth).index(),
                score_to_group(*pred).index(),
            )
        })
        .collect();
    weighted_prf(&encoded, 4)
}

/// Level 3 result: mean absolute error between the classifier score and the
/// mean numeric annotator score, over pairs where both sides are numeric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level3Report {
    pub mae: f64,
    pub pairs_used: u64,
    pub pairs_excluded: u64,
}

/// Level 3: MAE over (mean annotator score, classifier score) pairs. Pairs
/// where either side is non-numeric are excluded and counted.
pub fn agreement_level3(pairs: &[(Option<f64>, Option<i8>)]) -> Result<Level3Report, MetricsError> {
    let mut used = 0u64;
    let mut excluded = 0u64;
    let mut error_sum = 0.0;
    for (human, classifier) in pairs {
        match (human, classifier) {
            (Some(mean_score), Some(score)) => {
                used += 1;
                let diff = *score as f64 - mean_score;
                error_sum += if diff < 0.0 { -diff } else { diff };
            }
            _ => excluded += 1,
        }
    }
    if used == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(Level3Report {
        mae: error_sum / used as f64,
        pairs_used: used,
        pairs_excluded: excluded,
    })
}

/// 3x4 prompted-level x detected-group count matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Rows L/M/H, columns Low/Mid/High/ND.
    pub counts: [[u64; 4]; 3],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: &[(PromptedLevel, ScoreGroup)]) -> Self {
        let mut matrix = ConfusionMatrix::default();
        for (level, group) in pairs {
            matrix.counts[level.index()][group.index()] += 1;
        }
        matrix
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, level: PromptedLevel) -> u64 {
        self.counts[level.index()].iter().sum()
    }

    pub fn get(&self, level: PromptedLevel, group: ScoreGroup) -> u64 {
        self.counts[level.index()][group.index()]
    }

    /// Rows normalized to proportions; all-zero rows stay zero.
    pub fn row_normalized(&self) -> [[f64; 4]; 3] {
        let mut out = [[0.0; 4]; 3];
        for (r, row) in self.counts.iter().enumerate() {
            let sum: u64 = row.iter().sum();
            if sum > 0 {
                for (c, &cell) in row.iter().enumerate() {
                    out[r][c] = cell as f64 / sum as f64;
                }
            }
        }
        out
    }
}

/// Bias flags for one trait's confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BiasFlags {
    /// Prompted-high texts detected low more often than the threshold.
    pub low_bias: bool,
    /// Prompted-low texts detected high more often than the threshold.
    pub high_bias: bool,
    /// Prompted-mid texts follow a flagged low bias.
    pub mid_follows_low: bool,
    /// Prompted-mid texts follow a flagged high bias.
    pub mid_follows_high: bool,
}

impl BiasFlags {
    pub fn any(&self) -> bool {
        self.low_bias || self.high_bias || self.mid_follows_low || self.mid_follows_high
    }
}

/// Share of one detected group among a row's non-ND detections.
fn directional_share(
    matrix: &ConfusionMatrix,
    level: PromptedLevel,
    group: ScoreGroup,
) -> Option<f64> {
    let row = matrix.counts[level.index()];
    let detected: u64 = row[..3].iter().sum();
    if detected == 0 {
        None
    } else {
        Some(row[group.index()] as f64 / detected as f64)
    }
}

/// Flags directional bias in a confusion matrix.
///
/// Low bias: among prompted-high texts, the share detected low (of non-ND
/// detections) exceeds the threshold; high bias symmetrically for
/// prompted-low texts. Mid-follows flags fire when prompted-mid texts land
/// in an already-flagged direction at least as often as the threshold.
/// The threshold must lie in (0.5, 1].
pub fn detect_bias(matrix: &ConfusionMatrix, threshold: f64) -> BiasFlags {
    assert!(
        threshold > 0.5 && threshold <= 1.0,
        "bias threshold must be in (0.5, 1], got {threshold}"
    );
    let mut flags = BiasFlags::default();
    if let Some(share) = directional_share(matrix, PromptedLevel::High, ScoreGroup::Low) {
        flags.low_bias = share > threshold;
    }
    if let Some(share) = directional_share(matrix, PromptedLevel::Low, ScoreGroup::High) {
        flags.high_bias = share > threshold;
    }
    if flags.low_bias {
        if let Some(share) = directional_share(matrix, PromptedLevel::Mid, ScoreGroup::Low) {
            flags.mid_follows_low = share >= threshold;
        }
    }
    if flags.high_bias {
        if let Some(share) = directional_share(matrix, PromptedLevel::Mid, ScoreGroup::High) {
            flags.mid_follows_high = share >= threshold;
        }
    }
    flags
}

/// Where non-distinguishable verdicts land for one trait.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NdDistribution {
    pub total: u64,
    pub nd_count: u64,
    /// Fraction of verdicts that were non-distinguishable.
    pub nd_rate: f64,
    /// Counts of ND verdicts by prompted level (L, M, H).
    pub nd_by_level: [u64; 3],
    /// Shares of ND verdicts by prompted level; sums to 1 when any ND exist.
    pub level_shares: [f64; 3],
}

/// Computes the ND rate and the prompted-level breakdown of ND verdicts.
pub fn nd_distribution(pairs: &[(PromptedLevel, bool)]) -> NdDistribution {
    let mut dist = NdDistribution {
        total: pairs.len() as u64,
        ..NdDistribution::default()
    };
    for (level, is_nd) in pairs {
        if *is_nd {
            dist.nd_count += 1;
            dist.nd_by_level[level.index()] += 1;
        }
    }
    if dist.total > 0 {
        dist.nd_rate = dist.nd_count as f64 / dist.total as f64;
    }
    if dist.nd_count > 0 {
        for (share, count) in dist.level_shares.iter_mut().zip(dist.nd_by_level) {
            *share = count as f64 / dist.nd_count as f64;
        }
    }
    dist
}

/// Per-trait agreement between the classifier and human judgments, plus the
/// prompted-versus-detected views that need no human data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AgreementReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level1: Option<BTreeMap<BigFiveTrait, WeightedPrf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level2: Option<BTreeMap<BigFiveTrait, WeightedPrf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level3: Option<BTreeMap<BigFiveTrait, Level3Report>>,
    pub confusion: BTreeMap<BigFiveTrait, ConfusionMatrix>,
    pub bias: BTreeMap<BigFiveTrait, BiasFlags>,
    pub nd: BTreeMap<BigFiveTrait, NdDistribution>,
    /// (text, trait) pairs compared against human judgments.
    pub human_pairs: u64,
}

/// Human judgments aligned by (text id, trait): the voted final score and
/// the mean of the numeric annotator scores.
#[derive(Debug, Clone, Default)]
pub struct HumanJudgments {
    pub finals: BTreeMap<(String, BigFiveTrait), AnnotationScore>,
    pub numeric_means: BTreeMap<(String, BigFiveTrait), Option<f64>>,
}

/// Assembles the full agreement report.
///
/// Classifier outputs must reference known texts; orphans are an alignment
/// error. Levels 1-3 appear only when human judgments are supplied.
pub fn compile_agreement_report(
    texts: &[GeneratedText],
    outputs: &[ClassifierOutput],
    human: Option<&HumanJudgments>,
    bias_threshold: f64,
) -> Result<AgreementReport, MetricsError> {
    let by_id: BTreeMap<&str, &GeneratedText> = texts.iter().map(|t| (t.id.as_str(), t)).collect();
    let orphans: Vec<&str> = outputs
        .iter()
        .filter(|o| !by_id.contains_key(o.text_id.as_str()))
        .map(|o| o.text_id.as_str())
        .collect();
    if !orphans.is_empty() {
        let mut listed: Vec<&str> = orphans;
        listed.sort_unstable();
        listed.dedup();
        return Err(MetricsError::Misaligned(listed.join(", ")));
    }

    let mut confusion_pairs: BTreeMap<BigFiveTrait, Vec<(PromptedLevel, ScoreGroup)>> =
        BTreeMap::new();
    let mut nd_pairs: BTreeMap<BigFiveTrait, Vec<(PromptedLevel, bool)>> = BTreeMap::new();
    for output in outputs {
        let text = by_id[output.text_id.as_str()];
        let Some(prompted) = text.profile.score_for(output.trait_) else {
            // Classified for a trait the prompt never set (all-five mode on
            // single-trait texts): no prompted level to compare against.
            continue;
        };
        let level = prompt_score_to_level(prompted);
        let group = score_to_group(output.score);
        confusion_pairs
            .entry(output.trait_)
            .or_default()
            .push((level, group));
        nd_pairs
            .entry(output.trait_)
            .or_default()
            .push((level, group == ScoreGroup::NonDistinguishable));
    }

    let mut report = AgreementReport::default();
    for (trait_, pairs) in &confusion_pairs {
        let matrix = ConfusionMatrix::from_pairs(pairs);
        report
            .bias
            .insert(*trait_, detect_bias(&matrix, bias_threshold));
        report.confusion.insert(*trait_, matrix);
    }
    for (trait_, pairs) in &nd_pairs {
        report.nd.insert(*trait_, nd_distribution(pairs));
    }

    if let Some(human) = human {
        type ScorePairs = Vec<(AnnotationScore, AnnotationScore)>;
        type NumericPairs = Vec<(Option<f64>, Option<i8>)>;
        let mut level12: BTreeMap<BigFiveTrait, ScorePairs> = BTreeMap::new();
        let mut level3: BTreeMap<BigFiveTrait, NumericPairs> = BTreeMap::new();
        let mut compared = 0u64;
        for output in outputs {
            let key = (output.text_id.clone(), output.trait_);
            let Some(final_score) = human.finals.get(&key) else {
                continue;
            };
            compared += 1;
            level12
                .entry(output.trait_)
                .or_default()
                .push((*final_score, output.score));
            let mean_score = human.numeric_means.get(&key).copied().flatten();
            level3
                .entry(output.trait_)
                .or_default()
                .push((mean_score, output.score.as_value()));
        }
        if compared == 0 {
            return Err(MetricsError::EmptyInput);
        }
        report.human_pairs = compared;
        let mut l1 = BTreeMap::new();
        let mut l2 = BTreeMap::new();
        let mut l3 = BTreeMap::new();
        for (trait_, pairs) in &level12 {
            l1.insert(*trait_, agreement_level1(pairs)?);
            l2.insert(*trait_, agreement_level2(pairs)?);
        }
        for (trait_, pairs) in &level3 {
            if let Ok(result) = agreement_level3(pairs) {
                l3.insert(*trait_, result);
            }
        }
        report.level1 = Some(l1);
        report.level2 = Some(l2);
        report.level3 = Some(l3);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn nd() -> AnnotationScore {
        AnnotationScore::NonDistinguishable
    }

    fn val(v: i8) -> AnnotationScore {
        AnnotationScore::Value(v)
    }

    #[test]
    fn alpha_of_identical_items_is_one() {
        let matrix = RatingMatrix::from_rows(&[vec![1, 1], vec![2, 2], vec![3, 3]]).unwrap();
        let alpha = cronbach_alpha(&matrix).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12, "alpha {alpha}");
    }

    #[test]
    fn alpha_hand_computed_two_item_matrix() {
        // Items (1,2,3) and (2,3,4): item variances 2/3 each, totals
        // (3,5,7) with variance 8/3. alpha = 2 * (1 - (4/3)/(8/3)) = 1.0.
        let matrix = RatingMatrix::from_rows(&[vec![1, 2], vec![2, 3], vec![3, 4]]).unwrap();
        assert!((cronbach_alpha(&matrix).unwrap() - 1.0).abs() < 1e-12);
        // A matrix with genuine noise, evaluated against the formula by
        // hand: items (1,3,5) and (2,2,5).
        // var1 = 8/3, var2 = 2, totals (3,5,10) var = 26/3 - ... compute:
        // mean 6, var = ((3-6)^2+(5-6)^2+(10-6)^2)/3 = (9+1+16)/3 = 26/3.
        // alpha = 2 * (1 - (8/3 + 2)/(26/3)) = 2 * (1 - 14/26) = 12/13.
        let matrix = RatingMatrix::from_rows(&[vec![1, 2], vec![3, 2], vec![5, 5]]).unwrap();
        assert!((cronbach_alpha(&matrix).unwrap() - 12.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_degenerate_on_constant_rows() {
        let matrix = RatingMatrix::from_rows(&[vec![2, 4], vec![2, 4], vec![2, 4]]).unwrap();
        assert_eq!(cronbach_alpha(&matrix), Err(MetricsError::DegenerateMatrix));
    }

    #[test]
    fn lambda6_parallel_items_exactly_one() {
        let matrix =
            RatingMatrix::from_rows(&[vec![1, 1, 1], vec![2, 2, 2], vec![4, 4, 4]]).unwrap();
        let lambda = guttman_lambda6(&matrix).unwrap();
        assert!((lambda - 1.0).abs() < 1e-12, "lambda {lambda}");
    }

    #[test]
    fn lambda6_zero_variance_is_singular() {
        let matrix = RatingMatrix::from_rows(&[vec![3, 3], vec![3, 3], vec![3, 3]]).unwrap();
        assert_eq!(
            guttman_lambda6(&matrix),
            Err(MetricsError::SingularCovariance)
        );
    }

    #[test]
    fn lambda2_parallel_items_exactly_one() {
        let matrix = RatingMatrix::from_rows(&[vec![1, 1], vec![2, 2], vec![3, 3]]).unwrap();
        assert!((guttman_lambda2(&matrix).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_constructor_validates() {
        assert_eq!(
            RatingMatrix::from_rows(&[vec![1, 2], vec![1]]),
            Err(MetricsError::NotRectangular)
        );
        assert_eq!(
            RatingMatrix::from_rows(&[vec![1, 2]]),
            Err(MetricsError::TooSmall { rows: 1, cols: 2 })
        );
        assert_eq!(
            RatingMatrix::from_rows(&[vec![1, 6], vec![1, 2]]),
            Err(MetricsError::CellOutOfRange(6))
        );
    }

    #[test]
    fn fleiss_perfect_agreement_is_one() {
        // Unanimous raters, two categories actually used across subjects.
        let counts = vec![vec![3, 0], vec![0, 3], vec![3, 0]];
        assert!((fleiss_kappa(&counts).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fleiss_even_split_hand_computed() {
        // Two raters, every subject split 1/1: P-bar = 0, Pe = 0.5,
        // kappa = (0 - 0.5) / 0.5 = -1.
        let counts = vec![vec![1, 1], vec![1, 1], vec![1, 1], vec![1, 1]];
        assert!((fleiss_kappa(&counts).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn fleiss_degenerate_single_category() {
        let counts = vec![vec![3, 0], vec![3, 0]];
        assert_eq!(
            fleiss_kappa(&counts),
            Err(MetricsError::DegenerateAgreement)
        );
    }

    #[test]
    fn fleiss_rejects_unequal_rater_counts() {
        let counts = vec![vec![2, 1], vec![1, 1]];
        assert_eq!(fleiss_kappa(&counts), Err(MetricsError::BadRaterCounts));
    }

    #[test]
    fn score_group_map_is_the_published_table() {
        assert_eq!(score_to_group(val(-2)), ScoreGroup::Low);
        assert_eq!(score_to_group(val(-1)), ScoreGroup::Low);
        assert_eq!(score_to_group(val(0)), ScoreGroup::Mid);
        assert_eq!(score_to_group(val(1)), ScoreGroup::High);
        assert_eq!(score_to_group(val(2)), ScoreGroup::High);
        assert_eq!(score_to_group(nd()), ScoreGroup::NonDistinguishable);
    }

    #[test]
    fn prompt_level_map() {
        let level = |n: u8| prompt_score_to_level(PromptScore::new(n).unwrap());
        assert_eq!(level(1), PromptedLevel::Low);
        assert_eq!(level(2), PromptedLevel::Low);
        assert_eq!(level(3), PromptedLevel::Mid);
        assert_eq!(level(4), PromptedLevel::High);
        assert_eq!(level(5), PromptedLevel::High);
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote([val(1), val(1), val(-2)]), val(1));
        assert_eq!(majority_vote([val(2), val(0), val(-1)]), val(0));
        // ND plus 1 and 2: mean 1.5 rounds toward zero.
        assert_eq!(majority_vote([nd(), val(1), val(2)]), val(1));
        assert_eq!(majority_vote([nd(), nd(), val(1)]), nd());
        assert_eq!(majority_vote([nd(), val(-1), val(-2)]), val(-1));
    }

    #[test]
    fn weighted_recall_half_when_classifier_says_always_present() {
        // Humans: two present, two absent; classifier: all present.
        let pairs = vec![
            (val(1), val(2)),
            (val(-1), val(0)),
            (nd(), val(1)),
            (nd(), val(0)),
        ];
        let scores = agreement_level1(&pairs).unwrap();
        assert!((scores.recall - 0.5).abs() < 1e-12);
        // Present class: P = 2/4, R = 1; absent: P = 0, R = 0.
        assert!((scores.precision - 0.25).abs() < 1e-12);
    }

    #[test]
    fn level1_perfect_agreement() {
        let pairs = vec![(val(2), val(1)), (nd(), nd()), (val(0), val(-2))];
        let scores = agreement_level1(&pairs).unwrap();
        assert_eq!(scores.precision, 1.0);
        assert_eq!(scores.recall, 1.0);
        assert_eq!(scores.f1, 1.0);
    }

    #[test]
    fn level2_hand_computed_eight_pairs() {
        // Groups (truth -> prediction): six exact, two confusions.
        let pairs = vec![
            (val(-2), val(-1)), // low -> low
            (val(-1), val(-2)), // low -> low
            (val(0), val(0)),   // mid -> mid
            (val(0), val(1)),   // mid -> high (confusion)
            (val(1), val(2)),   // high -> high
            (val(2), val(1)),   // high -> high
            (nd(), nd()),       // nd -> nd
            (nd(), val(0)),     // nd -> mid (confusion)
        ];
        let scores = agreement_level2(&pairs).unwrap();
        // Hand evaluation:
        //   low: support 2, P=1, R=1, F=1
        //   mid: support 2, P=1/2 (one true mid + one nd predicted mid), R=1/2, F=1/2
        //   high: support 2, P=2/3, R=1, F=4/5
        //   nd: support 2, P=1, R=1/2, F=2/3
        // Weighted (equal supports): P=(1+0.5+2/3+1)/4, R=(1+0.5+1+0.5)/4,
        // F=(1+0.5+0.8+2/3)/4.
        assert!((scores.precision - (1.0 + 0.5 + 2.0 / 3.0 + 1.0) / 4.0).abs() < 1e-12);
        assert!((scores.recall - 0.75).abs() < 1e-12);
        assert!((scores.f1 - (1.0 + 0.5 + 0.8 + 2.0 / 3.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn level3_examples() {
        let pairs = vec![(Some(5.0 / 3.0), Some(2)), (Some(1.0), Some(1))];
        let report = agreement_level3(&pairs).unwrap();
        assert!((report.mae - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(report.pairs_used, 2);

        let identical = vec![(Some(2.0), Some(2)), (Some(-1.0), Some(-1))];
        assert_eq!(agreement_level3(&identical).unwrap().mae, 0.0);

        let all_excluded = vec![(None, Some(1)), (Some(1.0), None)];
        assert_eq!(
            agreement_level3(&all_excluded),
            Err(MetricsError::EmptyInput)
        );
    }

    #[test]
    fn confusion_matrix_counts_and_normalization() {
        let pairs = vec![
            (PromptedLevel::High, ScoreGroup::High),
            (PromptedLevel::High, ScoreGroup::High),
            (PromptedLevel::High, ScoreGroup::Low),
            (PromptedLevel::Mid, ScoreGroup::Mid),
            (PromptedLevel::Low, ScoreGroup::NonDistinguishable),
            (PromptedLevel::Low, ScoreGroup::Low),
        ];
        let matrix = ConfusionMatrix::from_pairs(&pairs);
        assert_eq!(matrix.total(), 6);
        assert_eq!(matrix.get(PromptedLevel::High, ScoreGroup::High), 2);
        assert_eq!(matrix.get(PromptedLevel::High, ScoreGroup::Low), 1);
        assert_eq!(
            matrix.get(PromptedLevel::Low, ScoreGroup::NonDistinguishable),
            1
        );
        assert_eq!(matrix.row_sum(PromptedLevel::High), 3);
        let normalized = matrix.row_normalized();
        for row in normalized {
            let sum: f64 = row.iter().sum();
            assert!(sum == 0.0 || (sum - 1.0).abs() < 1e-12);
        }

        let empty = ConfusionMatrix::from_pairs(&[]);
        assert_eq!(empty.total(), 0);
    }

    #[test]
    fn bias_flags_fire_per_the_threshold() {
        // Prompted-high row: 9 low, 0 mid, 1 high, 0 nd -> share 0.9 > 0.7.
        let mut matrix = ConfusionMatrix::default();
        matrix.counts[PromptedLevel::High.index()] = [9, 0, 1, 0];
        let flags = detect_bias(&matrix, 0.7);
        assert!(flags.low_bias);
        assert!(!flags.high_bias);
        assert!(!flags.mid_follows_low);

        // Balanced matrix: nothing fires.
        let balanced = ConfusionMatrix {
            counts: [[2, 2, 2, 0], [2, 2, 2, 0], [2, 2, 2, 0]],
        };
        assert!(!detect_bias(&balanced, 0.7).any());
    }

    #[test]
    fn mid_rows_follow_a_flagged_bias() {
        let matrix = ConfusionMatrix {
            counts: [[1, 0, 0, 0], [8, 1, 1, 0], [9, 0, 1, 2]],
        };
        let flags = detect_bias(&matrix, 0.7);
        assert!(flags.low_bias);
        assert!(flags.mid_follows_low);
        assert!(!flags.mid_follows_high);
    }

    #[test]
    fn nd_distribution_examples() {
        let none: Vec<(PromptedLevel, bool)> =
            vec![(PromptedLevel::Low, false), (PromptedLevel::High, false)];
        assert_eq!(nd_distribution(&none).nd_rate, 0.0);

        let mut pairs = vec![(PromptedLevel::Low, true); 3];
        pairs.extend(vec![(PromptedLevel::High, false); 9]);
        let dist = nd_distribution(&pairs);
        assert!((dist.nd_rate - 0.25).abs() < 1e-12);
        assert_eq!(dist.level_shares, [1.0, 0.0, 0.0]);
    }
}
