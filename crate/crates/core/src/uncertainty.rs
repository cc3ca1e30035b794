//! Ensemble uncertainty decomposition and detection metrics.
//!
//! At every decoding position each ensemble member proposes a distribution
//! over the next token. The entropy of the averaged distribution splits
//! into a data part (mean member entropy: all members are individually
//! unsure) and a model part (the remainder: members are individually sure
//! but disagree). Natural log throughout; `0 * ln 0` counts as zero.

use thiserror::Error;

/// Sparse next-token distribution: (token, probability) pairs.
pub type TokenDist = Vec<(String, f64)>;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("no ensemble members")]
    NoMembers,
    #[error("member {member} has an empty distribution")]
    EmptyDist { member: usize },
    #[error("member {member} probabilities sum to {sum}, expected 1")]
    BadSum { member: usize, sum: f64 },
    #[error("member {member} has a negative probability for {token:?}")]
    NegativeProb { member: usize, token: String },
    #[error("beam {beam} reports {found} member log probabilities, expected {expected}")]
    MemberMismatch {
        beam: usize,
        expected: usize,
        found: usize,
    },
    #[error("beam {beam} has zero tokens")]
    EmptyBeam { beam: usize },
    #[error("non-finite value encountered")]
    NonFinite,
}

/// Shannon entropy in nats, skipping zero entries. A point distribution
/// gives exactly 0.0, never -0.0.
pub fn entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h + 0.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenUncertainty {
    /// Entropy of the member-averaged distribution.
    pub h: f64,
    /// Mean member entropy.
    pub u_data: f64,
    /// `h - u_data`; zero for a single member by construction.
    pub u_model: f64,
}

/// Decomposes one position given every member's next-token distribution.
pub fn token_uncertainty(member_dists: &[TokenDist]) -> Result<TokenUncertainty, DistError> {
    let m = member_dists.len();
    if m == 0 {
        return Err(DistError::NoMembers);
    }

    // Union support in first-seen order, member 0 first. The order does not
    // change any value; it only fixes the iteration.
    let mut support: Vec<&str> = Vec::new();
    let mut index: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (member, dist) in member_dists.iter().enumerate() {
        if dist.is_empty() {
            return Err(DistError::EmptyDist { member });
        }
        let mut sum = 0.0;
        for (token, p) in dist {
            if !p.is_finite() {
                return Err(DistError::NonFinite);
            }
            if *p < 0.0 {
                return Err(DistError::NegativeProb {
                    member,
                    token: token.clone(),
                });
            }
            sum += p;
            index.entry(token.as_str()).or_insert_with(|| {
                support.push(token.as_str());
                support.len() - 1
            });
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(DistError::BadSum { member, sum });
        }
    }

    let mut mean = vec![0.0f64; support.len()];
    let mut u_data = 0.0;
    for dist in member_dists {
        let mut dense = vec![0.0f64; support.len()];
        for (token, p) in dist {
            dense[index[token.as_str()]] += p;
        }
        u_data += entropy(&dense);
        for (slot, p) in mean.iter_mut().zip(&dense) {
            *slot += p;
        }
    }
    u_data /= m as f64;
    for slot in mean.iter_mut() {
        *slot /= m as f64;
    }
    let h = entropy(&mean);
    Ok(TokenUncertainty {
        h,
        u_data,
        u_model: h - u_data + 0.0,
    })
}

/// Per-question maxima of the per-position decompositions. `max_h_single`
/// tracks the first member alone, the single-model baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuestionScores {
    pub max_u_data: f64,
    pub max_u_model: f64,
    pub max_h: f64,
    pub max_h_single: f64,
}

pub fn question_scores<'a, I>(positions: I) -> Result<QuestionScores, DistError>
where
    I: IntoIterator<Item = &'a [TokenDist]>,
{
    let mut scores = QuestionScores::default();
    for member_dists in positions {
        let t = token_uncertainty(member_dists)?;
        scores.max_u_data = scores.max_u_data.max(t.u_data);
        scores.max_u_model = scores.max_u_model.max(t.u_model);
        scores.max_h = scores.max_h.max(t.h);
        let mut dense: Vec<f64> = member_dists[0].iter().map(|(_, p)| *p).collect();
        dense.retain(|&p| p > 0.0);
        scores.max_h_single = scores.max_h_single.max(entropy(&dense));
    }
    Ok(scores)
}

/// Sequence-level evidence for one beam hypothesis: each member's log
/// probability of the whole token sequence, and the sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamScore {
    pub member_logprobs: Vec<f64>,
    pub token_len: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProgramUncertainty {
    pub u_total: f64,
    pub u_model: f64,
    pub u_data: f64,
}

/// Sequence-level decomposition over the beam list. Hypotheses are weighted
/// by the geometric-mean member probability; log probabilities are length
/// normalized.
pub fn program_uncertainty(beams: &[BeamScore]) -> Result<ProgramUncertainty, DistError> {
    if beams.is_empty() {
        return Ok(ProgramUncertainty::default());
    }
    let m = beams[0].member_logprobs.len();
    if m == 0 {
        return Err(DistError::NoMembers);
    }
    for (i, beam) in beams.iter().enumerate() {
        if beam.member_logprobs.len() != m {
            return Err(DistError::MemberMismatch {
                beam: i,
                expected: m,
                found: beam.member_logprobs.len(),
            });
        }
        if beam.token_len == 0 {
            return Err(DistError::EmptyBeam { beam: i });
        }
        if beam.member_logprobs.iter().any(|lp| !lp.is_finite()) {
            return Err(DistError::NonFinite);
        }
    }

    let mean_logs: Vec<f64> = beams
        .iter()
        .map(|b| b.member_logprobs.iter().sum::<f64>() / m as f64)
        .collect();
    let weights = softmax(&mean_logs);
    // log of the member-averaged sequence probability.
    let log_avg: Vec<f64> = beams
        .iter()
        .map(|b| log_sum_exp(&b.member_logprobs) - (m as f64).ln())
        .collect();

    let mut u_total = 0.0;
    let mut u_model = 0.0;
    for ((beam, &w), &lp_avg) in beams.iter().zip(&weights).zip(&log_avg) {
        let scale = w / beam.token_len as f64;
        u_total -= scale * lp_avg;
        let mean_member = beam.member_logprobs.iter().sum::<f64>() / m as f64;
        u_model += scale * (lp_avg - mean_member);
    }
    // `+ 0.0` turns a -0.0 from exact cancellation into plain zero.
    Ok(ProgramUncertainty {
        u_total: u_total + 0.0,
        u_model: u_model + 0.0,
        u_data: u_total - u_model + 0.0,
    })
}

fn softmax(logs: &[f64]) -> Vec<f64> {
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    peak + logs.iter().map(|l| (l - peak).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AmbiguityLabel {
    None,
    Mild,
    High,
}

impl AmbiguityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AmbiguityLabel::None => "none",
            AmbiguityLabel::Mild => "mild",
            AmbiguityLabel::High => "high",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "none" => Some(AmbiguityLabel::None),
            "mild" => Some(AmbiguityLabel::Mild),
            "high" => Some(AmbiguityLabel::High),
            _ => None,
        }
    }
}

/// Binary reduction of the three-way label for detection metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelReduction {
    /// Only high counts as positive.
    High,
    /// Mild and high count as positive.
    MildAndHigh,
}

impl LabelReduction {
    pub fn positive(self, label: AmbiguityLabel) -> bool {
        match self {
            LabelReduction::High => label == AmbiguityLabel::High,
            LabelReduction::MildAndHigh => label != AmbiguityLabel::None,
        }
    }
}

/// Flags a question as ambiguous. The boundary is non-strict on the
/// negative side: a score equal to the threshold is not flagged.
pub fn detect(score: f64, tau: f64) -> bool {
    score > tau
}

/// Fraction of scores strictly above the threshold.
pub fn detection_rate(scores: &[f64], tau: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&s| detect(s, tau)).count() as f64 / scores.len() as f64
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("scores and labels differ in length")]
    LengthMismatch,
    #[error("metric needs both a positive and a negative example")]
    SingleClass,
    #[error("scores must be finite")]
    NonFinite,
}

/// Area under the ROC curve by the rank statistic; tied scores get half
/// credit through mid-ranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share the mid-rank.
        let mid = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            if labels[k] {
                rank_sum += mid;
            }
        }
        i = j;
    }
    let pos_f = pos as f64;
    Ok((rank_sum - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}

/// Area under the precision-recall curve (average precision). Tied scores
/// enter as one atomic group.
pub fn aupr(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_tp = 0usize;
        let mut group_fp = 0usize;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                group_tp += 1;
            } else {
                group_fp += 1;
            }
            j += 1;
        }
        tp += group_tp;
        fp += group_fp;
        if group_tp > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += (group_tp as f64 / pos as f64) * precision;
        }
        i = j;
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> TokenDist {
        pairs.iter().map(|(t, p)| (t.to_string(), *p)).collect()
    }

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn certain_disagreement_is_model_uncertainty() {
        let members = vec![dist(&[("a", 1.0)]), dist(&[("b", 1.0)])];
        let t = token_uncertainty(&members).unwrap();
        assert!((t.u_data - 0.0).abs() < 1e-12);
        assert!((t.u_model - LN2).abs() < 1e-12);
        assert!((t.h - LN2).abs() < 1e-12);
    }

    #[test]
    fn shared_indecision_is_data_uncertainty() {
        let members = vec![
            dist(&[("a", 0.5), ("b", 0.5)]),
            dist(&[("a", 0.5), ("b", 0.5)]),
        ];
        let t = token_uncertainty(&members).unwrap();
        assert!((t.u_data - LN2).abs() < 1e-12);
        assert!(t.u_model.abs() < 1e-12);
    }

    #[test]
    fn mixed_case_decomposes() {
        let members = vec![
            dist(&[("a", 0.75), ("b", 0.25)]),
            dist(&[("a", 0.25), ("b", 0.75)]),
        ];
        let t = token_uncertainty(&members).unwrap();
        let h_member = -(0.75f64.ln() * 0.75 + 0.25f64.ln() * 0.25);
        assert!((t.h - LN2).abs() < 1e-12);
        assert!((t.u_data - h_member).abs() < 1e-12);
        assert!((t.u_model - (LN2 - h_member)).abs() < 1e-12);
    }

    #[test]
    fn single_member_has_exactly_zero_model_uncertainty() {
        let members = vec![dist(&[("a", 0.3), ("b", 0.45), ("c", 0.25)])];
        let t = token_uncertainty(&members).unwrap();
        assert_eq!(t.u_model, 0.0);
        assert_eq!(t.h, t.u_data);
    }

    #[test]
    fn decomposition_always_sums() {
        let members = vec![
            dist(&[("a", 0.1), ("b", 0.2), ("c", 0.7)]),
            dist(&[("c", 0.5), ("d", 0.5)]),
            dist(&[("a", 1.0)]),
        ];
        let t = token_uncertainty(&members).unwrap();
        assert_eq!(t.u_model, t.h - t.u_data);
        assert!(t.u_data >= 0.0 && t.h >= 0.0);
    }

    #[test]
    fn distribution_validation() {
        assert_eq!(token_uncertainty(&[]), Err(DistError::NoMembers));
        assert_eq!(
            token_uncertainty(&[vec![]]),
            Err(DistError::EmptyDist { member: 0 })
        );
        let err = token_uncertainty(&[dist(&[("a", 0.6), ("b", 0.6)])]).unwrap_err();
        assert!(matches!(err, DistError::BadSum { member: 0, .. }));
        let err = token_uncertainty(&[dist(&[("a", 1.5), ("b", -0.5)])]).unwrap_err();
        assert!(matches!(err, DistError::NegativeProb { member: 0, .. }));
    }

    #[test]
    fn question_scores_take_maxima() {
        let p0 = vec![dist(&[("a", 1.0)]), dist(&[("a", 1.0)])];
        let p1 = vec![dist(&[("a", 0.5), ("b", 0.5)]), dist(&[("a", 0.5), ("b", 0.5)])];
        let p2 = vec![dist(&[("a", 1.0)]), dist(&[("b", 1.0)])];
        let scores =
            question_scores([p0.as_slice(), p1.as_slice(), p2.as_slice()]).unwrap();
        assert!((scores.max_u_data - LN2).abs() < 1e-12);
        assert!((scores.max_u_model - LN2).abs() < 1e-12);
        assert!((scores.max_h - LN2).abs() < 1e-12);
        // Member 0 alone is undecided only at position 1.
        assert!((scores.max_h_single - LN2).abs() < 1e-12);
    }

    #[test]
    fn empty_question_scores_are_zero() {
        let scores = question_scores(std::iter::empty::<&[TokenDist]>()).unwrap();
        assert_eq!(scores, QuestionScores::default());
    }

    #[test]
    fn program_level_single_member_is_pure_data() {
        let beams = vec![
            BeamScore {
                member_logprobs: vec![(0.8f64).ln()],
                token_len: 4,
            },
            BeamScore {
                member_logprobs: vec![(0.2f64).ln()],
                token_len: 4,
            },
        ];
        let u = program_uncertainty(&beams).unwrap();
        assert_eq!(u.u_model, 0.0);
        assert!(u.u_total > 0.0);
        assert_eq!(u.u_data, u.u_total);
    }

    #[test]
    fn program_level_disagreement_shows_as_model() {
        // Two members, two beams, opposite preferences.
        let beams = vec![
            BeamScore {
                member_logprobs: vec![(0.9f64).ln(), (0.1f64).ln()],
                token_len: 10,
            },
            BeamScore {
                member_logprobs: vec![(0.1f64).ln(), (0.9f64).ln()],
                token_len: 10,
            },
        ];
        let u = program_uncertainty(&beams).unwrap();
        assert!(u.u_model > 0.0);
        assert!((u.u_total - (u.u_model + u.u_data)).abs() < 1e-12);
        // Weights are symmetric; averaged probability is 0.5 per beam.
        let expect_total = -(0.5f64.ln()) / 10.0;
        assert!((u.u_total - expect_total).abs() < 1e-12);
    }

    #[test]
    fn program_level_validation() {
        assert_eq!(
            program_uncertainty(&[]).unwrap(),
            ProgramUncertainty::default()
        );
        let err = program_uncertainty(&[
            BeamScore {
                member_logprobs: vec![-0.1, -0.2],
                token_len: 3,
            },
            BeamScore {
                member_logprobs: vec![-0.1],
                token_len: 3,
            },
        ])
        .unwrap_err();
        assert!(matches!(err, DistError::MemberMismatch { beam: 1, .. }));
        let err = program_uncertainty(&[BeamScore {
            member_logprobs: vec![-0.1],
            token_len: 0,
        }])
        .unwrap_err();
        assert!(matches!(err, DistError::EmptyBeam { beam: 0 }));
    }

    #[test]
    fn auroc_matches_hand_counts() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [false, false, true, true];
        assert!((auroc(&scores, &labels).unwrap() - 0.75).abs() < 1e-12);
        let labels_perfect = [false, true, false, true];
        let scores_perfect = [0.1, 0.9, 0.2, 0.8];
        assert_eq!(auroc(&scores_perfect, &labels_perfect).unwrap(), 1.0);
        let scores_reversed = [0.9, 0.1, 0.8, 0.2];
        assert_eq!(auroc(&scores_reversed, &labels_perfect).unwrap(), 0.0);
    }

    #[test]
    fn auroc_ties_get_half_credit() {
        assert_eq!(auroc(&[1.0, 1.0], &[true, false]).unwrap(), 0.5);
        // One tie pair out of two positive-negative pairs.
        let a = auroc(&[0.5, 0.5, 0.1], &[true, false, false]).unwrap();
        assert!((a - 0.75).abs() < 1e-12);
    }

    #[test]
    fn aupr_matches_hand_counts() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [false, false, true, true];
        let expect = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
        assert!((aupr(&scores, &labels).unwrap() - expect).abs() < 1e-12);
        assert_eq!(aupr(&[1.0, 1.0], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn metric_validation() {
        assert_eq!(
            auroc(&[0.1], &[true, false]).unwrap_err(),
            MetricError::LengthMismatch
        );
        assert_eq!(
            auroc(&[0.1, 0.2], &[true, true]).unwrap_err(),
            MetricError::SingleClass
        );
        assert_eq!(
            auroc(&[f64::NAN, 0.2], &[true, false]).unwrap_err(),
            MetricError::NonFinite
        );
        assert_eq!(
            aupr(&[0.1, 0.2], &[false, false]).unwrap_err(),
            MetricError::SingleClass
        );
    }

    #[test]
    fn labels_and_reductions() {
        for label in [AmbiguityLabel::None, AmbiguityLabel::Mild, AmbiguityLabel::High] {
            assert_eq!(AmbiguityLabel::parse(label.as_str()), Some(label));
        }
        assert_eq!(AmbiguityLabel::parse("severe"), None);
        assert!(LabelReduction::High.positive(AmbiguityLabel::High));
        assert!(!LabelReduction::High.positive(AmbiguityLabel::Mild));
        assert!(LabelReduction::MildAndHigh.positive(AmbiguityLabel::Mild));
        assert!(!LabelReduction::MildAndHigh.positive(AmbiguityLabel::None));
    }

    #[test]
    fn detection_rate_is_strict() {
        let scores = [0.0, 0.5, 1.0];
        assert_eq!(detection_rate(&scores, 0.5), 1.0 / 3.0);
        assert_eq!(detection_rate(&scores, -0.1), 1.0);
        assert_eq!(detection_rate(&scores, 1.0), 0.0);
        assert_eq!(detection_rate(&[], 0.0), 0.0);
    }
}
