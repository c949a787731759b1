//! Language-modeling objectives as pure functions over log-probabilities:
//! causal LM and supervised fine-tuning negative log-likelihoods, and the
//! direct-preference-optimization loss with its analytic gradient.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("log-probability sequence is empty")]
    Empty,
    #[error("log-probability at position {index} is {value}; must be finite and <= 0")]
    BadLogProb { index: usize, value: f64 },
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("{0} is not finite")]
    NonFinite(&'static str),
    #[error("batch is empty")]
    EmptyBatch,
}

/// Per-token log-probabilities, one per position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TokenLogProbs(Vec<f64>);

impl TokenLogProbs {
    pub fn new(values: Vec<f64>) -> Result<Self, ObjectiveError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v > 0.0) {
            return Err(ObjectiveError::BadLogProb { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for TokenLogProbs {
    type Error = ObjectiveError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<TokenLogProbs> for Vec<f64> {
    fn from(lp: TokenLogProbs) -> Self {
        lp.0
    }
}

fn nll(lp: &TokenLogProbs) -> Result<f64, ObjectiveError> {
    if lp.is_empty() {
        return Err(ObjectiveError::Empty);
    }
    // -0.0 for an all-zero sequence would print oddly; normalize to +0
    Ok(-lp.0.iter().sum::<f64>() + 0.0)
}

/// Causal LM loss: `−Σ_t log P(x_t | x_<t)`.
pub fn clm_loss(lp: &TokenLogProbs) -> Result<f64, ObjectiveError> {
    nll(lp)
}

/// SFT loss over response positions only; the caller drops instruction tokens.
pub fn sft_loss(response_lp: &TokenLogProbs) -> Result<f64, ObjectiveError> {
    nll(response_lp)
}

pub const DEFAULT_BETA: f64 = 0.1;

fn default_beta() -> f64 {
    DEFAULT_BETA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoInputs {
    pub logp_theta_chosen: f64,
    pub logp_theta_rejected: f64,
    pub logp_ref_chosen: f64,
    pub logp_ref_rejected: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl DpoInputs {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(ObjectiveError::BadBeta(self.beta));
        }
        for (name, v) in [
            ("logp_theta_chosen", self.logp_theta_chosen),
            ("logp_theta_rejected", self.logp_theta_rejected),
            ("logp_ref_chosen", self.logp_ref_chosen),
            ("logp_ref_rejected", self.logp_ref_rejected),
        ] {
            if !v.is_finite() {
                return Err(ObjectiveError::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// Partials of the DPO loss, in `DpoInputs` field order. The reference
/// terms are constants and always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoGradient {
    pub theta_chosen: f64,
    pub theta_rejected: f64,
    pub ref_chosen: f64,
    pub ref_rejected: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoOutput {
    pub loss: f64,
    /// Chosen minus rejected implicit reward.
    pub reward_margin: f64,
    pub gradient: DpoGradient,
}

/// `σ(x)` without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−ln σ(m) = ln(1 + e^{−m})`, stable on both tails.
pub fn neg_log_sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

pub fn dpo_loss_and_margin(input: &DpoInputs) -> Result<DpoOutput, ObjectiveError> {
    input.validate()?;
    let delta =
        (input.logp_theta_chosen - input.logp_ref_chosen) - (input.logp_theta_rejected - input.logp_ref_rejected);
    let m = input.beta * delta;
    // 1 − σ(m) = σ(−m), which keeps precision when m is large
    let g = input.beta * sigmoid(-m);
    Ok(DpoOutput {
        loss: neg_log_sigmoid(m),
        reward_margin: m,
        gradient: DpoGradient {
            theta_chosen: -g,
            theta_rejected: g,
            ref_chosen: 0.0,
            ref_rejected: 0.0,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoBatchSummary {
    pub mean_loss: f64,
    pub mean_reward_margin: f64,
    pub count: usize,
}

/// The expectation over preference pairs as an arithmetic batch mean.
pub fn dpo_batch(inputs: &[DpoInputs]) -> Result<DpoBatchSummary, ObjectiveError> {
    if inputs.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let (mut loss, mut margin) = (0.0, 0.0);
    for i in inputs {
        let o = dpo_loss_and_margin(i)?;
        loss += o.loss;
        margin += o.reward_margin;
    }
    let n = inputs.len() as f64;
    Ok(DpoBatchSummary {
        mean_loss: loss / n,
        mean_reward_margin: margin / n,
        count: inputs.len(),
    })
}

/// One line of `objectives eval` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "lowercase")]
pub enum ObjectiveRecord {
    Clm { logprobs: TokenLogProbs },
    Sft { logprobs: TokenLogProbs },
    Dpo(DpoInputs),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "lowercase")]
pub enum ObjectiveResult {
    Clm { loss: f64 },
    Sft { loss: f64 },
    Dpo(DpoOutput),
}

pub fn evaluate(record: &ObjectiveRecord) -> Result<ObjectiveResult, ObjectiveError> {
    Ok(match record {
        ObjectiveRecord::Clm { logprobs } => ObjectiveResult::Clm {
            loss: clm_loss(logprobs)?,
        },
        ObjectiveRecord::Sft { logprobs } => ObjectiveResult::Sft {
            loss: sft_loss(logprobs)?,
        },
        ObjectiveRecord::Dpo(d) => ObjectiveResult::Dpo(dpo_loss_and_margin(d)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(v: &[f64]) -> TokenLogProbs {
        TokenLogProbs::new(v.to_vec()).unwrap()
    }

    fn dpo(tw: f64, tl: f64, rw: f64, rl: f64, beta: f64) -> DpoInputs {
        DpoInputs {
            logp_theta_chosen: tw,
            logp_theta_rejected: tl,
            logp_ref_chosen: rw,
            logp_ref_rejected: rl,
            beta,
        }
    }

    #[test]
    fn nll_examples() {
        let l4 = -(4f64.ln());
        assert!((clm_loss(&lp(&[l4, l4, l4])).unwrap() - 4.158883083359672).abs() < 1e-12);
        assert_eq!(clm_loss(&lp(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(clm_loss(&lp(&[-0.5, -1.0])).unwrap(), 1.5);
        assert_eq!(sft_loss(&lp(&[-0.2, -0.3])).unwrap(), 0.5);
        assert_eq!(sft_loss(&lp(&[])), Err(ObjectiveError::Empty));
    }

    #[test]
    fn rejects_invalid_logprobs() {
        assert!(TokenLogProbs::new(vec![-0.1, 0.2]).is_err());
        assert!(TokenLogProbs::new(vec![f64::NEG_INFINITY]).is_err());
        assert!(serde_json::from_str::<TokenLogProbs>("[0.5]").is_err());
        assert!(dpo_loss_and_margin(&dpo(0.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn dpo_examples() {
        let o = dpo_loss_and_margin(&dpo(-3.0, -5.0, -3.0, -5.0, 0.1)).unwrap();
        assert_eq!(o.reward_margin, 0.0);
        assert!((o.loss - std::f64::consts::LN_2).abs() < 1e-15);
        // oracle: ln(1 + e^-0.2)
        let o = dpo_loss_and_margin(&dpo(0.0, -2.0, -1.0, -1.0, 0.1)).unwrap();
        assert!((o.reward_margin - 0.2).abs() < 1e-15);
        assert!((o.loss - 0.598138869381592).abs() < 1e-12);
        assert_eq!(o.gradient.ref_chosen, 0.0);
    }

    #[test]
    fn stable_tails() {
        assert!(neg_log_sigmoid(800.0) >= 0.0 && neg_log_sigmoid(800.0) < 1e-300);
        assert!((neg_log_sigmoid(-800.0) - 800.0).abs() < 1e-9);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }

    #[test]
    fn record_roundtrip() {
        let r: ObjectiveRecord = serde_json::from_str(r#"{"objective":"clm","logprobs":[-0.5,-1.0]}"#).unwrap();
        assert_eq!(evaluate(&r).unwrap(), ObjectiveResult::Clm { loss: 1.5 });
        let r: ObjectiveRecord = serde_json::from_str(
            r#"{"objective":"dpo","logp_theta_chosen":-1,"logp_theta_rejected":-1,"logp_ref_chosen":-1,"logp_ref_rejected":-1}"#,
        )
        .unwrap();
        match evaluate(&r).unwrap() {
            ObjectiveResult::Dpo(o) => assert!((o.loss - std::f64::consts::LN_2).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn nll_additive(a in prop::collection::vec(-20.0f64..=0.0, 1..20), b in prop::collection::vec(-20.0f64..=0.0, 1..20)) {
            let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
            let total = clm_loss(&lp(&joined)).unwrap();
            let parts = clm_loss(&lp(&a)).unwrap() + clm_loss(&lp(&b)).unwrap();
            prop_assert!(total >= 0.0);
            prop_assert!((total - parts).abs() <= 1e-9 * (1.0 + total));
        }

        #[test]
        fn dpo_decreasing_in_margin(d1 in -50.0f64..50.0, d2 in -50.0f64..50.0, beta in 0.01f64..2.0) {
            prop_assume!((d1 - d2).abs() > 1e-6);
            let l1 = dpo_loss_and_margin(&dpo(d1, 0.0, 0.0, 0.0, beta)).unwrap();
            let l2 = dpo_loss_and_margin(&dpo(d2, 0.0, 0.0, 0.0, beta)).unwrap();
            let (lo, hi) = if l1.reward_margin < l2.reward_margin { (l1, l2) } else { (l2, l1) };
            prop_assert!(lo.loss > hi.loss || (lo.loss - hi.loss).abs() < 1e-300);
        }

        #[test]
        fn beta_scales_margin(d in -10.0f64..10.0, k in 0u32..6) {
            let c = f64::from(1u32 << k);
            let m1 = dpo_loss_and_margin(&dpo(d, 0.0, 0.0, 0.0, 0.1)).unwrap().reward_margin;
            let m2 = dpo_loss_and_margin(&dpo(d, 0.0, 0.0, 0.0, 0.1 * c)).unwrap().reward_margin;
            prop_assert_eq!(m2, c * m1);
        }
    }
}
