//! Sharpness runs: how often each adversarial construction hits the event it
//! is built to make exact, against the exact target probability.

use serde::{Deserialize, Serialize};

use crate::adversarial::{
    check_planted, check_union_feasible, hommel_bound, meets_all_thresholds, sample_lemma21, sample_lemma31,
    sample_theorem21, sample_theorem23, unimprovability_betas, union_event,
};
use crate::error::{param, Error, Result};
use crate::procedures::{check_alpha, constants_kfwer_stepdown};
use crate::simulation::{binomial_se, collect_outcomes, replicate_rng, SLACK_SES};

/// A construction together with the parameters of its target event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "kebab-case")]
pub enum SharpnessSetup {
    /// Event: at least `k` values at or below `k alpha / s`. Target `alpha`.
    Thm21 { s: usize, k: usize, alpha: f64 },
    /// Event: the ordered values meet the first `i` k-FWER stepdown constants,
    /// with `alpha_i` multiplied by `inflation`. Target `inflation * alpha`.
    Thm23 { s: usize, k: usize, i: usize, alpha: f64, inflation: f64 },
    /// Event: the ordered values meet every beta. Target `beta_k / u`.
    Lemma21 { betas: Vec<f64>, u: f64 },
    /// Event: some ordered value meets its beta. Target the union bound.
    Lemma31 { t: usize, betas: Vec<f64> },
}

impl SharpnessSetup {
    pub fn name(&self) -> &'static str {
        match self {
            SharpnessSetup::Thm21 { .. } => "thm21",
            SharpnessSetup::Thm23 { .. } => "thm23",
            SharpnessSetup::Lemma21 { .. } => "lemma21",
            SharpnessSetup::Lemma31 { .. } => "lemma31",
        }
    }

    /// Validates the parameters and returns the exact target probability.
    pub fn target(&self) -> Result<f64> {
        match self {
            SharpnessSetup::Thm21 { s, k, alpha } => {
                check_alpha(*alpha)?;
                if *k == 0 || k > s {
                    return Err(param(format!("need 1 <= k <= s, got s = {s}, k = {k}")));
                }
                Ok(*alpha)
            }
            SharpnessSetup::Thm23 { s, k, i, alpha, inflation } => {
                let (betas, u) = unimprovability_betas(*s, *k, *i, *alpha, *inflation)?;
                check_planted(&betas, u)?;
                Ok(inflation * alpha)
            }
            SharpnessSetup::Lemma21 { betas, u } => {
                check_planted(betas, *u)?;
                Ok(betas[betas.len() - 1] / u)
            }
            SharpnessSetup::Lemma31 { t, betas } => {
                check_union_feasible(*t, betas)?;
                hommel_bound(*t, betas)
            }
        }
    }
}

/// Result of [`run_sharpness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    #[serde(flatten)]
    pub setup: SharpnessSetup,
    pub replicates: u64,
    pub seed: u64,
    pub target: f64,
    pub frequency: f64,
    /// Binomial standard error at the target.
    pub se: f64,
    /// `(frequency - target) / se`; absent when `se` is 0.
    pub z: Option<f64>,
    /// Whether `|z| <= 3` (exact agreement when `se` is 0).
    pub pass: bool,
    /// Draws from the planted branch that missed a threshold (planted construction only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted_misses: Option<u64>,
}

/// Draws `replicates` samples from the construction and compares the event
/// frequency with its exact probability.
pub fn run_sharpness(setup: &SharpnessSetup, replicates: u64, seed: u64, threads: Option<usize>) -> Result<SharpnessReport> {
    if replicates == 0 {
        return Err(Error::Configuration("replicates must be at least 1".into()));
    }
    if threads == Some(0) {
        return Err(Error::Configuration("threads must be at least 1".into()));
    }
    let target = setup.target()?;
    // (event, planted-branch miss)
    let outcomes: Vec<(bool, bool)> = match setup {
        SharpnessSetup::Thm21 { s, k, alpha } => {
            let cut = *k as f64 * alpha / *s as f64;
            collect_outcomes(replicates, threads, |r| {
                let d = sample_theorem21(*s, *k, &mut replicate_rng(seed, r)).expect("validated");
                (d.pvalues.entries().iter().filter(|e| e.p <= cut).count() >= *k, false)
            })?
        }
        SharpnessSetup::Thm23 { s, k, i, alpha, inflation } => {
            let (betas, _) = unimprovability_betas(*s, *k, *i, *alpha, *inflation)?;
            let mut thresholds = constants_kfwer_stepdown(*s, *k, *alpha)?.alphas()[..*i].to_vec();
            thresholds[i - 1] = betas[k - 1];
            collect_outcomes(replicates, threads, |r| {
                let d = sample_theorem23(*s, *k, *i, *alpha, *inflation, &mut replicate_rng(seed, r)).expect("validated");
                (meets_all_thresholds(&d.pvalues.values(), &thresholds), false)
            })?
        }
        SharpnessSetup::Lemma21 { betas, u } => collect_outcomes(replicates, threads, |r| {
            let d = sample_lemma21(betas, *u, &mut replicate_rng(seed, r)).expect("validated");
            let met = meets_all_thresholds(&d.values, betas);
            (met, d.planted && !met)
        })?,
        SharpnessSetup::Lemma31 { t, betas } => collect_outcomes(replicates, threads, |r| {
            let v = sample_lemma31(*t, betas, &mut replicate_rng(seed, r)).expect("validated");
            (union_event(&v, betas), false)
        })?,
    };
    let hits = outcomes.iter().filter(|o| o.0).count() as u64;
    let misses = outcomes.iter().filter(|o| o.1).count() as u64;
    let frequency = hits as f64 / replicates as f64;
    let se = binomial_se(target, replicates);
    let (z, pass) = if se > 0.0 {
        let z = (frequency - target) / se;
        (Some(z), z.abs() <= SLACK_SES)
    } else {
        (None, frequency == target)
    };
    Ok(SharpnessReport {
        setup: setup.clone(),
        replicates,
        seed,
        target,
        frequency,
        se,
        z,
        pass: pass && misses == 0,
        planted_misses: matches!(setup, SharpnessSetup::Lemma21 { .. }).then_some(misses),
    })
}
