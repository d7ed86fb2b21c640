//! Seeded Monte Carlo engine for k-FWER, `P{FDP > gamma}`, FDR and power.
//!
//! Replicate `r` draws from its own ChaCha stream keyed by `(seed, r)`, and
//! per-replicate outcomes are reduced in replicate order, so a report is
//! bit-identical for any number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::adversarial::{self, LabeledDraw};
use crate::error::{param, Error, Result};
use crate::gamma::Gamma;
use crate::procedures::{check_alpha, harmonic, hommel_index, Method, Procedure, ProcedureSpec, StepdownConstants};
use crate::pvalues::{fdp_from_counts, stable_order, PValueVector, TruthAssignment};

/// Tolerance, in standard errors, for every statistical check.
pub const SLACK_SES: f64 = 3.0;

/// Absolute slack for comparisons that hold exactly up to rounding.
const ROUNDING_EPS: f64 = 1e-12;

/// Upper-tail standard normal probability.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// A data-generating process. False nulls occupy the first `s - s0` positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    /// Nulls i.i.d. uniform; false nulls independent `Φ̄(N(effect, 1))`.
    IndependentUniform { s: usize, s0: usize, effect: f64 },
    /// Independent one-sided z-tests with mean `effect` under the alternative.
    NormalMeans { s: usize, s0: usize, effect: f64 },
    /// One-sided z-tests with common correlation `rho`.
    EquicorrelatedNormal { s: usize, s0: usize, effect: f64, rho: f64 },
    /// The single-step sharpness construction; all nulls.
    AdversarialThm21 { s: usize, k: usize },
    /// The unimprovability construction at index `i`; `i - k` false nulls at 0.
    AdversarialThm23 { s: usize, k: usize, i: usize, alpha: f64, inflation: f64 },
    /// Null block from the harmonic-bound sharpness construction, false nulls
    /// as in `independent-uniform`.
    AdversarialLemma31 { s: usize, s0: usize, betas: Vec<f64>, effect: f64 },
}

impl Scenario {
    /// Null block that makes the union bound behind the harmonic correction tight:
    /// `beta_i = i alpha / (C_(floor(gamma s)+1) s0)` for `i <= min(floor(gamma s)+1, s0)`.
    pub fn hommel_stress(s: usize, s0: usize, gamma: Gamma, alpha: f64, effect: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if s0 == 0 || s0 > s {
            return Err(param(format!("need 1 <= s0 <= s, got s0 = {s0}, s = {s}")));
        }
        let j = hommel_index(s, gamma);
        let c = harmonic(j)?;
        let m = j.min(s0);
        let betas = (1..=m).map(|i| i as f64 * alpha / (c * s0 as f64)).collect();
        let scn = Scenario::AdversarialLemma31 { s, s0, betas, effect };
        scn.validate()?;
        Ok(scn)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::IndependentUniform { .. } => "independent-uniform",
            Scenario::NormalMeans { .. } => "normal-means",
            Scenario::EquicorrelatedNormal { .. } => "equicorrelated-normal",
            Scenario::AdversarialThm21 { .. } => "adversarial-thm21",
            Scenario::AdversarialThm23 { .. } => "adversarial-thm23",
            Scenario::AdversarialLemma31 { .. } => "adversarial-lemma31",
        }
    }

    pub fn s(&self) -> usize {
        match *self {
            Scenario::IndependentUniform { s, .. }
            | Scenario::NormalMeans { s, .. }
            | Scenario::EquicorrelatedNormal { s, .. }
            | Scenario::AdversarialThm21 { s, .. }
            | Scenario::AdversarialThm23 { s, .. }
            | Scenario::AdversarialLemma31 { s, .. } => s,
        }
    }

    /// Number of true nulls.
    pub fn s0(&self) -> usize {
        match *self {
            Scenario::IndependentUniform { s0, .. }
            | Scenario::NormalMeans { s0, .. }
            | Scenario::EquicorrelatedNormal { s0, .. }
            | Scenario::AdversarialLemma31 { s0, .. } => s0,
            Scenario::AdversarialThm21 { s, .. } => s,
            Scenario::AdversarialThm23 { s, k, i, .. } => s + k - i,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.s();
        if s == 0 {
            return Err(param("s must be at least 1"));
        }
        match self {
            Scenario::IndependentUniform { s0, effect, .. }
            | Scenario::NormalMeans { s0, effect, .. }
            | Scenario::EquicorrelatedNormal { s0, effect, .. } => {
                check_s0(s, *s0)?;
                check_effect(*effect)?;
            }
            Scenario::AdversarialThm21 { k, .. } => {
                if *k == 0 || *k > s {
                    return Err(param(format!("need 1 <= k <= s, got k = {k}")));
                }
            }
            Scenario::AdversarialThm23 { k, i, alpha, inflation, .. } => {
                let (betas, u) = adversarial::unimprovability_betas(s, *k, *i, *alpha, *inflation)?;
                adversarial::check_planted(&betas, u)?;
            }
            Scenario::AdversarialLemma31 { s0, betas, effect, .. } => {
                check_s0(s, *s0)?;
                check_effect(*effect)?;
                if *s0 == 0 {
                    return Err(param("the lemma31 null block needs s0 >= 1"));
                }
                adversarial::check_union_feasible(*s0, betas)?;
            }
        }
        if let Scenario::EquicorrelatedNormal { rho, .. } = self {
            let lower = if s > 1 { -1.0 / (s as f64 - 1.0) } else { f64::NEG_INFINITY };
            if !(rho.is_finite() && *rho >= lower && *rho <= 1.0) {
                return Err(param(format!(
                    "correlation {rho} is infeasible for s = {s}: need {lower} <= rho <= 1"
                )));
            }
        }
        Ok(())
    }

    fn false_nulls(&self) -> usize {
        self.s() - self.s0()
    }
}

fn check_s0(s: usize, s0: usize) -> Result<()> {
    if s0 > s {
        Err(param(format!("s0 = {s0} exceeds s = {s}")))
    } else {
        Ok(())
    }
}

fn check_effect(effect: f64) -> Result<()> {
    if effect.is_nan() {
        Err(param("effect must be a number"))
    } else {
        Ok(())
    }
}

fn shifted_pvalue<R: Rng + ?Sized>(rng: &mut R, effect: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    normal_sf(z + effect)
}

/// One draw of p-values and true-null flags, without string ids.
pub fn generate_labeled<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> Result<LabeledDraw> {
    scn.validate()?;
    Ok(generate_unchecked(scn, rng))
}

fn generate_unchecked<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> LabeledDraw {
    let s = scn.s();
    let f = scn.false_nulls();
    let flags = || (0..s).map(|j| j >= f).collect::<Vec<bool>>();
    match scn {
        Scenario::IndependentUniform { effect, .. } => {
            let values = (0..s)
                .map(|j| if j < f { shifted_pvalue(rng, *effect) } else { adversarial::uniform_open(rng, 0.0, 1.0) })
                .collect();
            LabeledDraw { values, is_null: flags() }
        }
        Scenario::NormalMeans { effect, .. } => {
            let values = (0..s).map(|j| shifted_pvalue(rng, if j < f { *effect } else { 0.0 })).collect();
            LabeledDraw { values, is_null: flags() }
        }
        Scenario::EquicorrelatedNormal { effect, rho, .. } => {
            // Z_j = a e_j + b sum(e) has unit variance and common covariance rho
            let n = s as f64;
            let a = (1.0 - rho).max(0.0).sqrt();
            let b = ((1.0 + (n - 1.0) * rho).max(0.0).sqrt() - a) / n;
            let eps: Vec<f64> = (0..s).map(|_| rng.sample(StandardNormal)).collect();
            let total: f64 = eps.iter().sum();
            let values = eps
                .iter()
                .enumerate()
                .map(|(j, e)| {
                    let mean = if j < f { *effect } else { 0.0 };
                    normal_sf(a * e + b * total + mean)
                })
                .collect();
            LabeledDraw { values, is_null: flags() }
        }
        Scenario::AdversarialThm21 { k, .. } => adversarial::single_step_raw(s, *k, rng).expect("validated"),
        Scenario::AdversarialThm23 { k, i, alpha, inflation, .. } => {
            let (betas, u) = adversarial::unimprovability_betas(s, *k, *i, *alpha, *inflation).expect("validated");
            adversarial::unimprovability_raw(s, *k, *i, &betas, u, rng)
        }
        Scenario::AdversarialLemma31 { s0, betas, effect, .. } => {
            let mut values: Vec<f64> = (0..f).map(|_| shifted_pvalue(rng, *effect)).collect();
            values.extend(adversarial::union_block_unchecked(*s0, betas, rng));
            LabeledDraw { values, is_null: flags() }
        }
    }
}

/// One draw with generated ids `H1..Hs`.
pub fn generate<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> Result<(PValueVector, TruthAssignment)> {
    let draw = generate_labeled(scn, rng)?;
    let pv = PValueVector::from_values(&draw.values)?;
    let truth = TruthAssignment::from_flags(&pv, &draw.is_null)?;
    Ok((pv, truth))
}

/// The ChaCha stream for replicate `replicate` under `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Quantities a simulation can estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// `P{at least k false rejections}`.
    #[serde(rename = "k-fwer")]
    KFwer,
    /// `P{FDP > gamma}`.
    FdpExceed,
    /// `E[FDP]`.
    Fdr,
    /// `E[correct rejections / max(1, false nulls)]`.
    AvgPower,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::KFwer, Metric::FdpExceed, Metric::Fdr, Metric::AvgPower];

    pub fn name(self) -> &'static str {
        match self {
            Metric::KFwer => "k-fwer",
            Metric::FdpExceed => "fdp-exceed",
            Metric::Fdr => "fdr",
            Metric::AvgPower => "avg-power",
        }
    }

    pub fn is_probability(self) -> bool {
        matches!(self, Metric::KFwer | Metric::FdpExceed)
    }
}

/// Everything that determines a simulation's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub procedure: ProcedureSpec,
    pub replicates: u64,
    pub seed: u64,
    /// `k` for the k-FWER metric; defaults to the procedure's `k`, else 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kfwer_k: Option<usize>,
    /// `gamma` for the exceedance metric; defaults to the procedure's `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Gamma>,
    /// Metrics to report; empty means every metric that can be computed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<Metric>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, procedure: ProcedureSpec, replicates: u64, seed: u64) -> Self {
        Self { scenario, procedure, replicates, seed, kfwer_k: None, gamma: None, metrics: Vec::new() }
    }

    fn metric_gamma(&self) -> Option<Gamma> {
        self.gamma.or(self.procedure.gamma)
    }

    fn metric_k(&self) -> usize {
        self.kfwer_k.unwrap_or_else(|| self.procedure.kfwer_k())
    }

    fn resolved_metrics(&self) -> Result<Vec<Metric>> {
        let has_gamma = self.metric_gamma().is_some();
        if self.metrics.is_empty() {
            return Ok(Metric::ALL
                .into_iter()
                .filter(|m| has_gamma || *m != Metric::FdpExceed)
                .collect());
        }
        if self.metrics.contains(&Metric::FdpExceed) && !has_gamma {
            return Err(Error::Configuration("the fdp-exceed metric needs gamma".into()));
        }
        let mut m = self.metrics.clone();
        m.sort();
        m.dedup();
        Ok(m)
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub metric: Metric,
    pub estimate: f64,
    pub se: f64,
    pub replicates: u64,
}

impl Estimate {
    fn probability(metric: Metric, hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self { metric, estimate: p, se: binomial_se(p, n), replicates: n }
    }

    fn mean(metric: Metric, sum: f64, sum_sq: f64, n: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum_sq / nf - mean * mean).max(0.0);
        Self { metric, estimate: mean, se: (var / nf).sqrt(), replicates: n }
    }
}

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Frequency comparison `lhs <= rhs` with the slack of both standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    /// Replicates where the left event happened without the right one.
    pub pointwise_violations: u64,
    pub pass: bool,
}

impl BoundCheck {
    fn from_counts(lhs_hits: u64, rhs_hits: u64, violations: u64, n: u64) -> Self {
        let lhs = lhs_hits as f64 / n as f64;
        let rhs = rhs_hits as f64 / n as f64;
        let se = (binomial_se(lhs, n).powi(2) + binomial_se(rhs, n).powi(2)).sqrt();
        let pass = lhs <= rhs + SLACK_SES * se + ROUNDING_EPS;
        Self { lhs, rhs, se, pointwise_violations: violations, pass }
    }
}

/// Audit of the smallest-index argument behind FDP control: in every replicate
/// with `FDP > gamma`, the index `j` exists, the procedure reached it, and at
/// least `j - sum R_i` true nulls lie at or below `alpha_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JOracleAudit {
    pub checked: u64,
    pub violations: u64,
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: ExperimentConfig,
    pub estimates: Vec<Estimate>,
    pub mean_rejections: f64,
    /// `P{FDP > gamma}` against the Simes-type union for the FDP stepdown families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub union_bound: Option<BoundCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_oracle: Option<JOracleAudit>,
}

impl SimulationReport {
    pub fn estimate(&self, metric: Metric) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.metric == metric)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    rejections: u32,
    false_rejections: u32,
    true_rejections: u32,
    false_nulls: u32,
    union: bool,
    j_violation: bool,
}

/// What to audit per replicate, fixed for a whole experiment.
struct Audits {
    gamma: Option<Gamma>,
    /// Level fed to the union bound: `alpha`, or `alpha / C` for the harmonic family.
    union_alpha: Option<f64>,
    constants: Option<StepdownConstants>,
}

fn run_replicate(draw: &LabeledDraw, proc: &Procedure, audits: &Audits) -> Outcome {
    let order = stable_order(&draw.values);
    let sorted: Vec<f64> = order.iter().map(|&i| draw.values[i]).collect();
    let r = proc.rejection_count(&sorted);
    let v = order[..r].iter().filter(|&&i| draw.is_null[i]).count();
    let f = draw.is_null.iter().filter(|n| !**n).count();
    let mut out = Outcome {
        rejections: r as u32,
        false_rejections: v as u32,
        true_rejections: (r - v) as u32,
        false_nulls: f as u32,
        ..Outcome::default()
    };
    if let (Some(gamma), Some(union_alpha)) = (audits.gamma, audits.union_alpha) {
        let nulls: Vec<f64> = draw.values.iter().zip(&draw.is_null).filter(|(_, n)| **n).map(|(p, _)| *p).collect();
        out.union = simes_union_event(&nulls, draw.values.len(), gamma, union_alpha);
    }
    if let (Some(gamma), Some(constants)) = (audits.gamma, &audits.constants) {
        if gamma.exceeded_by(v, r) {
            out.j_violation = !j_condition_holds(draw, constants, gamma, r);
        }
    }
    out
}

fn j_condition_holds(draw: &LabeledDraw, constants: &StepdownConstants, gamma: Gamma, rejections: usize) -> bool {
    let falses: Vec<f64> = draw.values.iter().zip(&draw.is_null).filter(|(_, n)| !**n).map(|(p, _)| *p).collect();
    let Some(j) = theorem31_j_oracle(&falses, constants, gamma).expect("constants sized to s") else {
        return false;
    };
    let aj = constants.alpha_at(j);
    let false_below = falses.iter().filter(|&&p| p <= aj).count();
    let null_below = draw.values.iter().zip(&draw.is_null).filter(|(p, n)| **n && **p <= aj).count();
    rejections >= j && null_below + false_below >= j
}

/// `q_(i) <= i alpha / |I|` for some `i <= min(floor(gamma s) + 1, |I|)`.
fn simes_union_event(nulls: &[f64], s: usize, gamma: Gamma, alpha: f64) -> bool {
    let t = nulls.len();
    if t == 0 {
        return false;
    }
    let m = hommel_index(s, gamma).min(t);
    let mut q = nulls.to_vec();
    q.sort_by(f64::total_cmp);
    (1..=m).any(|i| q[i - 1] <= i as f64 * alpha / t as f64)
}

/// Evaluates `f` on replicates `0..n` and returns the results in replicate order.
#[cfg(feature = "parallel")]
pub(crate) fn collect_outcomes<T, F>(n: u64, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match threads {
        Some(1) => Ok((0..n).map(f).collect()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Configuration(format!("cannot start worker threads: {e}")))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
        }
        None => Ok((0..n).into_par_iter().map(f).collect()),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn collect_outcomes<T, F>(n: u64, _threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> T,
{
    Ok((0..n).map(f).collect())
}

/// Runs `config.replicates` independent replicates. `threads = None` uses the
/// global pool; the result does not depend on it.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<SimulationReport> {
    if config.replicates == 0 {
        return Err(Error::Configuration("replicates must be at least 1".into()));
    }
    if threads == Some(0) {
        return Err(Error::Configuration("threads must be at least 1".into()));
    }
    config.scenario.validate().map_err(|e| Error::Configuration(format!("scenario: {e}")))?;
    let s = config.scenario.s();
    let proc = config.procedure.build(s).map_err(|e| match e {
        Error::Configuration(_) => e,
        other => Error::Configuration(format!("procedure: {other}")),
    })?;
    let metrics = config.resolved_metrics()?;
    let k = config.metric_k();
    if k == 0 {
        return Err(Error::Configuration("k-FWER metric needs k >= 1".into()));
    }
    let gamma = config.metric_gamma();

    let audits = {
        let fdp_family = matches!(config.procedure.method, Method::FdpStepdown | Method::FdpHommel);
        let union_alpha = match config.procedure.method {
            Method::FdpStepdown => Some(config.procedure.alpha),
            Method::FdpHommel => Some(config.procedure.alpha / harmonic(hommel_index(s, config.procedure.gamma.expect("validated")))?),
            _ => None,
        };
        Audits {
            gamma: if fdp_family { config.procedure.gamma } else { None },
            union_alpha,
            constants: if fdp_family { proc.constants().cloned() } else { None },
        }
    };

    let n = config.replicates;
    let outcomes = collect_outcomes(n, threads, |r| {
        let mut rng = replicate_rng(config.seed, r);
        let draw = generate_unchecked(&config.scenario, &mut rng);
        run_replicate(&draw, &proc, &audits)
    })?;

    let mut kfwer_hits = 0u64;
    let mut exceed_hits = 0u64;
    let (mut fdp_sum, mut fdp_sq) = (0.0f64, 0.0f64);
    let (mut pow_sum, mut pow_sq) = (0.0f64, 0.0f64);
    let mut rejection_sum = 0u64;
    let (mut union_hits, mut union_violations, mut j_violations) = (0u64, 0u64, 0u64);
    for o in &outcomes {
        let v = o.false_rejections as usize;
        let r = o.rejections as usize;
        rejection_sum += o.rejections as u64;
        if v >= k {
            kfwer_hits += 1;
        }
        let exceeded = gamma.is_some_and(|g| g.exceeded_by(v, r));
        if exceeded {
            exceed_hits += 1;
        }
        let q = fdp_from_counts(v, r);
        fdp_sum += q;
        fdp_sq += q * q;
        let power = o.true_rejections as f64 / o.false_nulls.max(1) as f64;
        pow_sum += power;
        pow_sq += power * power;
        union_hits += o.union as u64;
        // the exceedance event of the audited procedure implies the union event
        let own_exceed = audits.gamma.is_some_and(|g| g.exceeded_by(v, r));
        if own_exceed && !o.union {
            union_violations += 1;
        }
        j_violations += o.j_violation as u64;
    }

    let estimates = metrics
        .iter()
        .map(|&m| match m {
            Metric::KFwer => Estimate::probability(m, kfwer_hits, n),
            Metric::FdpExceed => Estimate::probability(m, exceed_hits, n),
            Metric::Fdr => Estimate::mean(m, fdp_sum, fdp_sq, n),
            Metric::AvgPower => Estimate::mean(m, pow_sum, pow_sq, n),
        })
        .collect();

    let (union_bound, j_oracle) = match audits.gamma {
        Some(g) => {
            let own_hits = outcomes
                .iter()
                .filter(|o| g.exceeded_by(o.false_rejections as usize, o.rejections as usize))
                .count() as u64;
            (
                Some(BoundCheck::from_counts(own_hits, union_hits, union_violations, n)),
                Some(JOracleAudit { checked: own_hits, violations: j_violations }),
            )
        }
        None => (None, None),
    };

    let mut resolved = config.clone();
    resolved.kfwer_k = Some(k);
    resolved.gamma = gamma;
    resolved.metrics = metrics;
    Ok(SimulationReport {
        config: resolved,
        estimates,
        mean_rejections: rejection_sum as f64 / n as f64,
        union_bound,
        j_oracle,
    })
}

/// Result of [`check_markov_sandwich`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    /// `(FDR - gamma) / (1 - gamma)`.
    pub lower: f64,
    /// `P{FDP > gamma}`.
    pub middle: f64,
    /// `FDR / gamma`.
    pub upper: f64,
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub pass: bool,
}

/// Checks `(FDR - gamma)/(1 - gamma) <= P{FDP > gamma} <= FDR / gamma` with
/// three combined standard errors of slack.
pub fn check_markov_sandwich(report: &SimulationReport, gamma: Gamma) -> Result<SandwichCheck> {
    let fdr = report
        .estimate(Metric::Fdr)
        .ok_or_else(|| Error::Configuration("report has no fdr estimate".into()))?;
    let exceed = report
        .estimate(Metric::FdpExceed)
        .ok_or_else(|| Error::Configuration("report has no fdp-exceed estimate".into()))?;
    if fdr.replicates != exceed.replicates {
        return Err(Error::Configuration("fdr and fdp-exceed come from different replicate sets".into()));
    }
    let g = gamma.to_f64();
    let lower = (fdr.estimate - g) / (1.0 - g);
    let upper = fdr.estimate / g;
    let lower_slack = SLACK_SES * ((fdr.se / (1.0 - g)).powi(2) + exceed.se.powi(2)).sqrt() + ROUNDING_EPS;
    let upper_slack = SLACK_SES * ((fdr.se / g).powi(2) + exceed.se.powi(2)).sqrt() + ROUNDING_EPS;
    let middle = exceed.estimate;
    let pass = lower <= middle + lower_slack && middle <= upper + upper_slack;
    Ok(SandwichCheck { lower, middle, upper, lower_slack, upper_slack, pass })
}

/// Smallest index `m` with `m - sum_(i<=m) R_i > m gamma`, where `R_i` counts
/// false-null p-values in `(alpha_(i-1), alpha_i]` (`R_1` includes everything
/// at or below `alpha_1`). `None` when no `m <= s` qualifies.
pub fn theorem31_j_oracle(false_null_pvalues: &[f64], constants: &StepdownConstants, gamma: Gamma) -> Result<Option<usize>> {
    let s = constants.len();
    if false_null_pvalues.len() > s {
        return Err(param(format!(
            "{} false-null p-values exceed s = {s}",
            false_null_pvalues.len()
        )));
    }
    if let Some(p) = false_null_pvalues.iter().find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p))) {
        return Err(param(format!("invalid p-value {p}")));
    }
    let alphas = constants.alphas();
    let mut bucket = vec![0usize; s];
    for &p in false_null_pvalues {
        // first i with p <= alpha_i; values above alpha_s are never counted
        let i = alphas.partition_point(|&a| a < p);
        if i < s {
            bucket[i] += 1;
        }
    }
    let mut cumulative = 0usize;
    for m in 1..=s {
        cumulative += bucket[m - 1];
        if m > cumulative && gamma.mul_lt(m, m - cumulative) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Frequency of `{FDP > gamma}` for the FDP stepdown at level `alpha` against
/// the union `{q_(i) <= i alpha / |I|, i <= M}`, over supplied draws.
pub fn theorem32_bound_check(draws: &[LabeledDraw], gamma: Gamma, alpha: f64) -> Result<BoundCheck> {
    let Some(first) = draws.first() else {
        return Err(Error::Configuration("no replicate draws supplied".into()));
    };
    let s = first.values.len();
    let proc = ProcedureSpec::new(Method::FdpStepdown, alpha).with_gamma(gamma).build(s)?;
    let (mut lhs, mut rhs, mut violations) = (0u64, 0u64, 0u64);
    for d in draws {
        if d.values.len() != s || d.is_null.len() != s {
            return Err(Error::DimensionMismatch { expected: s, found: d.values.len() });
        }
        let order = stable_order(&d.values);
        let sorted: Vec<f64> = order.iter().map(|&i| d.values[i]).collect();
        let r = proc.rejection_count(&sorted);
        let v = order[..r].iter().filter(|&&i| d.is_null[i]).count();
        let nulls: Vec<f64> = d.values.iter().zip(&d.is_null).filter(|(_, n)| **n).map(|(p, _)| *p).collect();
        let exceed = gamma.exceeded_by(v, r);
        let union = simes_union_event(&nulls, s, gamma, alpha);
        lhs += exceed as u64;
        rhs += union as u64;
        violations += (exceed && !union) as u64;
    }
    Ok(BoundCheck::from_counts(lhs, rhs, violations, draws.len() as u64))
}
