//! Critical constants, the stepdown and stepup engines, and adjusted p-values.
//!
//! Every family of constants here has the form `alpha_i = alpha * m_i / (d_i * c)`
//! with integers `m_i`, `d_i` and a divisor `c` that depend only on `s`, `k` and
//! `gamma`. Keeping that factorisation around lets adjusted p-values be computed
//! as `p_(i) * d_i * c / m_i` without any search over levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::gamma::Gamma;
use crate::pvalues::{OrderedPValues, PValueVector, RejectionSet};

/// Which procedure (or family of constants) is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bonferroni,
    Holm,
    /// Single-step k-FWER: every p-value compared with `k * alpha / s`.
    #[serde(rename = "kfwer-ss")]
    KfwerSingleStep,
    /// Generalized Holm stepdown controlling the k-FWER.
    #[serde(rename = "kfwer-sd")]
    KfwerStepdown,
    /// FDP stepdown, valid under conditional null domination or Simes.
    #[serde(rename = "fdp-sd")]
    FdpStepdown,
    /// FDP stepdown with the harmonic correction, valid under any dependence.
    FdpHommel,
    /// Benjamini-Hochberg stepup. Comparison baseline only.
    Bh,
    Custom,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Bonferroni,
        Method::Holm,
        Method::KfwerSingleStep,
        Method::KfwerStepdown,
        Method::FdpStepdown,
        Method::FdpHommel,
        Method::Bh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bonferroni => "bonferroni",
            Method::Holm => "holm",
            Method::KfwerSingleStep => "kfwer-ss",
            Method::KfwerStepdown => "kfwer-sd",
            Method::FdpStepdown => "fdp-sd",
            Method::FdpHommel => "fdp-hommel",
            Method::Bh => "bh",
            Method::Custom => "custom",
        }
    }

    pub fn needs_k(self) -> bool {
        matches!(self, Method::KfwerSingleStep | Method::KfwerStepdown)
    }

    pub fn needs_gamma(self) -> bool {
        matches!(self, Method::FdpStepdown | Method::FdpHommel)
    }

    /// Whether rejections come from a stepup scan rather than a stepdown one.
    pub fn is_stepup(self) -> bool {
        self == Method::Bh
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .chain([Method::Custom])
            .find(|m| m.name() == s)
            .ok_or_else(|| param(format!("unknown method `{s}`")))
    }
}

/// Parameters that produced a constants vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantParams {
    pub s: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Gamma>,
    pub alpha: f64,
}

/// `alpha_i = alpha * numer / (denom * divisor)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ratio {
    numer: u64,
    denom: u64,
}

/// Nondecreasing critical values `alpha_1 <= ... <= alpha_s` with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepdownConstants {
    alphas: Vec<f64>,
    method: Method,
    params: ConstantParams,
    /// Present for every built-in family; absent for custom vectors.
    shape: Option<(Vec<Ratio>, f64)>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(param(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_s(s: usize) -> Result<()> {
    if s == 0 {
        Err(param("s must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_k(s: usize, k: usize) -> Result<()> {
    check_s(s)?;
    if k == 0 || k > s {
        Err(param(format!("k must satisfy 1 <= k <= s = {s}, got {k}")))
    } else {
        Ok(())
    }
}

impl StepdownConstants {
    fn from_shape(method: Method, params: ConstantParams, ratios: Vec<Ratio>, divisor: f64) -> Self {
        let alpha = params.alpha;
        // reduced so that e.g. k alpha / k evaluates to alpha exactly
        let ratios: Vec<Ratio> = ratios
            .into_iter()
            .map(|r| {
                let q = num_rational::Ratio::new(r.numer, r.denom);
                Ratio { numer: *q.numer(), denom: *q.denom() }
            })
            .collect();
        let alphas = ratios
            .iter()
            .map(|r| {
                let a = (r.numer as f64 * alpha) / r.denom as f64;
                if divisor == 1.0 {
                    a
                } else {
                    a / divisor
                }
            })
            .collect();
        Self { alphas, method, params, shape: Some((ratios, divisor)) }
    }

    /// A user-supplied vector. Adjusted p-values are unavailable for these.
    pub fn custom(alphas: Vec<f64>, alpha: f64) -> Result<Self> {
        check_s(alphas.len())?;
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && (0.0..=1.0).contains(*a))) {
            return Err(param(format!("critical value {a} outside [0, 1]")));
        }
        if let Some(i) = alphas.windows(2).position(|w| w[0] > w[1]) {
            return Err(param(format!("critical values must be nondecreasing (rank {} > rank {})", i + 1, i + 2)));
        }
        let params = ConstantParams { s: alphas.len(), k: None, gamma: None, alpha };
        Ok(Self { alphas, method: Method::Custom, params, shape: None })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &ConstantParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Critical value at 1-based rank `i`.
    pub fn alpha_at(&self, i: usize) -> f64 {
        self.alphas[i - 1]
    }

    /// `alpha_i / alpha` for each rank, when the family is linear in `alpha`.
    pub fn unit_multipliers(&self) -> Option<Vec<f64>> {
        self.shape
            .as_ref()
            .map(|(ratios, divisor)| ratios.iter().map(|r| r.numer as f64 / (r.denom as f64 * divisor)).collect())
    }

    /// Smallest level at which the hypothesis at 1-based rank `i` would pass its
    /// own comparison, `p * d_i * c / m_i`.
    fn level_for(&self, i: usize, p: f64) -> Option<f64> {
        self.shape.as_ref().map(|(ratios, divisor)| {
            let r = ratios[i - 1];
            p * r.denom as f64 * divisor / r.numer as f64
        })
    }

    /// Raises `alpha_i` (1-based) by `factor` and lifts later constants to keep
    /// the vector nondecreasing. Used to probe unimprovability.
    pub fn with_raised(&self, i: usize, factor: f64) -> Result<Self> {
        if i == 0 || i > self.len() {
            return Err(param(format!("rank {i} outside 1..={}", self.len())));
        }
        if !(factor.is_finite() && factor > 0.0) {
            return Err(param(format!("factor must be positive, got {factor}")));
        }
        let raised = (self.alphas[i - 1] * factor).min(1.0);
        let alphas = self
            .alphas
            .iter()
            .enumerate()
            .map(|(j, &a)| if j + 1 >= i { a.max(raised) } else { a })
            .collect();
        Self::custom(alphas, self.params.alpha)
    }
}

/// Holm: `alpha_i = alpha / (s - i + 1)`.
pub fn constants_holm(s: usize, alpha: f64) -> Result<StepdownConstants> {
    check_s(s)?;
    check_alpha(alpha)?;
    let ratios = (1..=s).map(|i| Ratio { numer: 1, denom: (s - i + 1) as u64 }).collect();
    let params = ConstantParams { s, k: None, gamma: None, alpha };
    Ok(StepdownConstants::from_shape(Method::Holm, params, ratios, 1.0))
}

/// Flat constants `k * alpha / s`; as a stepdown these reproduce the single-step
/// rule exactly. `k = 1` is Bonferroni.
pub fn constants_singlestep(s: usize, k: usize, alpha: f64) -> Result<StepdownConstants> {
    check_k(s, k)?;
    check_alpha(alpha)?;
    let ratios = vec![Ratio { numer: k as u64, denom: s as u64 }; s];
    let (method, k_param) = if k == 1 { (Method::Bonferroni, None) } else { (Method::KfwerSingleStep, Some(k)) };
    let params = ConstantParams { s, k: k_param, gamma: None, alpha };
    Ok(StepdownConstants::from_shape(method, params, ratios, 1.0))
}

/// Generalized Holm constants for k-FWER control:
/// `k * alpha / s` for `i <= k`, `k * alpha / (s + k - i)` beyond.
pub fn constants_kfwer_stepdown(s: usize, k: usize, alpha: f64) -> Result<StepdownConstants> {
    check_k(s, k)?;
    check_alpha(alpha)?;
    let ratios = (1..=s)
        .map(|i| {
            let denom = if i <= k { s } else { s + k - i };
            Ratio { numer: k as u64, denom: denom as u64 }
        })
        .collect();
    let params = ConstantParams { s, k: Some(k), gamma: None, alpha };
    Ok(StepdownConstants::from_shape(Method::KfwerStepdown, params, ratios, 1.0))
}

fn fdp_ratios(s: usize, gamma: Gamma) -> Vec<Ratio> {
    (1..=s)
        .map(|i| {
            let f = gamma.floor_mul(i);
            Ratio { numer: (f + 1) as u64, denom: (s + f + 1 - i) as u64 }
        })
        .collect()
}

/// FDP stepdown constants `(floor(gamma i) + 1) alpha / (s + floor(gamma i) + 1 - i)`.
pub fn constants_fdp_stepdown(s: usize, gamma: Gamma, alpha: f64) -> Result<StepdownConstants> {
    check_s(s)?;
    check_alpha(alpha)?;
    let params = ConstantParams { s, k: None, gamma: Some(gamma), alpha };
    Ok(StepdownConstants::from_shape(Method::FdpStepdown, params, fdp_ratios(s, gamma), 1.0))
}

/// FDP stepdown constants divided by `C_{floor(gamma s) + 1}`.
pub fn constants_fdp_hommel(s: usize, gamma: Gamma, alpha: f64) -> Result<StepdownConstants> {
    check_s(s)?;
    check_alpha(alpha)?;
    let divisor = harmonic(hommel_index(s, gamma))?;
    let params = ConstantParams { s, k: None, gamma: Some(gamma), alpha };
    Ok(StepdownConstants::from_shape(Method::FdpHommel, params, fdp_ratios(s, gamma), divisor))
}

/// `floor(gamma s) + 1`, the index of the harmonic divisor.
pub fn hommel_index(s: usize, gamma: Gamma) -> usize {
    gamma.floor_mul(s) + 1
}

/// Harmonic number `C_j = 1 + 1/2 + ... + 1/j`.
pub fn harmonic(j: usize) -> Result<f64> {
    if j == 0 {
        return Err(param("harmonic index must be at least 1"));
    }
    // smallest terms first
    Ok((1..=j).rev().map(|i| 1.0 / i as f64).sum())
}

/// Number of leading ranks a stepdown rejects: the largest `r` with
/// `p_(j) <= alpha_j` for every `j <= r`.
pub fn stepdown_count(sorted: &[f64], alphas: &[f64]) -> usize {
    sorted.iter().zip(alphas).take_while(|(p, a)| p <= a).count()
}

/// Largest `r` with `p_(r) <= threshold_r`, zero if none.
pub fn stepup_count(sorted: &[f64], thresholds: &[f64]) -> usize {
    sorted
        .iter()
        .zip(thresholds)
        .rposition(|(p, t)| p <= t)
        .map_or(0, |i| i + 1)
}

pub fn stepdown(ord: &OrderedPValues, c: &StepdownConstants) -> Result<RejectionSet> {
    if c.len() != ord.len() {
        return Err(Error::DimensionMismatch { expected: ord.len(), found: c.len() });
    }
    let r = stepdown_count(&ord.sorted_values(), c.alphas());
    Ok(ord.first(r))
}

/// Rejects every `H_i` with `p_i <= k * alpha / s`.
pub fn singlestep_kfwer(pv: &PValueVector, k: usize, alpha: f64) -> Result<RejectionSet> {
    let s = pv.len();
    check_k(s, k)?;
    check_alpha(alpha)?;
    let threshold = (k as f64 * alpha) / s as f64;
    Ok(RejectionSet::from_ids(
        pv.entries().iter().filter(|e| e.p <= threshold).map(|e| e.id.clone()),
    ))
}

/// Benjamini-Hochberg thresholds `r q / s`, optionally with `q` replaced by `q / C_s`.
pub fn bh_thresholds(s: usize, q: f64, harmonic_correction: bool) -> Result<Vec<f64>> {
    check_s(s)?;
    check_alpha(q)?;
    let divisor = if harmonic_correction { harmonic(s)? } else { 1.0 };
    Ok((1..=s)
        .map(|r| {
            let t = (r as f64 * q) / s as f64;
            if divisor == 1.0 {
                t
            } else {
                t / divisor
            }
        })
        .collect())
}

/// Benjamini-Hochberg stepup, a comparison baseline. It carries no
/// FDP guarantee here and no FDR guarantee without dependence assumptions.
pub fn stepup_bh(ord: &OrderedPValues, q: f64, harmonic_correction: bool) -> Result<RejectionSet> {
    let thresholds = bh_thresholds(ord.len(), q, harmonic_correction)?;
    let r = stepup_count(&ord.sorted_values(), &thresholds);
    Ok(ord.first(r))
}

/// Adds the `k - 1` smallest-p hypotheses to `rej`.
pub fn automatic_k_minus_1_option(rej: &RejectionSet, ord: &OrderedPValues, k: usize) -> RejectionSet {
    let extra = k.saturating_sub(1).min(ord.len());
    rej.union(&ord.first(extra))
}

/// A fully parameterized procedure: method, level and method parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcedureSpec {
    pub method: Method,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Gamma>,
    /// Benjamini-Hochberg with `q / C_s`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub harmonic: bool,
    /// Always reject the `k - 1` smallest p-values (k-FWER methods only).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reject_first_k_minus_1: bool,
}

impl ProcedureSpec {
    pub fn new(method: Method, alpha: f64) -> Self {
        Self { method, alpha, k: None, gamma: None, harmonic: false, reject_first_k_minus_1: false }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_gamma(mut self, gamma: Gamma) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.method == Method::Custom {
            return Err(Error::Configuration("custom constants cannot be built from a procedure spec".into()));
        }
        if self.method.needs_k() && self.k.is_none() {
            return Err(Error::Configuration(format!("method `{}` requires k", self.method)));
        }
        if self.method.needs_gamma() && self.gamma.is_none() {
            return Err(Error::Configuration(format!("method `{}` requires gamma", self.method)));
        }
        if self.harmonic && self.method != Method::Bh {
            return Err(Error::Configuration("the harmonic variant applies to `bh` only".into()));
        }
        if self.reject_first_k_minus_1 && !self.method.needs_k() {
            return Err(Error::Configuration("the k-1 option applies to k-FWER methods only".into()));
        }
        Ok(())
    }

    /// The `k` used by k-FWER bookkeeping: the method's own `k`, else 1.
    pub fn kfwer_k(&self) -> usize {
        self.k.unwrap_or(1)
    }

    /// Builds the comparison thresholds for `s` hypotheses.
    pub fn build(&self, s: usize) -> Result<Procedure> {
        self.validate()?;
        let kind = match self.method {
            Method::Bonferroni => Kind::Stepdown(constants_singlestep(s, 1, self.alpha)?),
            Method::KfwerSingleStep => Kind::Stepdown(constants_singlestep(s, self.k.unwrap_or(1), self.alpha)?),
            Method::Holm => Kind::Stepdown(constants_holm(s, self.alpha)?),
            Method::KfwerStepdown => Kind::Stepdown(constants_kfwer_stepdown(s, self.k.unwrap_or(1), self.alpha)?),
            Method::FdpStepdown => Kind::Stepdown(constants_fdp_stepdown(s, self.gamma.expect("validated"), self.alpha)?),
            Method::FdpHommel => Kind::Stepdown(constants_fdp_hommel(s, self.gamma.expect("validated"), self.alpha)?),
            Method::Bh => {
                let divisor = if self.harmonic { harmonic(s)? } else { 1.0 };
                Kind::Stepup { thresholds: bh_thresholds(s, self.alpha, self.harmonic)?, divisor }
            }
            Method::Custom => unreachable!("rejected by validate"),
        };
        if self.method.needs_k() {
            check_k(s, self.k.unwrap_or(1))?;
        }
        let forced = if self.reject_first_k_minus_1 { self.kfwer_k() - 1 } else { 0 };
        Ok(Procedure { spec: *self, kind, forced })
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Stepdown(StepdownConstants),
    Stepup { thresholds: Vec<f64>, divisor: f64 },
}

/// A [`ProcedureSpec`] with thresholds precomputed for a fixed `s`.
#[derive(Debug, Clone)]
pub struct Procedure {
    spec: ProcedureSpec,
    kind: Kind,
    forced: usize,
}

impl Procedure {
    pub fn spec(&self) -> &ProcedureSpec {
        &self.spec
    }

    pub fn s(&self) -> usize {
        self.thresholds().len()
    }

    pub fn thresholds(&self) -> &[f64] {
        match &self.kind {
            Kind::Stepdown(c) => c.alphas(),
            Kind::Stepup { thresholds, .. } => thresholds,
        }
    }

    pub fn constants(&self) -> Option<&StepdownConstants> {
        match &self.kind {
            Kind::Stepdown(c) => Some(c),
            Kind::Stepup { .. } => None,
        }
    }

    /// Number of leading ranks rejected, given sorted p-values.
    pub fn rejection_count(&self, sorted: &[f64]) -> usize {
        let r = match &self.kind {
            Kind::Stepdown(c) => stepdown_count(sorted, c.alphas()),
            Kind::Stepup { thresholds, .. } => stepup_count(sorted, thresholds),
        };
        r.max(self.forced.min(sorted.len()))
    }

    pub fn apply(&self, ord: &OrderedPValues) -> Result<RejectionSet> {
        if ord.len() != self.s() {
            return Err(Error::DimensionMismatch { expected: self.s(), found: ord.len() });
        }
        Ok(ord.first(self.rejection_count(&ord.sorted_values())))
    }

    /// Adjusted p-values in rank order.
    fn adjusted_sorted(&self, sorted: &[f64]) -> Result<Vec<f64>> {
        let mut adjusted = match &self.kind {
            Kind::Stepdown(c) => {
                if c.shape.is_none() {
                    return Err(Error::UnsupportedMethod(c.method().to_string()));
                }
                let mut running = 0.0f64;
                sorted
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        running = running.max(c.level_for(i + 1, p).expect("shape present"));
                        running.min(1.0)
                    })
                    .collect::<Vec<_>>()
            }
            Kind::Stepup { divisor, .. } => {
                let s = sorted.len() as f64;
                let mut out = vec![0.0; sorted.len()];
                let mut running = f64::INFINITY;
                for (i, &p) in sorted.iter().enumerate().rev() {
                    running = running.min(p * s * divisor / (i + 1) as f64);
                    out[i] = running.min(1.0);
                }
                out
            }
        };
        for a in adjusted.iter_mut().take(self.forced.min(sorted.len())) {
            *a = 0.0;
        }
        Ok(adjusted)
    }

    pub fn report(&self, ord: &OrderedPValues) -> Result<AdjustmentReport> {
        if ord.len() != self.s() {
            return Err(Error::DimensionMismatch { expected: self.s(), found: ord.len() });
        }
        let sorted = ord.sorted_values();
        let adjusted = self.adjusted_sorted(&sorted)?;
        let r = self.rejection_count(&sorted);
        let thresholds = self.thresholds();
        let entries = ord
            .source()
            .entries()
            .iter()
            .enumerate()
            .map(|(pos, e)| {
                let rank = ord.rank_of_position(pos);
                AdjustedEntry {
                    id: e.id.clone(),
                    p: e.p,
                    rank,
                    threshold: thresholds[rank - 1],
                    rejected: rank <= r,
                    adjusted_p: adjusted[rank - 1],
                }
            })
            .collect();
        Ok(AdjustmentReport {
            method: self.spec.method,
            baseline: self.spec.method.is_stepup(),
            params: ReportParams {
                s: self.s(),
                alpha: self.spec.alpha,
                k: self.spec.k,
                gamma: self.spec.gamma,
                harmonic: self.spec.harmonic,
                reject_first_k_minus_1: self.spec.reject_first_k_minus_1,
            },
            rejections: r,
            entries,
        })
    }
}

/// Adjusted p-values and decisions for `spec` applied to `ord`.
pub fn adjusted_pvalues(ord: &OrderedPValues, spec: &ProcedureSpec) -> Result<AdjustmentReport> {
    spec.build(ord.len())?.report(ord)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub s: usize,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Gamma>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub harmonic: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reject_first_k_minus_1: bool,
}

/// One hypothesis in an [`AdjustmentReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedEntry {
    pub id: String,
    pub p: f64,
    pub rank: usize,
    pub threshold: f64,
    pub rejected: bool,
    pub adjusted_p: f64,
}

/// Per-hypothesis decisions, entries in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentReport {
    pub method: Method,
    /// True for comparison baselines that carry no guarantee here.
    pub baseline: bool,
    pub params: ReportParams,
    pub rejections: usize,
    pub entries: Vec<AdjustedEntry>,
}
