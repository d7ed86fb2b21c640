//! Exact samplers for the joint p-value laws under which the control bounds
//! hold with equality.
//!
//! Every sampler takes its random stream as an argument. Coordinates that
//! represent true nulls are marginally uniform, so they satisfy
//! `P{p <= u} <= u` with equality.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::procedures::{check_alpha, constants_kfwer_stepdown};
use crate::pvalues::{PValueVector, TruthAssignment};

/// Deepest recursion accepted by [`sample_lemma21`].
pub const MAX_LEMMA21_K: usize = 64;

/// Slack for the feasibility ratios, which can sit exactly on 1.
const FEASIBILITY_EPS: f64 = 1e-12;

/// Uniform on the open interval `(lo, hi)`; `lo` when the interval is empty.
pub(crate) fn uniform_open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let u: f64 = rng.sample(Open01);
    lo + (hi - lo) * u
}

/// Which construction produced a draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "kebab-case")]
pub enum Construction {
    Thm21 { s: usize, k: usize },
    Thm23 { s: usize, k: usize, i: usize, alpha: f64, inflation: f64 },
    Lemma31 { t: usize, betas: Vec<f64> },
}

/// One draw from an adversarial construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialDraw {
    pub pvalues: PValueVector,
    pub truth: TruthAssignment,
    pub construction: Construction,
}

/// P-values with per-position true-null flags, without string ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDraw {
    pub values: Vec<f64>,
    pub is_null: Vec<bool>,
}

impl LabeledDraw {
    fn into_draw(self, construction: Construction) -> AdversarialDraw {
        let pvalues = PValueVector::from_values(&self.values).expect("samplers emit valid p-values");
        let truth = TruthAssignment::from_flags(&pvalues, &self.is_null).expect("lengths agree");
        AdversarialDraw { pvalues, truth, construction }
    }
}

fn check_sk(s: usize, k: usize) -> Result<()> {
    if s == 0 || k == 0 || k > s {
        Err(param(format!("need 1 <= k <= s, got s = {s}, k = {k}")))
    } else {
        Ok(())
    }
}

/// `k` random coordinates share one `U(0, k/s)` value; the rest share an
/// independent `U(k/s, 1)` value. All coordinates are true nulls.
pub fn sample_theorem21<R: Rng + ?Sized>(s: usize, k: usize, rng: &mut R) -> Result<AdversarialDraw> {
    Ok(single_step_raw(s, k, rng)?.into_draw(Construction::Thm21 { s, k }))
}

pub(crate) fn single_step_raw<R: Rng + ?Sized>(s: usize, k: usize, rng: &mut R) -> Result<LabeledDraw> {
    check_sk(s, k)?;
    let cut = k as f64 / s as f64;
    let low = uniform_open(rng, 0.0, cut);
    let high = uniform_open(rng, cut, 1.0);
    let mut values = vec![high; s];
    for j in index::sample(rng, s, k) {
        values[j] = low;
    }
    Ok(LabeledDraw { values, is_null: vec![true; s] })
}

/// Output of [`sample_lemma21`].
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma21Draw {
    pub values: Vec<f64>,
    /// Whether the branch taken with probability `beta_k / u` produced the draw;
    /// on that branch the ordered values meet every threshold.
    pub planted: bool,
}

/// Checks the preconditions of [`sample_lemma21`].
pub fn check_planted(betas: &[f64], u: f64) -> Result<()> {
    let k = betas.len();
    if k == 0 {
        return Err(param("betas must be nonempty"));
    }
    if k > MAX_LEMMA21_K {
        return Err(param(format!("k = {k} exceeds the supported maximum {MAX_LEMMA21_K}")));
    }
    if !(u.is_finite() && u > 0.0 && u <= 1.0) {
        return Err(param(format!("u must lie in (0, 1], got {u}")));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(param(format!("betas must be finite and nonnegative, got {b}")));
    }
    if let Some(j) = betas.windows(2).position(|w| w[0] > w[1]) {
        return Err(param(format!(
            "betas must be nondecreasing: beta_{} = {} > beta_{} = {}",
            j + 1,
            betas[j],
            j + 2,
            betas[j + 1]
        )));
    }
    if betas[k - 1] > u {
        return Err(param(format!("beta_k = {} exceeds u = {u}", betas[k - 1])));
    }
    if k >= 2 && betas[0] <= 0.0 {
        return Err(Error::Degenerate("beta_1 must be positive when k >= 2 (theta undefined)".into()));
    }
    for j in 2..=k {
        let ratio = j as f64 * (betas[j - 1] - betas[j - 2]) / betas[j - 1];
        if ratio > 1.0 + FEASIBILITY_EPS {
            return Err(Error::Infeasible(format!(
                "j (beta_j - beta_(j-1)) / beta_j <= 1 fails at j = {j} (value {ratio})"
            )));
        }
    }
    Ok(())
}

/// `k` values, each marginally `U(0, u)`, whose ordered values meet
/// `beta_1, ..., beta_k` jointly with probability exactly `beta_k / u`.
pub fn sample_lemma21<R: Rng + ?Sized>(betas: &[f64], u: f64, rng: &mut R) -> Result<Lemma21Draw> {
    check_planted(betas, u)?;
    Ok(planted_unchecked(betas, u, rng))
}

fn planted_unchecked<R: Rng + ?Sized>(betas: &[f64], u: f64, rng: &mut R) -> Lemma21Draw {
    let k = betas.len();
    let top = betas[k - 1];
    let planted = uniform_open(rng, 0.0, 1.0) < top / u;
    let values = if planted {
        let mut v = Vec::with_capacity(k);
        planted_values(betas, rng, &mut v);
        v
    } else {
        (0..k).map(|_| uniform_open(rng, top, u)).collect()
    };
    Lemma21Draw { values, planted }
}

/// Fills `out` with `k` values, each `U(0, beta_k)`, whose ordered values
/// satisfy `y_(j) <= beta_j` for every `j` with certainty.
fn planted_values<R: Rng + ?Sized>(betas: &[f64], rng: &mut R, out: &mut Vec<f64>) {
    let k = betas.len();
    if k == 1 {
        out.push(uniform_open(rng, 0.0, betas[0]));
        return;
    }
    planted_values(&betas[..k - 1], rng, out);
    let (prev, top) = (betas[k - 2], betas[k - 1]);
    // mass of the last interval (beta_(k-1), beta_k]; each earlier interval
    // i gets theta (beta_i - beta_(i-1)) and these sum to 1 - last
    let last = (k as f64 * (top - prev) / top).clamp(0.0, 1.0);
    let theta = (1.0 - last) / prev;
    let mut pick = uniform_open(rng, 0.0, 1.0);
    let mut lower = 0.0;
    let mut chosen = (prev, top);
    for &b in &betas[..k - 1] {
        let w = theta * (b - lower);
        if pick < w {
            chosen = (lower, b);
            break;
        }
        pick -= w;
        lower = b;
    }
    out.push(uniform_open(rng, chosen.0, chosen.1));
    out.shuffle(rng);
}

/// Whether ordered `values` satisfy `v_(j) <= betas_j` for every `j`.
pub fn meets_all_thresholds(values: &[f64], betas: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().zip(betas).all(|(v, b)| v <= b)
}

/// Thresholds and scale used by the unimprovability construction at index `i`:
/// `beta_j = alpha_(i-k+j)` (with `alpha_i` multiplied by `inflation`) and
/// `u = k / (s + k - i)`.
pub fn unimprovability_betas(s: usize, k: usize, i: usize, alpha: f64, inflation: f64) -> Result<(Vec<f64>, f64)> {
    check_sk(s, k)?;
    check_alpha(alpha)?;
    if i < k || i > s {
        return Err(param(format!("need k <= i <= s, got k = {k}, i = {i}, s = {s}")));
    }
    if !(inflation.is_finite() && inflation >= 1.0) {
        return Err(param(format!("inflation must be >= 1, got {inflation}")));
    }
    let c = constants_kfwer_stepdown(s, k, alpha)?;
    let mut betas: Vec<f64> = c.alphas()[i - k..i].to_vec();
    betas[k - 1] *= inflation;
    let s_prime = s + k - i;
    Ok((betas, k as f64 / s_prime as f64))
}

/// The first `i - k` coordinates are 0 (false nulls). Of the remaining
/// `s + k - i`, `k` random ones come from [`sample_lemma21`] and the rest are
/// `U(k/s', 1)`. The stepdown event over ranks `1..=i` has probability
/// `inflation * alpha`.
pub fn sample_theorem23<R: Rng + ?Sized>(
    s: usize,
    k: usize,
    i: usize,
    alpha: f64,
    inflation: f64,
    rng: &mut R,
) -> Result<AdversarialDraw> {
    let construction = Construction::Thm23 { s, k, i, alpha, inflation };
    let (betas, u) = unimprovability_betas(s, k, i, alpha, inflation)?;
    check_planted(&betas, u)
        .map_err(|e| Error::Infeasible(format!("inflation {inflation} leaves the construction: {e}")))?;
    Ok(unimprovability_raw(s, k, i, &betas, u, rng).into_draw(construction))
}

pub(crate) fn unimprovability_raw<R: Rng + ?Sized>(s: usize, k: usize, i: usize, betas: &[f64], u: f64, rng: &mut R) -> LabeledDraw {
    let zeros = i - k;
    let s_prime = s - zeros;
    let mut values = vec![0.0; s];
    let mut is_null = vec![true; s];
    is_null[..zeros].fill(false);
    let chosen = index::sample(rng, s_prime, k);
    let planted = planted_unchecked(betas, u, rng).values;
    let mut mask = vec![false; s_prime];
    for (slot, v) in chosen.iter().zip(planted) {
        mask[slot] = true;
        values[zeros + slot] = v;
    }
    for (slot, taken) in mask.iter().enumerate() {
        if !taken {
            values[zeros + slot] = uniform_open(rng, u, 1.0);
        }
    }
    LabeledDraw { values, is_null }
}

fn check_union_block(t: usize, betas: &[f64]) -> Result<f64> {
    if t == 0 {
        return Err(param("t must be at least 1"));
    }
    if betas.is_empty() || betas.len() > t {
        return Err(param(format!("need 1 <= m <= t, got m = {}, t = {t}", betas.len())));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && (0.0..=1.0).contains(*b))) {
        return Err(param(format!("betas must lie in [0, 1], got {b}")));
    }
    if let Some(j) = betas.windows(2).position(|w| w[0] > w[1]) {
        return Err(param(format!(
            "betas must be nondecreasing: beta_{} = {} > beta_{} = {}",
            j + 1,
            betas[j],
            j + 2,
            betas[j + 1]
        )));
    }
    Ok(hommel_sum(t, betas))
}

fn hommel_sum(t: usize, betas: &[f64]) -> f64 {
    let mut prev = 0.0;
    let mut sum = 0.0;
    for (i, &b) in betas.iter().enumerate() {
        sum += (b - prev) / (i + 1) as f64;
        prev = b;
    }
    t as f64 * sum
}

/// `t * sum_i (beta_i - beta_(i-1)) / i`, capped at 1: a bound on the chance
/// that some ordered p-value `p_(i)` falls at or below `beta_i`.
pub fn hommel_bound(t: usize, betas: &[f64]) -> Result<f64> {
    Ok(check_union_block(t, betas)?.min(1.0))
}

/// Whether `p_(i) <= betas_i` for at least one `i`, with `values` unsorted.
pub fn union_event(values: &[f64], betas: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().zip(betas).any(|(v, b)| v <= b)
}

/// `t` marginally uniform values for which the union event of
/// [`hommel_bound`] has probability exactly equal to the bound.
pub fn sample_lemma31<R: Rng + ?Sized>(t: usize, betas: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_union_feasible(t, betas)?;
    Ok(union_block_unchecked(t, betas, rng))
}

/// Validates [`sample_lemma31`] inputs and returns the (uncapped) bound.
pub fn check_union_feasible(t: usize, betas: &[f64]) -> Result<f64> {
    let bound = check_union_block(t, betas)?;
    if bound > 1.0 + FEASIBILITY_EPS {
        return Err(Error::Infeasible(format!(
            "t sum (beta_i - beta_(i-1)) / i = {bound} exceeds 1"
        )));
    }
    Ok(bound)
}

pub(crate) fn union_block_unchecked<R: Rng + ?Sized>(t: usize, betas: &[f64], rng: &mut R) -> Vec<f64> {
    let m = betas.len();
    let top = betas[m - 1];
    // branch i (1-based) has probability t (beta_i - beta_(i-1)) / i
    let mut pick = uniform_open(rng, 0.0, 1.0);
    let mut lower = 0.0;
    let mut branch = None;
    for (i, &b) in betas.iter().enumerate() {
        let w = t as f64 * (b - lower) / (i + 1) as f64;
        if pick < w {
            branch = Some((i + 1, lower, b));
            break;
        }
        pick -= w;
        lower = b;
    }
    let rest = uniform_open(rng, top, 1.0);
    let mut values = vec![rest; t];
    if let Some((count, lo, hi)) = branch {
        let low = uniform_open(rng, lo, hi);
        for j in index::sample(rng, t, count) {
            values[j] = low;
        }
    }
    values
}

pub(crate) fn union_block_raw<R: Rng + ?Sized>(t: usize, betas: &[f64], rng: &mut R) -> Result<LabeledDraw> {
    let values = sample_lemma31(t, betas, rng)?;
    Ok(LabeledDraw { values, is_null: vec![true; t] })
}

/// [`sample_lemma31`] packaged as an all-null draw.
pub fn sample_lemma31_draw<R: Rng + ?Sized>(t: usize, betas: &[f64], rng: &mut R) -> Result<AdversarialDraw> {
    Ok(union_block_raw(t, betas, rng)?.into_draw(Construction::Lemma31 { t, betas: betas.to_vec() }))
}
