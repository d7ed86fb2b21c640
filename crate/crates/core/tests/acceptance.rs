//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use stepdown::adversarial::{meets_all_thresholds, union_event};
use stepdown::procedures::{hommel_index, stepdown_count};
use stepdown::simulation::{binomial_se, generate_labeled, replicate_rng, SLACK_SES};
use stepdown::{
    check_markov_sandwich, constants_fdp_hommel, constants_fdp_stepdown, constants_holm, constants_kfwer_stepdown,
    harmonic, hommel_bound, order_pvalues, run_experiment, sample_lemma21, sample_lemma31, sample_theorem23, stepdown,
    theorem31_j_oracle, theorem32_bound_check, ExperimentConfig, Gamma, LabeledDraw, Method, Metric, PValueVector,
    ProcedureSpec, Scenario, SimulationReport, StepdownConstants,
};

const N: u64 = 100_000;
const ALPHA_FDP: f64 = 0.05;

struct Outcome {
    pass: bool,
    summary: String,
    failures: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, summary: String::new(), failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            self.failures.push(what());
        }
    }
}

fn gamma(s: &str) -> Gamma {
    s.parse().expect("valid gamma")
}

fn within(estimate: f64, target: f64, se: f64) -> bool {
    (estimate - target).abs() <= SLACK_SES * se + 1e-12
}

fn below(estimate: f64, bound: f64, se: f64) -> bool {
    estimate <= bound + SLACK_SES * se + 1e-12
}

fn simulate(scenario: Scenario, procedure: ProcedureSpec, metric_gamma: Gamma, seed: u64) -> SimulationReport {
    let mut cfg = ExperimentConfig::new(scenario, procedure, N, seed);
    cfg.gamma = Some(metric_gamma);
    run_experiment(&cfg, None).expect("valid experiment")
}

/// Collected across criteria so the sandwich check covers every report.
#[derive(Default)]
struct Reports(Vec<(String, SimulationReport)>);

impl Reports {
    fn push(&mut self, label: String, r: SimulationReport) -> SimulationReport {
        self.0.push((label, r.clone()));
        r
    }
}

fn exact_constants() -> Outcome {
    let mut o = Outcome::new();
    let c = constants_kfwer_stepdown(5, 2, 0.05).unwrap();
    let want = [0.02, 0.02, 0.025, 1.0 / 30.0, 0.05];
    o.check(c.alphas() == want, || format!("s=5 k=2 gave {:?}, want {want:?}", c.alphas()));
    let mut holm_checked = 0;
    for alpha in [0.01, 0.05, 0.1, 0.2] {
        for s in 1..=200 {
            let holm = constants_holm(s, alpha).unwrap();
            let k1 = constants_kfwer_stepdown(s, 1, alpha).unwrap();
            o.check(k1.alphas() == holm.alphas(), || format!("k=1 differs from Holm at s={s}, alpha={alpha}"));
            let g = Gamma::new(1, s as u64 + 1).unwrap();
            let fdp = constants_fdp_stepdown(s, g, alpha).unwrap();
            o.check(fdp.alphas() == holm.alphas(), || format!("gamma={g} differs from Holm at s={s}, alpha={alpha}"));
            holm_checked += 1;
        }
    }
    o.summary = format!("(0.02, 0.02, 0.025, 1/30, 0.05) exact; {holm_checked} (s, alpha) Holm reductions");
    o
}

fn singlestep_sharpness(reports: &mut Reports) -> Outcome {
    let mut o = Outcome::new();
    let r = simulate(
        Scenario::AdversarialThm21 { s: 10, k: 3 },
        ProcedureSpec::new(Method::KfwerSingleStep, 0.1).with_k(3),
        gamma("1/10"),
        2101,
    );
    let r = reports.push("single-step adversarial".into(), r);
    let e = r.estimate(Metric::KFwer).unwrap().estimate;
    o.check((e - 0.1).abs() <= 0.00285, || format!("k-FWER {e} outside 0.1 +- 0.00285"));
    o.summary = format!("k-FWER {e:.5} vs 0.1 +- 0.00285");
    o
}

fn stepdown_kfwer_control(reports: &mut Reports) -> Outcome {
    let mut o = Outcome::new();
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for (s, k) in [(10, 2), (50, 5), (100, 10)] {
        for alpha in [0.05, 0.1] {
            let scenarios = [
                Scenario::IndependentUniform { s, s0: s, effect: 0.0 },
                Scenario::EquicorrelatedNormal { s, s0: s, effect: 0.0, rho: 0.5 },
                Scenario::AdversarialThm21 { s, k },
            ];
            for scn in scenarios {
                let label = format!("{} s={s} k={k} alpha={alpha}", scn.name());
                let r = simulate(scn, ProcedureSpec::new(Method::KfwerStepdown, alpha).with_k(k), gamma("1/10"), 2200 + runs);
                let r = reports.push(label.clone(), r);
                let e = r.estimate(Metric::KFwer).unwrap();
                worst = worst.max((e.estimate - alpha) / e.se.max(f64::MIN_POSITIVE));
                o.check(below(e.estimate, alpha, e.se), || format!("{label}: k-FWER {} (se {})", e.estimate, e.se));
                runs += 1;
            }
        }
    }
    o.summary = format!("{runs} runs, worst (estimate - alpha)/se = {worst:.2}");
    o
}

fn event_frequency<F: FnMut(&mut rand_chacha::ChaCha8Rng) -> bool>(seed: u64, mut hit: F) -> (f64, f64) {
    let hits = (0..N).filter(|&r| hit(&mut replicate_rng(seed, r))).count();
    let p = hits as f64 / N as f64;
    (p, binomial_se(p, N))
}

fn unimprovability() -> Outcome {
    let mut o = Outcome::new();
    let (s, k, i, alpha) = (10, 2, 5, 0.05);
    let base = constants_kfwer_stepdown(s, k, alpha).unwrap();
    let mut parts = Vec::new();
    for (c, target) in [(1.0, alpha), (1.5, 1.5 * alpha)] {
        let mut thresholds = base.alphas()[..i].to_vec();
        thresholds[i - 1] *= c;
        let (p, se) = event_frequency(2300 + (c * 10.0) as u64, |rng| {
            let d = sample_theorem23(s, k, i, alpha, c, rng).unwrap();
            meets_all_thresholds(&d.pvalues.values(), &thresholds)
        });
        o.check(within(p, target, se), || format!("c={c}: frequency {p} vs {target} (se {se})"));
        if c > 1.0 {
            o.check(p > alpha, || format!("c={c}: frequency {p} does not exceed alpha"));
        }
        parts.push(format!("c={c}: {p:.5} vs {target}"));
    }
    o.summary = parts.join("; ");
    o
}

fn planted_threshold_equality() -> Outcome {
    let mut o = Outcome::new();
    let betas = [0.01, 0.015, 0.018];
    let u = 0.05;
    let mut certainty_failures = 0u64;
    let (p, se) = event_frequency(2400, |rng| {
        let d = sample_lemma21(&betas, u, rng).unwrap();
        let met = meets_all_thresholds(&d.values, &betas);
        if d.planted && !met {
            certainty_failures += 1;
        }
        met
    });
    o.check(within(p, 0.36, se), || format!("frequency {p} vs 0.36 (se {se})"));
    o.check(certainty_failures == 0, || format!("{certainty_failures} planted draws missed a threshold"));
    o.summary = format!("frequency {p:.5} vs 0.36; planted-branch misses {certainty_failures}");
    o
}

fn fdp_configs() -> Vec<(usize, Gamma)> {
    let mut v = Vec::new();
    for s0 in [50, 95] {
        for g in ["1/20", "1/10"] {
            v.push((s0, gamma(g)));
        }
    }
    v
}

fn fdp_control_independent(reports: &mut Reports) -> Outcome {
    let mut o = Outcome::new();
    let s = 100;
    let mut runs = 0;
    let mut worst = f64::NEG_INFINITY;
    for (s0, g) in fdp_configs() {
        let scenarios = [
            Scenario::IndependentUniform { s, s0, effect: 3.0 },
            Scenario::NormalMeans { s, s0, effect: 1.0 },
            Scenario::NormalMeans { s, s0, effect: 3.0 },
        ];
        for scn in scenarios {
            let label = format!("fdp-sd {} s0={s0} gamma={g}", scn.name());
            let r = simulate(scn, ProcedureSpec::new(Method::FdpStepdown, ALPHA_FDP).with_gamma(g), g, 2600 + runs);
            let r = reports.push(label.clone(), r);
            let e = r.estimate(Metric::FdpExceed).unwrap();
            worst = worst.max((e.estimate - ALPHA_FDP) / e.se.max(f64::MIN_POSITIVE));
            o.check(below(e.estimate, ALPHA_FDP, e.se), || format!("{label}: P(FDP>gamma) {} (se {})", e.estimate, e.se));
            let j = r.j_oracle.unwrap();
            o.check(j.violations == 0, || format!("{label}: {} smallest-index audit violations", j.violations));
            runs += 1;
        }
    }
    o.summary = format!("{runs} runs, worst (estimate - alpha)/se = {worst:.2}");
    o
}

fn draws(scn: &Scenario, seed: u64) -> Vec<LabeledDraw> {
    (0..N).map(|r| generate_labeled(scn, &mut replicate_rng(seed, r)).unwrap()).collect()
}

fn fdp_control_equicorrelated(reports: &mut Reports) -> Outcome {
    let mut o = Outcome::new();
    let s = 100;
    let mut runs = 0;
    let mut worst = f64::NEG_INFINITY;
    for (s0, g) in fdp_configs() {
        for rho in [0.0, 0.5] {
            let scn = Scenario::EquicorrelatedNormal { s, s0, effect: 3.0, rho };
            let label = format!("fdp-sd equicorrelated rho={rho} s0={s0} gamma={g}");
            let seed = 2700 + runs;
            let r = simulate(scn.clone(), ProcedureSpec::new(Method::FdpStepdown, ALPHA_FDP).with_gamma(g), g, seed);
            let r = reports.push(label.clone(), r);
            let e = r.estimate(Metric::FdpExceed).unwrap();
            worst = worst.max((e.estimate - ALPHA_FDP) / e.se.max(f64::MIN_POSITIVE));
            o.check(below(e.estimate, ALPHA_FDP, e.se), || format!("{label}: P(FDP>gamma) {} (se {})", e.estimate, e.se));
            let b = theorem32_bound_check(&draws(&scn, seed), g, ALPHA_FDP).unwrap();
            o.check(b.pass, || format!("{label}: union bound failed, lhs {} rhs {} se {}", b.lhs, b.rhs, b.se));
            o.check(b.pointwise_violations == 0, || format!("{label}: {} pointwise union misses", b.pointwise_violations));
            let rb = r.union_bound.unwrap();
            o.check(rb.pass && rb.lhs == b.lhs && rb.rhs == b.rhs, || format!("{label}: in-run union audit disagrees"));
            runs += 1;
        }
    }
    o.summary = format!("{runs} runs, worst (estimate - alpha)/se = {worst:.2}; union bound holds on all");
    o
}

fn hommel_scenarios(s: usize, s0: usize, g: Gamma) -> Vec<Scenario> {
    vec![
        Scenario::IndependentUniform { s, s0, effect: 3.0 },
        Scenario::NormalMeans { s, s0, effect: 2.0 },
        Scenario::EquicorrelatedNormal { s, s0, effect: 3.0, rho: 0.0 },
        Scenario::EquicorrelatedNormal { s, s0, effect: 3.0, rho: 0.5 },
        Scenario::EquicorrelatedNormal { s, s0, effect: 3.0, rho: -0.01 },
        Scenario::hommel_stress(s, s0, g, ALPHA_FDP, f64::INFINITY).unwrap(),
        Scenario::hommel_stress(s, s0, g, ALPHA_FDP, 2.0).unwrap(),
    ]
}

fn hommel_control(reports: &mut Reports) -> Outcome {
    let mut o = Outcome::new();
    let s = 100;
    let mut runs = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut tight = Vec::new();
    for (s0, g) in fdp_configs() {
        let mut scenarios = hommel_scenarios(s, s0, g);
        if s0 == 95 {
            scenarios.push(Scenario::AdversarialThm21 { s, k: 10 });
        }
        for scn in scenarios {
            let label = format!("fdp-hommel {} s0={} gamma={g}", scn.name(), scn.s0());
            let stress = matches!(scn, Scenario::AdversarialLemma31 { effect, .. } if effect.is_infinite());
            let r = simulate(scn, ProcedureSpec::new(Method::FdpHommel, ALPHA_FDP).with_gamma(g), g, 2800 + runs);
            let r = reports.push(label.clone(), r);
            let e = r.estimate(Metric::FdpExceed).unwrap();
            worst = worst.max((e.estimate - ALPHA_FDP) / e.se.max(f64::MIN_POSITIVE));
            o.check(below(e.estimate, ALPHA_FDP, e.se), || format!("{label}: P(FDP>gamma) {} (se {})", e.estimate, e.se));
            if stress {
                tight.push(format!("{:.4}", e.estimate));
            }
            runs += 1;
        }
    }
    o.summary = format!(
        "{runs} runs, worst (estimate - alpha)/se = {worst:.2}; adversarial null block reaches [{}]",
        tight.join(", ")
    );
    o
}

fn hommel_bound_sharpness() -> Outcome {
    let mut o = Outcome::new();
    let betas = [0.1, 0.2];
    let bound = hommel_bound(3, &betas).unwrap();
    let (p, se) = event_frequency(2900, |rng| union_event(&sample_lemma31(3, &betas, rng).unwrap(), &betas));
    o.check(within(p, bound, se), || format!("union frequency {p} vs bound {bound} (se {se})"));

    let s = 100;
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    for (n, (s0, g)) in fdp_configs().into_iter().enumerate() {
        let mut scenarios = hommel_scenarios(s, s0, g);
        scenarios.push(Scenario::AdversarialThm21 { s, k: 10 });
        for (m, scn) in scenarios.iter().enumerate() {
            let t = scn.s0();
            let full: Vec<f64> = (1..=t).map(|i| i as f64 * ALPHA_FDP / t as f64).collect();
            let j = hommel_index(s, g).min(t);
            let corrected: Vec<f64> = (1..=j).map(|i| i as f64 * ALPHA_FDP / (harmonic(hommel_index(s, g)).unwrap() * t as f64)).collect();
            let families = [full, corrected];
            let mut hits = [0u64; 2];
            for r in 0..N {
                let d = generate_labeled(scn, &mut replicate_rng(3000 + (n * 16 + m) as u64, r)).unwrap();
                let nulls: Vec<f64> = d.values.iter().zip(&d.is_null).filter(|(_, x)| **x).map(|(p, _)| *p).collect();
                for (h, fam) in hits.iter_mut().zip(&families) {
                    *h += union_event(&nulls, fam) as u64;
                }
            }
            for (h, fam) in hits.iter().zip(&families) {
                let b = hommel_bound(t, fam).unwrap();
                let f = *h as f64 / N as f64;
                let se = binomial_se(f, N);
                worst = worst.max((f - b) / se.max(f64::MIN_POSITIVE));
                o.check(below(f, b, se), || format!("{} s0={t} gamma={g}: union {f} > bound {b} (se {se})", scn.name()));
                checked += 1;
            }
        }
    }
    o.summary = format!("sharp case {p:.5} vs {bound}; {checked} other bounds, worst (freq - bound)/se = {worst:.2}");
    o
}

fn markov_sandwich(reports: &Reports) -> Outcome {
    let mut o = Outcome::new();
    for (label, r) in &reports.0 {
        let g = r.config.gamma.expect("gamma set on every run");
        let c = check_markov_sandwich(r, g).unwrap();
        o.check(c.pass, || format!("{label}: {} <= {} <= {} fails", c.lower, c.middle, c.upper));
    }
    o.summary = format!("{} reports", reports.0.len());
    o
}

/// Largest `r` such that at least `j` p-values lie at or below `alpha_j` for all `j <= r`.
fn brute_force_count(values: &[f64], alphas: &[f64]) -> usize {
    let mut r = 0;
    for (j, &a) in alphas.iter().enumerate() {
        if values.iter().filter(|&&p| p <= a).count() > j {
            r = j + 1;
        } else {
            break;
        }
    }
    r
}

fn for_each_multiset(grid: &[f64], size: usize, f: &mut impl FnMut(&[f64])) {
    fn rec(grid: &[f64], from: usize, cur: &mut Vec<f64>, size: usize, f: &mut impl FnMut(&[f64])) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for g in from..grid.len() {
            cur.push(grid[g]);
            rec(grid, g, cur, size, f);
            cur.pop();
        }
    }
    rec(grid, 0, &mut Vec::with_capacity(size), size, f);
}

fn oracle_equivalences() -> Outcome {
    let mut o = Outcome::new();
    let mut cases = 0u64;
    for s in 1..=12 {
        let families: Vec<StepdownConstants> = vec![
            constants_holm(s, 0.05).unwrap(),
            constants_kfwer_stepdown(s, s.min(2), 0.1).unwrap(),
            constants_kfwer_stepdown(s, s.div_ceil(2), 0.2).unwrap(),
            constants_fdp_stepdown(s, gamma("1/5"), 0.1).unwrap(),
            constants_fdp_hommel(s, gamma("1/3"), 0.25).unwrap(),
        ];
        for c in &families {
            let a = c.alphas();
            let mut grid = vec![0.0, a[0], a[(s - 1) / 2], a[s - 1], 0.5 * (a[0] + a[s - 1]), 1.0];
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            for_each_multiset(&grid, s, &mut |sorted| {
                let mut shuffled = sorted.to_vec();
                shuffled.rotate_left(cases as usize % s);
                let pv = PValueVector::from_values(&shuffled).unwrap();
                let engine = stepdown(&order_pvalues(&pv), c).unwrap().count();
                let direct = stepdown_count(sorted, a);
                let brute = brute_force_count(&shuffled, a);
                o.check(engine == brute && direct == brute, || {
                    format!("s={s} {:?} on {sorted:?}: engine {engine}, brute force {brute}", c.method())
                });
                cases += 1;
            });
        }
    }

    let g = gamma("1/10");
    let c = constants_fdp_stepdown(100, g, ALPHA_FDP).unwrap();
    let j = theorem31_j_oracle(&[0.0; 5], &c, g).unwrap();
    o.check(j == Some(6), || format!("worked example gave {j:?}, want Some(6)"));

    let mut rng = replicate_rng(3100, 0);
    for _ in 0..1000 {
        let s = rng.random_range(1..=200usize);
        let g = Gamma::new(rng.random_range(1..=20), 21).unwrap();
        let alpha = rng.random_range(0.01..0.5);
        let c = if rng.random_bool(0.5) {
            constants_fdp_stepdown(s, g, alpha).unwrap()
        } else {
            constants_fdp_hommel(s, g, alpha).unwrap()
        };
        let f = rng.random_range(0..=s);
        let top = c.alphas()[s - 1];
        let falses: Vec<f64> = (0..f)
            .map(|_| match rng.random_range(0..4) {
                0 => 0.0,
                1 => c.alphas()[rng.random_range(0..s)],
                2 => rng.random_range(0.0..top),
                _ => rng.random_range(0.0..1.0),
            })
            .collect();
        let got = theorem31_j_oracle(&falses, &c, g).unwrap();
        let scan = (1..=s).find(|&m| {
            let am = c.alphas()[m - 1];
            let below = falses.iter().filter(|&&p| p <= am).count();
            // m - below > m gamma, in integers
            m >= below && ((m - below) as u128) * g.denom() as u128 > (m as u128) * g.numer() as u128
        });
        o.check(got == scan, || format!("s={s} gamma={g} f={f}: oracle {got:?}, scan {scan:?}"));
    }
    o.summary = format!("{cases} grid vectors; worked example j = {j:?}; 1000 random index configurations");
    o
}

fn determinism() -> Outcome {
    let mut o = Outcome::new();
    let configs = [
        ExperimentConfig::new(
            Scenario::EquicorrelatedNormal { s: 50, s0: 40, effect: 2.5, rho: 0.3 },
            ProcedureSpec::new(Method::FdpStepdown, 0.05).with_gamma(gamma("1/10")),
            N,
            42,
        ),
        ExperimentConfig::new(
            Scenario::AdversarialThm21 { s: 20, k: 4 },
            ProcedureSpec::new(Method::KfwerStepdown, 0.1).with_k(4),
            N,
            7,
        ),
    ];
    for cfg in &configs {
        let outputs: Vec<String> = [1, 4, 8]
            .iter()
            .map(|&t| serde_json::to_string(&run_experiment(cfg, Some(t)).unwrap()).unwrap())
            .collect();
        o.check(outputs.windows(2).all(|w| w[0] == w[1]), || {
            format!("{} reports differ across thread counts", cfg.scenario.name())
        });
    }
    o.summary = format!("{} configs byte-identical at 1, 4 and 8 threads", configs.len());
    o
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut reports = Reports::default();
    let mut all_pass = true;
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut(&mut Reports) -> Outcome| {
        let t = Instant::now();
        let out = f(&mut reports);
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} {name}: {} [{:.1}s]", out.summary, t.elapsed().as_secs_f64());
        for line in out.failures.iter().take(20) {
            println!("    {line}");
        }
        all_pass &= out.pass;
    };
    run(1, "exact constants", &mut |_| exact_constants());
    run(2, "single-step sharpness", &mut singlestep_sharpness);
    run(3, "stepdown k-FWER control", &mut stepdown_kfwer_control);
    run(4, "unimprovability", &mut |_| unimprovability());
    run(5, "planted threshold equality", &mut |_| planted_threshold_equality());
    run(6, "FDP control, independent nulls", &mut fdp_control_independent);
    run(7, "FDP control, equicorrelated nulls", &mut fdp_control_equicorrelated);
    run(8, "FDP control, harmonic correction", &mut hommel_control);
    run(9, "union bound sharpness", &mut |_| hommel_bound_sharpness());
    run(10, "Markov sandwich", &mut |r| markov_sandwich(r));
    run(11, "oracle equivalences", &mut |_| oracle_equivalences());
    run(12, "determinism", &mut |_| determinism());
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
