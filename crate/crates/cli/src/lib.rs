//! Command-line front end: applies procedures to p-value files and drives
//! simulation and sharpness runs.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 I/O failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stepdown::simulation::SandwichCheck;
use stepdown::{
    adjusted_pvalues, check_markov_sandwich, order_pvalues, parse_table, run_experiment, run_sharpness, AdjustmentReport,
    ExperimentConfig, Gamma, Method, Metric, ProcedureSpec, Scenario, SharpnessReport, SharpnessSetup,
    SimulationReport,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<stepdown::Error> for CliError {
    fn from(e: stepdown::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "stepdown", version, about = "k-FWER and FDP stepdown procedures with Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a procedure to a CSV file with header `id,pvalue`.
    Adjust(AdjustArgs),
    /// Print the critical values of a procedure as `i,alpha_i`.
    Constants(ConstantsArgs),
    /// Estimate error rates and power by Monte Carlo.
    Simulate(SimulateArgs),
    /// Check that an adversarial construction attains its exact probability.
    Sharpness(SharpnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bonferroni,
    Holm,
    KfwerSs,
    KfwerSd,
    FdpSd,
    FdpHommel,
    Bh,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bonferroni => Method::Bonferroni,
            MethodArg::Holm => Method::Holm,
            MethodArg::KfwerSs => Method::KfwerSingleStep,
            MethodArg::KfwerSd => Method::KfwerStepdown,
            MethodArg::FdpSd => Method::FdpStepdown,
            MethodArg::FdpHommel => Method::FdpHommel,
            MethodArg::Bh => Method::Bh,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProcedureArgs {
    /// Error rate level.
    #[arg(long)]
    pub alpha: f64,
    /// Number of false rejections tolerated minus one (k-FWER methods).
    #[arg(long)]
    pub k: Option<usize>,
    /// FDP tolerance as a decimal or fraction, e.g. `0.1` or `1/10`.
    #[arg(long)]
    pub gamma: Option<Gamma>,
    /// Use `alpha / C_s` thresholds (bh only).
    #[arg(long)]
    pub harmonic: bool,
    /// Always reject the k-1 smallest p-values (k-FWER methods).
    #[arg(long)]
    pub reject_first_k_minus_1: bool,
}

impl ProcedureArgs {
    fn spec(&self, method: MethodArg) -> Result<ProcedureSpec> {
        let method = Method::from(method);
        if self.k.is_some() && !method.needs_k() {
            return Err(CliError::Usage(format!("--k does not apply to `{method}`")));
        }
        if self.gamma.is_some() && !method.needs_gamma() {
            return Err(CliError::Usage(format!("--gamma does not apply to `{method}`")));
        }
        let spec = ProcedureSpec {
            method,
            alpha: self.alpha,
            k: self.k,
            gamma: self.gamma,
            harmonic: self.harmonic,
            reject_first_k_minus_1: self.reject_first_k_minus_1,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    /// Input CSV (`-` for stdin).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub procedure: ProcedureArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Number of hypotheses.
    #[arg(long)]
    pub s: usize,
    #[command(flatten)]
    pub procedure: ProcedureArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    IndependentUniform,
    NormalMeans,
    EquicorrelatedNormal,
    AdversarialThm21,
    AdversarialThm23,
    AdversarialLemma31,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    KFwer,
    FdpExceed,
    Fdr,
    AvgPower,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::KFwer => Metric::KFwer,
            MetricArg::FdpExceed => Metric::FdpExceed,
            MetricArg::Fdr => Metric::Fdr,
            MetricArg::AvgPower => Metric::AvgPower,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Number of Monte Carlo replicates.
    #[arg(long, default_value_t = 100_000)]
    pub replicates: u64,
    /// Master seed. Without it a clock-derived seed is used and reported.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; the output does not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write long-format CSV `metric,parameter,estimate,se` here.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Number of hypotheses.
    #[arg(long)]
    pub s: usize,
    /// Number of true nulls (defaults to s).
    #[arg(long)]
    pub s0: Option<usize>,
    /// Mean shift of each false null.
    #[arg(long, default_value_t = 0.0)]
    pub effect: f64,
    /// Common correlation (equicorrelated-normal).
    #[arg(long)]
    pub rho: Option<f64>,
    /// k of the adversarial constructions (defaults to --k).
    #[arg(long)]
    pub scenario_k: Option<usize>,
    /// Index of the unimprovability construction.
    #[arg(long)]
    pub i: Option<usize>,
    /// Factor applied to alpha_i by the unimprovability construction.
    #[arg(long, default_value_t = 1.0)]
    pub inflation: f64,
    /// Level used by the unimprovability construction (defaults to --alpha).
    #[arg(long)]
    pub scenario_alpha: Option<f64>,
    /// Thresholds of the union-bound null block; when omitted the block is
    /// tuned to the harmonic-corrected constants.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub procedure: MethodArg,
    #[command(flatten)]
    pub params: ProcedureArgs,
    /// Metrics to estimate (default: all that apply).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metrics: Vec<MetricArg>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstructionArg {
    Thm21,
    Thm23,
    Lemma21,
    Lemma31,
}

#[derive(Debug, Args)]
pub struct SharpnessArgs {
    #[arg(long, value_enum)]
    pub construction: ConstructionArg,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub i: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub inflation: f64,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Scale of the planted construction (default 1).
    #[arg(long)]
    pub u: Option<f64>,
    /// Block size of the union construction.
    #[arg(long)]
    pub t: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Parses `args` (program name first), runs the command and maps the outcome
/// to an exit code. Messages go to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Adjust(a) => cmd_adjust(&a),
        Command::Constants(a) => cmd_constants(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Sharpness(a) => cmd_sharpness(&a),
    }
}

fn read_source(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::Io(format!("cannot read stdin: {e}")))?;
    } else {
        text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    }
    Ok(text)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn cmd_adjust(a: &AdjustArgs) -> Result<()> {
    let spec = a.procedure.spec(a.method)?;
    let pv = parse_table(&read_source(&a.input)?)?;
    let report = adjusted_pvalues(&order_pvalues(&pv), &spec)?;
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => adjust_csv(&report),
    };
    emit(a.output.as_deref(), &text)
}

fn adjust_csv(report: &AdjustmentReport) -> String {
    csv_text(
        &["id", "p", "rank", "threshold", "rejected", "adjusted_p"],
        report.entries.iter().map(|e| {
            vec![
                e.id.clone(),
                e.p.to_string(),
                e.rank.to_string(),
                e.threshold.to_string(),
                e.rejected.to_string(),
                e.adjusted_p.to_string(),
            ]
        }),
    )
}

#[derive(Serialize)]
struct ConstantsOutput<'a> {
    s: usize,
    #[serde(flatten)]
    spec: &'a ProcedureSpec,
    constants: Vec<ConstantRow>,
}

#[derive(Serialize)]
struct ConstantRow {
    i: usize,
    alpha_i: f64,
}

fn cmd_constants(a: &ConstantsArgs) -> Result<()> {
    let spec = a.procedure.spec(a.method)?;
    let proc = spec.build(a.s)?;
    let values = proc.thresholds();
    let text = match a.format {
        Format::Csv => csv_text(
            &["i", "alpha_i"],
            values.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]),
        ),
        Format::Json => to_json(&ConstantsOutput {
            s: a.s,
            spec: &spec,
            constants: values.iter().enumerate().map(|(i, &v)| ConstantRow { i: i + 1, alpha_i: v }).collect(),
        }),
    };
    emit(a.output.as_deref(), &text)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
        eprintln!("warning: no --seed given, using {seed}; runs are only reproducible with an explicit seed");
        seed
    })
}

fn required<T>(v: Option<T>, flag: &str, what: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Usage(format!("{what} requires --{flag}")))
}

fn scenario(a: &SimulateArgs) -> Result<Scenario> {
    let (s, s0, effect) = (a.s, a.s0.unwrap_or(a.s), a.effect);
    if !effect.is_finite() {
        return Err(CliError::Usage("--effect must be finite".into()));
    }
    let name = a.scenario.to_possible_value().expect("no skipped variants").get_name().to_string();
    let scn = match a.scenario {
        ScenarioArg::IndependentUniform => Scenario::IndependentUniform { s, s0, effect },
        ScenarioArg::NormalMeans => Scenario::NormalMeans { s, s0, effect },
        ScenarioArg::EquicorrelatedNormal => {
            Scenario::EquicorrelatedNormal { s, s0, effect, rho: required(a.rho, "rho", &name)? }
        }
        ScenarioArg::AdversarialThm21 => {
            Scenario::AdversarialThm21 { s, k: required(a.scenario_k.or(a.params.k), "scenario-k", &name)? }
        }
        ScenarioArg::AdversarialThm23 => Scenario::AdversarialThm23 {
            s,
            k: required(a.scenario_k.or(a.params.k), "scenario-k", &name)?,
            i: required(a.i, "i", &name)?,
            alpha: a.scenario_alpha.unwrap_or(a.params.alpha),
            inflation: a.inflation,
        },
        ScenarioArg::AdversarialLemma31 => match &a.betas {
            Some(betas) => Scenario::AdversarialLemma31 { s, s0, betas: betas.clone(), effect },
            None => Scenario::hommel_stress(
                s,
                s0,
                required(a.params.gamma, "gamma", "the default union-bound null block")?,
                a.scenario_alpha.unwrap_or(a.params.alpha),
                effect,
            )?,
        },
    };
    scn.validate()?;
    Ok(scn)
}

/// Simulation report plus the Markov sandwich check when both FDP metrics ran.
#[derive(Serialize)]
pub struct SimulateOutput {
    #[serde(flatten)]
    pub report: SimulationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub markov_sandwich: Option<SandwichCheck>,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let scn = scenario(a)?;
    let spec = a.params.spec(a.procedure)?;
    if a.run.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let seed = resolve_seed(a.run.seed);
    let mut cfg = ExperimentConfig::new(scn, spec, a.run.replicates, seed);
    cfg.metrics = a.metrics.iter().map(|&m| m.into()).collect();
    let report = run_experiment(&cfg, a.run.threads)?;
    let markov_sandwich = match (report.config.gamma, report.estimate(Metric::Fdr), report.estimate(Metric::FdpExceed)) {
        (Some(g), Some(_), Some(_)) => Some(check_markov_sandwich(&report, g)?),
        _ => None,
    };
    let label = run_label(&report.config);
    let text = match a.run.format {
        Format::Json => to_json(&SimulateOutput { report: report.clone(), markov_sandwich }),
        Format::Csv => csv_text(
            &["metric", "estimate", "se", "replicates"],
            report.estimates.iter().map(|e| {
                vec![e.metric.name().to_string(), e.estimate.to_string(), e.se.to_string(), e.replicates.to_string()]
            }),
        ),
    };
    emit(a.run.output.as_deref(), &text)?;
    if let Some(path) = &a.run.plot_data {
        let rows = report
            .estimates
            .iter()
            .map(|e| vec![e.metric.name().to_string(), label.clone(), e.estimate.to_string(), e.se.to_string()]);
        emit(Some(path), &csv_text(&["metric", "parameter", "estimate", "se"], rows))?;
    }
    Ok(())
}

fn run_label(cfg: &ExperimentConfig) -> String {
    let p = &cfg.procedure;
    let mut parts = vec![
        cfg.scenario.name().to_string(),
        format!("s={}", cfg.scenario.s()),
        format!("s0={}", cfg.scenario.s0()),
        p.method.name().to_string(),
        format!("alpha={}", p.alpha),
    ];
    if let Some(k) = p.k {
        parts.push(format!("k={k}"));
    }
    if let Some(g) = p.gamma {
        parts.push(format!("gamma={g}"));
    }
    parts.join(" ")
}

fn setup(a: &SharpnessArgs) -> Result<SharpnessSetup> {
    let name = a.construction.to_possible_value().expect("no skipped variants").get_name().to_string();
    Ok(match a.construction {
        ConstructionArg::Thm21 => SharpnessSetup::Thm21 {
            s: required(a.s, "s", &name)?,
            k: required(a.k, "k", &name)?,
            alpha: required(a.alpha, "alpha", &name)?,
        },
        ConstructionArg::Thm23 => SharpnessSetup::Thm23 {
            s: required(a.s, "s", &name)?,
            k: required(a.k, "k", &name)?,
            i: required(a.i, "i", &name)?,
            alpha: required(a.alpha, "alpha", &name)?,
            inflation: a.inflation,
        },
        ConstructionArg::Lemma21 => {
            SharpnessSetup::Lemma21 { betas: required(a.betas.clone(), "betas", &name)?, u: a.u.unwrap_or(1.0) }
        }
        ConstructionArg::Lemma31 => {
            SharpnessSetup::Lemma31 { t: required(a.t, "t", &name)?, betas: required(a.betas.clone(), "betas", &name)? }
        }
    })
}

fn cmd_sharpness(a: &SharpnessArgs) -> Result<()> {
    let setup = setup(a)?;
    setup.target()?;
    if a.run.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let seed = resolve_seed(a.run.seed);
    let report = run_sharpness(&setup, a.run.replicates, seed, a.run.threads)?;
    let text = match a.run.format {
        Format::Json => to_json(&report),
        Format::Csv => sharpness_csv(&report),
    };
    emit(a.run.output.as_deref(), &text)?;
    if let Some(path) = &a.run.plot_data {
        let label = setup_label(&report.setup);
        let rows = [
            vec!["frequency".to_string(), label.clone(), report.frequency.to_string(), report.se.to_string()],
            vec!["target".to_string(), label, report.target.to_string(), "0".to_string()],
        ];
        emit(Some(path), &csv_text(&["metric", "parameter", "estimate", "se"], rows))?;
    }
    Ok(())
}

/// `thm23 s=10 k=2 ...`, with list values joined by `;`.
fn setup_label(setup: &SharpnessSetup) -> String {
    let value = serde_json::to_value(setup).expect("setup serializes");
    let mut parts = vec![setup.name().to_string()];
    for (key, v) in value.as_object().expect("tagged struct") {
        if key == "construction" {
            continue;
        }
        let shown = match v {
            serde_json::Value::Array(items) => items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
            other => other.to_string(),
        };
        parts.push(format!("{key}={shown}"));
    }
    parts.join(" ")
}

fn sharpness_csv(r: &SharpnessReport) -> String {
    csv_text(
        &["construction", "target", "frequency", "se", "z", "pass", "replicates", "seed"],
        [vec![
            r.setup.name().to_string(),
            r.target.to_string(),
            r.frequency.to_string(),
            r.se.to_string(),
            r.z.map_or(String::new(), |z| z.to_string()),
            r.pass.to_string(),
            r.replicates.to_string(),
            r.seed.to_string(),
        ]],
    )
}
