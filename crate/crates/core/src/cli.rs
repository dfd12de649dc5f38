//! Command-line front end.
//!
//! Subcommands: `detect`, `cv`, `simulate`, `verify`. Every run writes a
//! JSON report echoing the full [`RunConfig`], so a report can be replayed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::adadetect::{
    default_cv_s, run_adadetect, run_adadetect_cv, run_quantile_adadetect, run_storey_adadetect,
    run_storey_adadetect_at_lambda, split_nts, CvOptions, DetectionReport, SplitPolicy,
};
use crate::data::Points;
use crate::error::{Error, Result, ResultExt};
use crate::scorers::{Scorer, ScorerConfig};
use crate::simlab::{run_simulation, verify_adaptive_bound, BoundEstimator, SimulationConfig};
use crate::VERSION;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Step-up variant for `detect`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Variant {
    Bh,
    Storey {
        #[serde(default)]
        storey_k: Option<usize>,
        #[serde(default)]
        lambda: Option<f64>,
    },
    Quantile {
        #[serde(default)]
        k0: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputFiles {
    pub nts: PathBuf,
    pub test: PathBuf,
    /// Whether both CSV files start with a header row.
    #[serde(default)]
    pub header: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub input: InputFiles,
    pub alpha: f64,
    pub scorer: ScorerConfig,
    pub split: SplitPolicy,
    pub variant: Variant,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub input: InputFiles,
    pub alpha: f64,
    pub grid: Vec<ScorerConfig>,
    pub split: SplitPolicy,
    /// Surrogate first-null size; defaults to `k - m` (or `k / 2` if `k <= m`).
    pub s: Option<usize>,
    pub surrogate_alpha: Option<f64>,
    /// Run Storey-AdaDetect with this `K` after selection.
    pub storey_k: Option<usize>,
    pub seed: u64,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub m: usize,
    pub ell: usize,
    pub m0: usize,
    pub estimator: BoundEstimator,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Detect(DetectConfig),
    Cv(CvConfig),
    Simulate(SimulationConfig),
    Verify(VerifyConfig),
}

#[derive(Parser, Debug)]
#[command(name = "adadetect", version, about = "Novelty detection with false discovery rate control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a score, compute empirical p-values, and select novelties.
    Detect(DetectArgs),
    /// Choose a scorer from a grid by surrogate rejections, then detect.
    Cv(CvArgs),
    /// Monte-Carlo FDR/TDR curves from a JSON simulation config.
    Simulate(SimulateArgs),
    /// Monte-Carlo check of the adaptive FDR bound.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Null training sample, one point per row
    #[arg(long)]
    pub nts: PathBuf,
    /// Test sample
    #[arg(long)]
    pub test: PathBuf,
    /// Both files start with a header row
    #[arg(long)]
    pub header: bool,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Number of nulls used to fit the score
    #[arg(long, conflicts_with_all = ["ell", "split"])]
    pub k: Option<usize>,
    /// Number of nulls used for calibration
    #[arg(long, conflicts_with = "split")]
    pub ell: Option<usize>,
    /// Named split policy (only `ell-equals-m`)
    #[arg(long)]
    pub split: Option<String>,
}

impl SplitArgs {
    fn policy(&self) -> Result<SplitPolicy> {
        match (self.k, self.ell, self.split.as_deref()) {
            (Some(k), _, _) => Ok(SplitPolicy::Explicit { k }),
            (_, Some(ell), _) => Ok(SplitPolicy::ExplicitEll { ell }),
            (_, _, None | Some("ell-equals-m")) => Ok(SplitPolicy::EllEqualsM),
            (_, _, Some(other)) => Err(Error::invalid(format!("unknown split policy '{other}'"))),
        }
    }
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Scorer name or inline JSON, e.g. '{"kind":"mlp","hidden":32}'
    #[arg(long, default_value = "logistic")]
    pub scorer: String,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Storey-AdaDetect with λ = K/(ℓ+1)
    #[arg(long = "storey-K", conflicts_with_all = ["storey_lambda", "quantile_k0", "quantile"])]
    pub storey_k: Option<usize>,
    /// Storey-AdaDetect at the admissible λ nearest to this value
    #[arg(long, conflicts_with_all = ["quantile_k0", "quantile"])]
    pub storey_lambda: Option<f64>,
    /// Quantile-AdaDetect with this k0
    #[arg(long, conflicts_with = "quantile")]
    pub quantile_k0: Option<usize>,
    /// Quantile-AdaDetect with k0 = ceil(m/2)
    #[arg(long)]
    pub quantile: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// JSON file holding a list of scorer configs
    #[arg(long)]
    pub cv_grid: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Surrogate first-null size
    #[arg(long)]
    pub s: Option<usize>,
    /// Level for counting surrogate rejections (defaults to --alpha)
    #[arg(long)]
    pub surrogate_alpha: Option<f64>,
    /// Finish with Storey-AdaDetect at λ = K/(ℓ+1)
    #[arg(long = "storey-K")]
    pub storey_k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON simulation config
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// JSON verify config; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long = "storey-K", conflicts_with = "quantile_k0")]
    pub storey_k: Option<usize>,
    #[arg(long)]
    pub quantile_k0: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse a `--scorer` value: a name, or JSON when it starts with `{`.
pub fn parse_scorer(spec: &str) -> Result<ScorerConfig> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        serde_json::from_str(spec).map_err(|e| Error::invalid(format!("bad scorer JSON: {e}")))
    } else {
        ScorerConfig::from_name(spec)
    }
}

/// Read a numeric CSV. Rows must have equal width; with `expected_dim`,
/// that width too.
pub fn read_points(path: &Path, header: bool, expected_dim: Option<(usize, &Path)>) -> Result<Points> {
    let file = path.display().to_string();
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        file: file.clone(),
        line,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::invalid(format!("{file}: {other:?}")),
        })?;
    let mut dim = expected_dim.map(|(d, _)| d);
    let mut data = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, 1, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                let why = match expected_dim {
                    Some((_, other)) => format!("expected {d} columns to match {}", other.display()),
                    None => format!("expected {d} columns as in the first row"),
                };
                return Err(parse_err(line, d.min(record.len()) + 1, format!("{why}, found {}", record.len())));
            }
            Some(_) => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("'{cell}' is not a finite number")));
            }
            data.push(v);
        }
    }
    match dim {
        Some(d) => Points::new(d, data),
        None => Ok(Points::empty(expected_dim.map_or(0, |(d, _)| d))),
    }
}

fn load_inputs(input: &InputFiles) -> Result<(Points, Points)> {
    let nts = read_points(&input.nts, input.header, None)?;
    if nts.is_empty() {
        return Err(Error::invalid(format!("{}: the null training sample is empty", input.nts.display())));
    }
    let test = read_points(&input.test, input.header, Some((nts.dim(), &input.nts)))?;
    if test.is_empty() {
        return Err(Error::invalid(format!("{}: the test sample is empty", input.test.display())));
    }
    Ok((nts, test))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema_version: u32,
    version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, config: &RunConfig, body: T) -> Result<()> {
    fs::create_dir_all(dir).context(|| format!("creating {}", dir.display()))?;
    let env = Envelope { schema_version: SCHEMA_VERSION, version: VERSION, config, body };
    let text = serde_json::to_string_pretty(&env)?;
    fs::write(dir.join(name), text + "\n").context(|| format!("writing {name}"))
}

fn write_rejections(dir: &Path, report: &DetectionReport) -> Result<()> {
    let mut text = String::new();
    for i in &report.rejections.indices {
        text.push_str(&format!("{}\n", i + 1));
    }
    fs::write(dir.join("rejections.csv"), text).context(|| "writing rejections.csv".into())
}

#[derive(Serialize)]
struct DetectBody<'a> {
    report: &'a DetectionReport,
}

/// Run `detect`, writing `report.json` and `rejections.csv` under `out`.
pub fn detect(cfg: &DetectConfig, out: &Path) -> Result<DetectionReport> {
    let (nts, test) = load_inputs(&cfg.input)?;
    let data = split_nts(&nts, &test, cfg.split, None)?;
    let scorer = &cfg.scorer;
    let report = match cfg.variant {
        Variant::Bh => run_adadetect(&data, scorer, cfg.alpha, cfg.seed)?,
        Variant::Storey { storey_k: Some(k), lambda: None } => {
            run_storey_adadetect(&data, scorer, cfg.alpha, k, cfg.seed)?
        }
        Variant::Storey { storey_k: None, lambda: Some(l) } => {
            run_storey_adadetect_at_lambda(&data, scorer, cfg.alpha, l, cfg.seed)?
        }
        Variant::Storey { storey_k: None, lambda: None } => {
            let k = data.calib_null().len().div_ceil(2);
            run_storey_adadetect(&data, scorer, cfg.alpha, k, cfg.seed)?
        }
        Variant::Storey { .. } => return Err(Error::invalid("give either Storey K or λ, not both")),
        Variant::Quantile { k0 } => run_quantile_adadetect(&data, scorer, cfg.alpha, k0, cfg.seed)?,
    };
    let config = RunConfig::Detect(cfg.clone());
    write_json(out, "report.json", &config, DetectBody { report: &report })?;
    write_rejections(out, &report)?;
    Ok(report)
}

/// Run `cv`, writing `report.json` and `rejections.csv` under `out`.
pub fn cross_validate(cfg: &CvConfig, out: &Path) -> Result<crate::CvReport> {
    let (nts, test) = load_inputs(&cfg.input)?;
    let data = split_nts(&nts, &test, cfg.split, None)?;
    let refs: Vec<&dyn Scorer> = cfg.grid.iter().map(|c| c as &dyn Scorer).collect();
    let s = cfg.s.unwrap_or_else(|| default_cv_s(data.first_null().len(), test.len()));
    let options = CvOptions { surrogate_alpha: cfg.surrogate_alpha, final_storey_k: cfg.storey_k };
    let cv = crate::simlab::with_workers(cfg.workers, || run_adadetect_cv(&data, &refs, cfg.alpha, s, cfg.seed, options))??;
    let config = RunConfig::Cv(cfg.clone());
    write_json(out, "report.json", &config, DetectBody { report: &cv.report }.with_cv(&cv))?;
    write_rejections(out, &cv.report)?;
    Ok(cv)
}

#[derive(Serialize)]
struct CvBody<'a> {
    report: &'a DetectionReport,
    chosen_index: usize,
    chosen_id: &'a str,
    s: usize,
    surrogate_alpha: f64,
    surrogate_rejections: &'a [usize],
}

impl<'a> DetectBody<'a> {
    fn with_cv(self, cv: &'a crate::CvReport) -> CvBody<'a> {
        CvBody {
            report: self.report,
            chosen_index: cv.chosen_index,
            chosen_id: &cv.chosen_id,
            s: cv.s,
            surrogate_alpha: cv.surrogate_alpha,
            surrogate_rejections: &cv.surrogate_rejections,
        }
    }
}

/// Run `simulate`, writing `mc_report.json` and `curves.csv` under `out`.
pub fn simulate(cfg: &SimulationConfig, out: &Path) -> Result<Vec<crate::simlab::CurvePoint>> {
    let points = run_simulation(cfg)?;
    let config = RunConfig::Simulate(cfg.clone());
    #[derive(Serialize)]
    struct Body<'a> {
        results: &'a [crate::simlab::CurvePoint],
    }
    write_json(out, "mc_report.json", &config, Body { results: &points })?;

    let variable = cfg.sweep.as_ref().map_or("sweep", |s| s.variable.name());
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::internal(format!("csv: {e}"));
    w.write_record([variable, "method", "fdr", "fdr_se", "tdr", "tdr_se"]).map_err(io)?;
    for p in &points {
        let r = &p.report;
        w.write_record([
            p.sweep_value.map_or(String::new(), |v| v.to_string()),
            r.method.clone(),
            r.fdr_hat.to_string(),
            r.fdr_se.to_string(),
            r.tdr_hat.to_string(),
            r.tdr_se.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::internal(format!("csv: {e}")))?;
    fs::write(out.join("curves.csv"), bytes).context(|| "writing curves.csv".into())?;
    Ok(points)
}

/// Run `verify`, writing `bound_report.json` under `out`.
pub fn verify(cfg: &VerifyConfig, out: &Path) -> Result<crate::simlab::BoundReport> {
    let report = verify_adaptive_bound(cfg.m, cfg.ell, cfg.m0, cfg.estimator, cfg.replicates, cfg.seed)?;
    let config = RunConfig::Verify(cfg.clone());
    #[derive(Serialize)]
    struct Body<'a> {
        report: &'a crate::simlab::BoundReport,
    }
    write_json(out, "bound_report.json", &config, Body { report: &report })?;
    Ok(report)
}

fn input_files(a: &InputArgs) -> InputFiles {
    InputFiles { nts: a.nts.clone(), test: a.test.clone(), header: a.header }
}

/// Turn parsed arguments into a config and its output directory.
pub fn resolve(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    Ok(match &cli.command {
        Command::Detect(a) => {
            let variant = match (a.storey_k, a.storey_lambda, a.quantile_k0, a.quantile) {
                (Some(k), _, _, _) => Variant::Storey { storey_k: Some(k), lambda: None },
                (_, Some(l), _, _) => Variant::Storey { storey_k: None, lambda: Some(l) },
                (_, _, Some(k0), _) => Variant::Quantile { k0: Some(k0) },
                (_, _, _, true) => Variant::Quantile { k0: None },
                _ => Variant::Bh,
            };
            let cfg = DetectConfig {
                input: input_files(&a.input),
                alpha: a.alpha,
                scorer: parse_scorer(&a.scorer)?,
                split: a.split.policy()?,
                variant,
                seed: a.seed,
            };
            (RunConfig::Detect(cfg), a.out.clone())
        }
        Command::Cv(a) => {
            let grid: Vec<ScorerConfig> = read_json(&a.cv_grid)?;
            let cfg = CvConfig {
                input: input_files(&a.input),
                alpha: a.alpha,
                grid,
                split: a.split.policy()?,
                s: a.s,
                surrogate_alpha: a.surrogate_alpha,
                storey_k: a.storey_k,
                seed: a.seed,
                workers: a.workers,
            };
            (RunConfig::Cv(cfg), a.out.clone())
        }
        Command::Simulate(a) => {
            let mut cfg: SimulationConfig = read_json(&a.config)?;
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            if let Some(w) = a.workers {
                cfg.workers = Some(w);
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            (RunConfig::Simulate(cfg), a.out.clone())
        }
        Command::Verify(a) => {
            let base: Option<VerifyConfig> = a.config.as_deref().map(read_json).transpose()?;
            let pick = |flag: Option<usize>, from: Option<usize>, name: &str| {
                flag.or(from).ok_or_else(|| Error::invalid(format!("verify needs --{name} (or a config file)")))
            };
            let estimator = match (a.storey_k, a.quantile_k0, base.as_ref()) {
                (Some(k), _, _) => BoundEstimator::Storey { storey_k: k },
                (_, Some(k0), _) => BoundEstimator::Quantile { k0 },
                (_, _, Some(b)) => b.estimator,
                _ => BoundEstimator::Storey { storey_k: 2 },
            };
            let cfg = VerifyConfig {
                m: pick(a.m, base.as_ref().map(|b| b.m), "m")?,
                ell: pick(a.ell, base.as_ref().map(|b| b.ell), "ell")?,
                m0: pick(a.m0, base.as_ref().map(|b| b.m0), "m0")?,
                estimator,
                replicates: a.replicates.or(base.as_ref().map(|b| b.replicates)).unwrap_or(10_000),
                seed: a.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
            };
            (RunConfig::Verify(cfg), a.out.clone())
        }
    })
}

/// Execute a config, writing outputs under `out`. Returns a one-line
/// summary and any warnings raised along the way.
pub fn execute(config: &RunConfig, out: &Path) -> Result<(String, Vec<String>)> {
    Ok(match config {
        RunConfig::Detect(c) => {
            let r = detect(c, out)?;
            (format!("{} rejections out of {} test points", r.rejections.len(), r.split.m), r.warnings)
        }
        RunConfig::Cv(c) => {
            let r = cross_validate(c, out)?;
            let summary = format!(
                "chose '{}' (grid index {}); {} rejections",
                r.chosen_id,
                r.chosen_index,
                r.report.rejections.len()
            );
            (summary, r.report.warnings)
        }
        RunConfig::Simulate(c) => {
            let pts = simulate(c, out)?;
            let mut warnings: Vec<String> = pts.iter().flat_map(|p| p.report.warnings.clone()).collect();
            warnings.dedup();
            (format!("{} curve points written", pts.len()), warnings)
        }
        RunConfig::Verify(c) => {
            let r = verify(c, out)?;
            (format!("estimate {:.4} (se {:.4}); within bound: {}", r.estimate, r.se, r.within_bound), Vec::new())
        }
    })
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match resolve(&cli).and_then(|(cfg, out)| execute(&cfg, &out)) {
        Ok((summary, warnings)) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scorer_spec_parsing() {
        assert_eq!(parse_scorer("histogram").unwrap().name(), "histogram");
        let c = parse_scorer(r#"{"kind":"linear","mu":[1.0,2.0]}"#).unwrap();
        assert_eq!(c, ScorerConfig::Linear { mu: vec![1.0, 2.0] });
        assert!(parse_scorer("{").is_err());
    }

    #[test]
    fn split_flags() {
        let s = SplitArgs { k: None, ell: Some(5), split: None };
        assert_eq!(s.policy().unwrap(), SplitPolicy::ExplicitEll { ell: 5 });
        let s = SplitArgs { k: None, ell: None, split: Some("halves".into()) };
        assert!(s.policy().is_err());
    }

    #[test]
    fn run_config_round_trip() {
        let cfg = RunConfig::Detect(DetectConfig {
            input: InputFiles { nts: "a.csv".into(), test: "b.csv".into(), header: true },
            alpha: 0.1,
            scorer: ScorerConfig::from_name("mlp").unwrap(),
            split: SplitPolicy::Explicit { k: 10 },
            variant: Variant::Storey { storey_k: None, lambda: Some(0.5) },
            seed: 4,
        });
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
