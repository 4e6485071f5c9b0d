use clap::{Args, Parser, Subcommand};
use curvbound::forms::{check_otsuki, BilinearForm};
use curvbound::harness::{self, output, CatalogRef, Experiment, ExperimentConfig, ExperimentReport};
use curvbound::immersions::{catalog_names, sample_chart, scan_minmax, CurvatureKind};
use curvbound::principles::{weak_hessian_sequence, ModifiedRadial, SequenceOptions};
use curvbound::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "curvbound", version, about = "Numerical checks of curvature estimates for cylindrically bounded submanifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment and report every check.
    Verify {
        experiment: String,
        #[command(flatten)]
        common: Common,
    },
    /// Sampled min-max functional of a catalog entry.
    Minmax {
        #[command(flatten)]
        common: Common,
        /// Use intrinsic instead of extrinsic curvature.
        #[arg(long)]
        intrinsic: bool,
    },
    /// Otsuki's lemma on a form read from a JSON list of symmetric matrices.
    Otsuki {
        form: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Weak Hessian sequence of the modified radial function, as JSON lines.
    Sequence {
        #[command(flatten)]
        common: Common,
    },
    /// Inspect the catalog of model immersions.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Work with saved JSON reports.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Print the catalog entry names.
    List,
}

#[derive(Subcommand)]
enum ReportAction {
    /// Print a JSON report as text.
    Render { path: PathBuf },
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Absolute tolerance for analytic identities.
    #[arg(long)]
    tol: Option<f64>,
    /// Directory receiving report.json, tables and plot data.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    /// Catalog entry name; parameters come from `--params`.
    #[arg(long)]
    entry: Option<String>,
    /// JSON object of catalog parameters.
    #[arg(long)]
    params: Option<String>,
    /// Run entries that violate `p < m − l`.
    #[arg(long = "override")]
    override_codimension: bool,
    /// Omit the generation time so reports are reproducible byte for byte.
    #[arg(long)]
    no_timestamp: bool,
}

impl Common {
    fn config(&self, experiment: Option<Experiment>) -> curvbound::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(e) = experiment {
            cfg.experiment = e;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.budget {
            cfg.budget = v;
        }
        if let Some(v) = self.tol {
            cfg.tolerances.analytic = v;
        }
        if let Some(v) = self.b {
            cfg.b = v;
        }
        if let Some(v) = self.r {
            cfg.r = Some(v);
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.l {
            cfg.l = v;
        }
        let params = self.params.as_deref().map(serde_json::from_str).transpose()?;
        match (&self.entry, params) {
            (Some(name), params) => {
                cfg.catalog = Some(CatalogRef { name: name.clone(), params: params.unwrap_or_else(|| serde_json::json!({})) });
            }
            (None, Some(params)) => match cfg.catalog.as_mut() {
                Some(c) => c.params = params,
                None => return Err(Error::InvalidInput("--params needs --entry or a catalog entry in --config".into())),
            },
            (None, None) => {}
        }
        cfg.override_codimension |= self.override_codimension;
        if let Some(dir) = &self.out {
            cfg.output.json = Some(dir.join("report.json"));
            cfg.output.csv = Some(dir.join("tables"));
            cfg.output.gnuplot = Some(dir.join("plot"));
            cfg.output.jsonl = Some(dir.join("sequence.jsonl"));
        }
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Refused(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Hypothesis(_) | Error::EmptyConstraintSet { .. } => Failure::Refused(e.to_string()),
            Error::InvalidInput(_) | Error::Json(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn emit(report: ExperimentReport, cfg: &ExperimentConfig, no_timestamp: bool) -> Result<bool, Failure> {
    let report = if no_timestamp { report } else { report.with_timestamp() };
    print!("{}", output::render(&report));
    if let Some(p) = &cfg.output.json {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(Error::from)?;
        }
        output::write_json(&report, p)?;
    }
    if let Some(d) = &cfg.output.csv {
        output::write_csv_tables(&report, d)?;
    }
    if let Some(d) = &cfg.output.gnuplot {
        output::write_gnuplot(&report, d)?;
    }
    Ok(report.passed)
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    harness::configure_threads()?;
    match cli.command {
        Command::Verify { experiment, common } => {
            let exp = Experiment::parse(&experiment).map_err(|e| Failure::Usage(e.to_string()))?;
            let cfg = common.config(Some(exp))?;
            let report = match exp {
                Experiment::Chain => {
                    let (report, record) = harness::chain(&cfg)?;
                    if let Some(p) = &cfg.output.jsonl {
                        std::fs::write(p, record.sequence.to_json_lines()?).map_err(Error::from)?;
                    }
                    report
                }
                Experiment::Penalized => {
                    let (report, records) = harness::penalized(&cfg)?;
                    if let Some(p) = &cfg.output.jsonl {
                        output::write_jsonl(&records, p)?;
                    }
                    report
                }
                _ => harness::run(&cfg)?,
            };
            emit(report, &cfg, common.no_timestamp)
        }
        Command::Minmax { common, intrinsic } => {
            let cfg = common.config(None)?;
            let f = cfg.immersion()?;
            let d = cfg.d_threshold.unwrap_or(f.dims().p + f.dims().l);
            let kind = if intrinsic { CurvatureKind::Intrinsic } else { CurvatureKind::Extrinsic };
            let samples = sample_chart(&f, cfg.budget.max(1), cfg.seed);
            let scan = scan_minmax(&f, &samples, d, &cfg.search, kind)?;
            let best = &scan.per_point[scan.argsup];
            let out = serde_json::json!({
                "entry": f.name(),
                "threshold": d,
                "samples": samples.len(),
                "sup_value": scan.sup_value,
                "argsup": best.chart_point,
            });
            println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
            Ok(true)
        }
        Command::Otsuki { form, lambda, tol, seed } => {
            let text = std::fs::read_to_string(&form).map_err(Error::from)?;
            let rows: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text).map_err(Error::from)?;
            let n = rows.first().map_or(0, Vec::len);
            let mats = rows
                .iter()
                .map(|m| nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]))
                .collect::<Vec<_>>();
            let form = BilinearForm::new(n, mats)?;
            let cfg = curvbound::grassmann::SearchConfig { seed, ..Default::default() };
            let mut report = check_otsuki(&form, lambda, &cfg)?;
            if tol != report.tolerance {
                report = curvbound::forms::otsuki_search(&form, &cfg)?.report(lambda, tol)?;
            }
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            Ok(report.consistent)
        }
        Command::Sequence { common } => {
            let cfg = common.config(None)?;
            let f = cfg.immersion()?;
            let field = ModifiedRadial { b: f.ambient().factor_p().curvature() };
            let opts = SequenceOptions {
                k_max: cfg.k_max,
                samples: cfg.budget.max(1),
                seed: cfg.seed,
                truncation: (!f.axial_coords().is_empty()).then_some(cfg.truncation),
                ..SequenceOptions::default()
            };
            let rec = weak_hessian_sequence(&f, &field, &opts)?;
            print!("{}", rec.to_json_lines()?);
            Ok(rec.all_found())
        }
        Command::Catalog { action: CatalogAction::List } => {
            for name in catalog_names() {
                println!("{name}");
            }
            Ok(true)
        }
        Command::Report { action: ReportAction::Render { path } } => {
            let text = std::fs::read_to_string(&path).map_err(Error::from)?;
            let report: ExperimentReport = serde_json::from_str(&text).map_err(Error::from)?;
            print!("{}", output::render(&report));
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Refused(msg)) => {
            eprintln!("refused: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
