//! Command-line front end.
//!
//! Every subcommand takes the same flag set; flags not used by a command are
//! ignored. Parameters may also come from a JSON file given with `--config`,
//! whose keys match the flag names (`boxRadius` for `--box-radius`) plus an
//! optional `model` object for quantile-table weights. Flags override the file.

pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, default_truncation, BoundReport};
use crate::error::{FppError, Result};
use crate::experiments::{
    concentration_curve, normalizer, run_slab_mc, sample_replicates, search_cross_probe, subadditivity_check,
    ui_tail, ExperimentConfig, Sampler,
};
use crate::slab::DEFAULT_BUDGET_CAP;
use crate::weights::{CouplingMap, Family, WeightModel};
use output::{
    csv_bytes, json_bytes, write_atomic, BoundsRow, ConcentrationRow, CoupleRow, Format, SampleRow, SearchCrossRow,
    SubaddRow, SummaryRow, UiTailRow,
};

#[derive(Debug, Parser)]
#[command(name = "fpp", version, about = "First-passage percolation slab crossings, samplers and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moment-bound series and normalized ratios.
    Bounds(Params),
    /// Slab crossing times by exact search on seeded weights.
    SampleSlab(Params),
    /// Slab crossing times by the Eden exploration (exponential weights).
    SampleEden(Params),
    /// Frequencies of |2ad s/log d - 1| > eta.
    Concentration(Params),
    /// Point-to-hyperplane time against greedy slab crossings.
    Subadd(Params),
    /// Search-and-cross fast-path probe.
    SearchCross(Params),
    /// Truncated means E[X 1{X >= M}] of the normalized crossing time.
    UiTail(Params),
    /// Tabulates h(t)/t near 0 for the exponential-to-F coupling.
    CoupleCheck(Params),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bounds(_) => "bounds",
            Command::SampleSlab(_) => "sample-slab",
            Command::SampleEden(_) => "sample-eden",
            Command::Concentration(_) => "concentration",
            Command::Subadd(_) => "subadd",
            Command::SearchCross(_) => "search-cross",
            Command::UiTail(_) => "ui-tail",
            Command::CoupleCheck(_) => "couple-check",
        }
    }

    fn params(&self) -> &Params {
        match self {
            Command::Bounds(p)
            | Command::SampleSlab(p)
            | Command::SampleEden(p)
            | Command::Concentration(p)
            | Command::Subadd(p)
            | Command::SearchCross(p)
            | Command::UiTail(p)
            | Command::CoupleCheck(p) => p,
        }
    }
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Dimensions, comma separated.
    #[arg(long = "d", value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    /// Density of F at 0.
    #[arg(long = "a")]
    pub a: Option<f64>,
    /// exp | uniform (tables go through `model` in a config file).
    #[arg(long)]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(skip)]
    pub model: Option<WeightModel>,
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Series truncation (default ceil(40 d)).
    #[serde(rename = "N")]
    #[arg(long = "N")]
    pub truncation: Option<usize>,
    #[serde(rename = "boxRadius")]
    #[arg(long = "box-radius")]
    pub box_radius: Option<u32>,
    /// Settled-vertex cap of each search.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[serde(rename = "M")]
    #[arg(long = "M")]
    pub m: Option<f64>,
    /// Number of hyperplanes for subadd.
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// eden | slab (default: eden for exponential weights).
    #[arg(long)]
    pub sampler: Option<String>,
    /// Grid size for couple-check.
    #[arg(long)]
    pub grid: Option<usize>,
    /// rows | summary, for the sampling commands.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    pub format: Option<String>,
    #[serde(skip)]
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Params {
    /// `self` with gaps filled from `base`.
    fn over(self, base: Params) -> Params {
        Params {
            d: self.d.or(base.d),
            a: self.a.or(base.a),
            family: self.family.or(base.family),
            model: self.model.or(base.model),
            seed: self.seed.or(base.seed),
            reps: self.reps.or(base.reps),
            truncation: self.truncation.or(base.truncation),
            box_radius: self.box_radius.or(base.box_radius),
            budget: self.budget.or(base.budget),
            eta: self.eta.or(base.eta),
            m: self.m.or(base.m),
            n: self.n.or(base.n),
            sampler: self.sampler.or(base.sampler),
            grid: self.grid.or(base.grid),
            mode: self.mode.or(base.mode),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            config: self.config,
        }
    }

    fn resolve(self) -> Result<Params> {
        match &self.config {
            Some(path) => {
                let text = std::fs::read(path)?;
                let file: Params = serde_json::from_slice(&text)
                    .map_err(|e| FppError::Config(format!("{}: {e}", path.display())))?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }

    fn dims(&self) -> Result<Vec<usize>> {
        let d = self.d.clone().ok_or_else(|| FppError::Config("--d is required".into()))?;
        if d.is_empty() {
            return Err(FppError::Config("--d is empty".into()));
        }
        if let Some(bad) = d.iter().find(|&&x| x < 2) {
            return Err(FppError::Config(format!("dimension must be at least 2, got {bad}")));
        }
        Ok(d)
    }

    fn rate(&self) -> f64 {
        self.a.unwrap_or(1.0)
    }

    /// Weight model from `model`, or from `family` and `a`.
    fn weight_model(&self) -> Result<WeightModel> {
        let seed = self.seed.unwrap_or(0);
        match (self.family.as_deref(), &self.model) {
            (None | Some("table"), Some(m)) => {
                m.family.validate().map_err(config_err)?;
                Ok(m.with_seed(seed))
            }
            _ => self.parametric(seed),
        }
    }

    fn parametric(&self, seed: u64) -> Result<WeightModel> {
        let a = self.rate();
        let family = match self.family.as_deref().unwrap_or("exp") {
            "exp" => Family::Exponential { a },
            "uniform" => Family::Uniform { a },
            "table" => return Err(FppError::Config("table weights need a `model` object in --config".into())),
            other => return Err(FppError::Config(format!("unknown family {other:?}"))),
        };
        WeightModel::new(family, seed).map_err(config_err)
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            d_grid: self.dims()?,
            model: self.weight_model()?,
            replicates: self.reps.unwrap_or(1000),
            root_seed: self.seed.unwrap_or(0),
            box_radius: self.box_radius,
            budget_cap: self.budget.unwrap_or(DEFAULT_BUDGET_CAP),
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }

    fn sampler_for(&self, model: &WeightModel) -> Result<Sampler> {
        match &self.sampler {
            Some(s) => s.parse(),
            None => Ok(Sampler::auto(&model.family)),
        }
    }

    fn format(&self) -> Result<Format> {
        match &self.format {
            Some(f) => f.parse(),
            None => match self.out.as_ref().and_then(|p| p.extension()) {
                Some(ext) if ext == "json" => Ok(Format::Json),
                _ => Ok(Format::Csv),
            },
        }
    }

    fn summary_mode(&self) -> Result<bool> {
        match self.mode.as_deref().unwrap_or("summary") {
            "summary" => Ok(true),
            "rows" => Ok(false),
            other => Err(FppError::Config(format!("unknown mode {other:?} (expected rows or summary)"))),
        }
    }
}

fn config_err(e: FppError) -> FppError {
    match e {
        FppError::Domain(m) => FppError::Config(m),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoupleReport {
    pub family: String,
    pub a: f64,
    /// `sup_t |h(t)/t - 1|` over the grid.
    pub sup_deviation: f64,
    /// Grid steps where `h` decreases.
    pub monotonicity_violations: usize,
    pub rows: Vec<CoupleRow>,
}

/// `h(t)/t` on `grid` log-spaced points `t ∈ [1e-10/a, 1/a]`.
pub fn couple_check(family: &Family, grid: usize) -> Result<CoupleReport> {
    if grid < 2 {
        return Err(FppError::domain("grid must have at least 2 points"));
    }
    let a = family.density_at_zero().ok_or_else(|| {
        FppError::UnsupportedModel(format!("{} family has no positive density at 0", family.name()))
    })?;
    let map = CouplingMap::new(family.clone(), a)?;
    let rows: Vec<CoupleRow> = (0..grid)
        .map(|k| {
            let t = 10f64.powf(-10.0 + 10.0 * k as f64 / (grid - 1) as f64) / a;
            let h = map.couple_unchecked(t);
            CoupleRow { t, h, ratio: h / t }
        })
        .collect();
    Ok(CoupleReport {
        family: family.name().to_string(),
        a,
        sup_deviation: rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max),
        monotonicity_violations: rows.windows(2).filter(|w| w[1].h < w[0].h).count(),
        rows,
    })
}

/// What a successful run produced.
#[derive(Debug)]
pub struct Outcome {
    pub summary: String,
    pub bytes: Vec<u8>,
    pub out: Option<PathBuf>,
}

fn emit<R: Serialize, J: Serialize + ?Sized>(format: Format, rows: &[R], doc: &J) -> Result<Vec<u8>> {
    match format {
        Format::Csv => csv_bytes(rows),
        Format::Json => json_bytes(doc),
    }
}

/// Parses `args` (program name first) and runs the command. Nothing is
/// written to disk on error.
pub fn run<I, T>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let text = e.to_string();
        FppError::Config(text.trim_start_matches("error: ").trim_end().to_string())
    })?;
    let name = cli.command.name();
    let p = cli.command.params().clone().resolve()?;
    let format = p.format()?;
    let (bytes, summary) = match &cli.command {
        Command::Bounds(_) => {
            let a = p.rate();
            let reports: Vec<BoundReport> = p
                .dims()?
                .into_iter()
                .map(|d| bound_report(d, a, p.truncation.unwrap_or_else(|| default_truncation(d))))
                .collect::<Result<_>>()?;
            let rows: Vec<BoundsRow> = reports.iter().map(BoundsRow::from).collect();
            let last = reports.last().expect("nonempty grid");
            let summary = format!("bounds: {} rows; d={} ub1={:.6e} ratio1={:.4}", rows.len(), last.d, last.ub1, last.ratio1);
            (emit(format, &rows, &reports)?, summary)
        }
        Command::SampleSlab(_) | Command::SampleEden(_) => {
            let cfg = p.experiment()?;
            let sampler = if name == "sample-eden" { Sampler::Eden } else { Sampler::Slab };
            if p.summary_mode()? {
                let stats = run_slab_mc(&cfg, sampler)?;
                let rows: Vec<SummaryRow> = stats.iter().map(SummaryRow::from).collect();
                let last = stats.last().expect("nonempty grid");
                let summary = format!(
                    "{name}: {} dims x {} reps; d={} mean={:.6e} normalizedMean={:.4}",
                    stats.len(),
                    cfg.replicates,
                    last.d,
                    last.mean,
                    last.normalized_mean
                );
                (emit(format, &rows, &stats)?, summary)
            } else {
                let a = cfg.rate()?;
                let mut rows = Vec::new();
                for &d in &cfg.d_grid {
                    let norm = normalizer(d, a);
                    let samples = sample_replicates(&cfg, d, sampler)?;
                    rows.extend(samples.iter().enumerate().map(|(r, s)| SampleRow::new(r, s, norm)));
                }
                let summary = format!("{name}: {} sample rows", rows.len());
                (emit(format, &rows, &rows)?, summary)
            }
        }
        Command::Concentration(_) => {
            let cfg = p.experiment()?;
            let eta = p.eta.unwrap_or(0.5);
            let pts = concentration_curve(&cfg, p.sampler_for(&cfg.model)?, eta)?;
            let rows: Vec<ConcentrationRow> = pts.iter().map(ConcentrationRow::from).collect();
            let summary = format!(
                "concentration: eta={eta}; {}",
                pts.iter().map(|c| format!("d={} p={:.4}", c.d, c.estimate)).collect::<Vec<_>>().join(", ")
            );
            (emit(format, &rows, &pts)?, summary)
        }
        Command::Subadd(_) => {
            let cfg = p.experiment()?;
            let rep = subadditivity_check(&cfg, p.n.unwrap_or(5))?;
            let summary = format!(
                "subadd: d={} n={} lhs={:.6e} rhs={:.6e} pathwiseViolations={}",
                rep.d, rep.n, rep.lhs, rep.rhs, rep.pathwise_violations
            );
            (emit(format, &[SubaddRow::from(&rep)], &rep)?, summary)
        }
        Command::SearchCross(_) => {
            let model = p.weight_model()?;
            let reps = p.reps.unwrap_or(1000);
            let seed = p.seed.unwrap_or(0);
            let reports = p
                .dims()?
                .into_iter()
                .map(|d| search_cross_probe(d, &model, reps, seed))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<SearchCrossRow> = reports.iter().map(SearchCrossRow::from).collect();
            let summary = format!(
                "search-cross: {}",
                reports
                    .iter()
                    .map(|r| format!("d={} pHat={:.4} target={:.4}", r.d, r.p_hat_fj, r.target))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            (emit(format, &rows, &reports)?, summary)
        }
        Command::UiTail(_) => {
            let cfg = p.experiment()?;
            let m = p.m.unwrap_or(100.0);
            let pts = ui_tail(&cfg, p.sampler_for(&cfg.model)?, m)?;
            let rows: Vec<UiTailRow> = pts.iter().map(UiTailRow::from).collect();
            let summary = format!(
                "ui-tail: M={m}; {}",
                pts.iter().map(|u| format!("d={} {:.3e}", u.d, u.estimate)).collect::<Vec<_>>().join(", ")
            );
            (emit(format, &rows, &pts)?, summary)
        }
        Command::CoupleCheck(_) => {
            let model = p.weight_model()?;
            let rep = couple_check(&model.family, p.grid.unwrap_or(200))?;
            let summary = format!(
                "couple-check: {} supDeviation={:.6e} monotonicityViolations={}",
                rep.family, rep.sup_deviation, rep.monotonicity_violations
            );
            (emit(format, &rep.rows, &rep)?, summary)
        }
    };
    if let Some(path) = &p.out {
        write_atomic(path, &bytes)?;
    }
    Ok(Outcome { summary, bytes, out: p.out })
}

/// Machine-readable error record printed on failure.
#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub error: String,
    pub message: String,
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &FppError) -> i32 {
    match e {
        FppError::Config(_) => 2,
        _ => 1,
    }
}

/// Runs the CLI, reporting to the given streams; returns the exit status.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // Help and version are not errors.
    if let Err(e) = Cli::try_parse_from(&args) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
            let _ = write!(stdout, "{e}");
            return 0;
        }
    }
    match run(args) {
        Ok(o) => {
            if o.out.is_none() {
                let _ = stdout.write_all(&o.bytes);
            }
            let _ = writeln!(stderr, "{}", o.summary);
            0
        }
        Err(e) => {
            let rec = ErrorRecord { error: e.kind().to_string(), message: e.to_string() };
            let _ = writeln!(stderr, "{}", serde_json::to_string(&rec).unwrap_or_default());
            exit_code(&e)
        }
    }
}

/// Caps the global worker pool at `FPP_THREADS` when set.
pub fn init_threads_from_env() -> Result<()> {
    if let Ok(v) = std::env::var("FPP_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| FppError::Config(format!("FPP_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(FppError::Config("FPP_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| FppError::Config(e.to_string()))?;
    }
    Ok(())
}
