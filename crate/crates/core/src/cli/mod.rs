//! Command-line front end: `treeclust --synthetic NAME --n N --h H --out DIR`
//! and friends. Exit codes: 0 success, 2 usage, 3 data, 4 numerical or
//! precondition failure.

mod export;
mod io;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::calibration::{calibrate, fixture, CALIBRATION_SEEDS, FIXTURES};
use crate::dbscan::{dbscan_hierarchy, modified_dbscan_hierarchy, Algorithm, ClusterHierarchy};
use crate::error::Error;
use crate::evaluation::{gap_bandwidth, gap_run, rate_experiment, RateConfig};
use crate::geometry::Dataset;
use crate::grid::GriddedDensity;
use crate::kde::{build_valid_kernel, error_budget, optimal_bandwidth, ErrorBudget, Kernel};
use crate::levelset::{devroye_wise, gap_inputs, grid_hierarchy, kde_on_grid};
use crate::synthetic::registry::lookup;

pub use export::{dendrogram_json, validate, DendrogramJson, LevelJson, MergeJson, SplitJson};
pub use io::{ingest, parse, to_csv, write_atomic, Format};

pub const THREADS_ENV: &str = "TREECLUST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Dbscan,
    Mdbscan,
    Gridlevel,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Dbscan => Algorithm::Dbscan,
            AlgorithmArg::Mdbscan => Algorithm::Mdbscan,
            AlgorithmArg::Gridlevel => Algorithm::Gridlevel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Rates,
    GapLevelset,
    Calibrate,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "treeclust", version, about = "Density cluster tree estimation")]
pub struct Args {
    /// Data file, one point per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Input format; guessed from the extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Named synthetic density to sample from.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Sample size for --synthetic.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "dbscan")]
    pub algorithm: AlgorithmArg,
    /// Explicit bandwidth.
    #[arg(long)]
    pub h: Option<f64>,
    /// Smoothness α for the bandwidth rule, bias term and pruning.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// C in h = C (log n / n)^{1/(2α+d)}.
    #[arg(long = "bandwidth-c")]
    pub bandwidth_c: Option<f64>,
    /// Order of the valid kernel (required for mdbscan).
    #[arg(long = "kernel-order")]
    pub kernel_order: Option<usize>,
    /// Explicit pruning threshold Δ.
    #[arg(long = "prune-delta")]
    pub prune_delta: Option<f64>,
    /// Separation constant c_S; prunes with Δ = 2a_n + (4h/c_S)^α.
    #[arg(long)]
    pub cs: Option<f64>,
    /// Known gap: level λ_* and size ε.
    #[arg(long, num_args = 2, value_names = ["LAMBDA_STAR", "EPSILON"], allow_negative_numbers = true)]
    pub gap: Option<Vec<f64>>,
    /// Budget constant C1 of a_n.
    #[arg(long)]
    pub c1: Option<f64>,
    /// Budget constant C2 of a_n.
    #[arg(long)]
    pub c2: Option<f64>,
    /// Confidence γ of a_n; defaults to log n.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Grid spacing for gridlevel and level-set measures.
    #[arg(long = "grid-step")]
    pub grid_step: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// Sample sizes for experiments, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Number of seeds per experiment cell (seeds start at --seed).
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Calibration fixture (default: all).
    #[arg(long)]
    pub fixture: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
    Numerical(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "data error: {e}"),
            CliError::Numerical(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Io(_) | Error::DimensionMismatch { .. } | Error::InvalidInput(_) => {
                CliError::Data(e)
            }
            Error::Unsupported(m) => CliError::Usage(m),
            other => CliError::Numerical(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Parses `argv`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Some(t),
            _ => {
                eprintln!("usage error: {THREADS_ENV} must be a positive integer, got '{v}'");
                return 2;
            }
        },
        Err(_) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 4;
        }
    };
    match pool.install(|| execute(&args)) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Runs the command and returns the files written.
pub fn execute(args: &Args) -> CliResult<Vec<PathBuf>> {
    match args.experiment {
        None => run(args),
        Some(Experiment::Rates) => run_rates(args),
        Some(Experiment::GapLevelset) => run_gap_levelset(args),
        Some(Experiment::Calibrate) => run_calibrate(args),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Source {
    File { path: String, format: Format },
    Synthetic { name: String, n: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
enum BandwidthChoice {
    Explicit,
    Optimal { alpha: f64, c: f64 },
}

fn load_data(args: &Args) -> CliResult<(Dataset, Source)> {
    match (&args.input, &args.synthetic) {
        (Some(_), Some(_)) => usage("--input and --synthetic conflict; give exactly one"),
        (None, None) => usage("no data: give --input FILE or --synthetic NAME"),
        (Some(path), None) => {
            if args.n.is_some() {
                return usage("--n applies to --synthetic only; it conflicts with --input");
            }
            let format = args.format.unwrap_or_else(|| Format::from_path(path));
            let ds = ingest(path, format)?;
            Ok((ds, Source::File { path: path.display().to_string(), format }))
        }
        (None, Some(name)) => {
            let Some(n) = args.n else {
                return usage("--synthetic needs --n");
            };
            if args.format.is_some() {
                return usage("--format applies to --input only");
            }
            let spec = lookup(name).map_err(|e| CliError::Usage(e.to_string()))?;
            let ds = spec.sample(n, args.seed)?;
            Ok((ds, Source::Synthetic { name: name.clone(), n, seed: args.seed }))
        }
    }
}

fn resolve_bandwidth(args: &Args, n: usize, d: usize) -> CliResult<(f64, BandwidthChoice)> {
    match (args.h, args.bandwidth_c) {
        (Some(_), Some(_)) => usage("--h and --bandwidth-c conflict; give an explicit h or a rule, not both"),
        (Some(h), None) => {
            if !(h > 0.0 && h.is_finite()) {
                return usage(format!("--h must be positive, got {h}"));
            }
            Ok((h, BandwidthChoice::Explicit))
        }
        (None, Some(c)) => {
            let Some(alpha) = args.alpha else {
                return usage("--bandwidth-c needs --alpha");
            };
            if !(c > 0.0 && alpha > 0.0) {
                return usage("--bandwidth-c and --alpha must be positive");
            }
            Ok((optimal_bandwidth(n, d, alpha, c), BandwidthChoice::Optimal { alpha, c }))
        }
        (None, None) => usage("no bandwidth: give --h or --alpha with --bandwidth-c"),
    }
}

fn resolve_kernel(args: &Args, d: usize) -> CliResult<Kernel> {
    match (args.algorithm, args.kernel_order) {
        (AlgorithmArg::Dbscan, Some(_)) => usage("--kernel-order conflicts with --algorithm dbscan (spherical kernel)"),
        (AlgorithmArg::Mdbscan, None) => usage("--algorithm mdbscan needs --kernel-order"),
        (_, Some(order)) => Ok(build_valid_kernel(order, d)?),
        (_, None) => Ok(Kernel::Spherical),
    }
}

fn resolve_budget(args: &Args, n: usize, h: f64, d: usize) -> CliResult<Option<ErrorBudget>> {
    let Some(c1) = args.c1 else {
        if args.c2.is_some() || args.gamma.is_some() {
            return usage("--c2 and --gamma need --c1");
        }
        return Ok(None);
    };
    let c2 = args.c2.unwrap_or(0.0);
    let alpha = match (args.alpha, c2 != 0.0) {
        (Some(a), _) => a,
        (None, false) => 1.0,
        (None, true) => return usage("--c2 needs --alpha for the bias term"),
    };
    let gamma = args.gamma.unwrap_or((n as f64).ln());
    Ok(Some(error_budget(n, h, d, alpha, 0.0, gamma, c1, c2)?))
}

fn budget_json(b: &ErrorBudget) -> serde_json::Value {
    json!({
        "c1": b.c1, "c2": b.c2, "gamma": b.gamma, "alpha": b.alpha,
        "a_n": b.a_n(), "stochastic": b.stochastic_term(), "bias": b.bias_term(),
    })
}

fn reject_experiment_flags(args: &Args) -> CliResult<()> {
    if args.ns.is_some() || args.seeds.is_some() || args.fixture.is_some() {
        return usage("--ns, --seeds and --fixture apply to --experiment only");
    }
    Ok(())
}

fn grid_for(ds: &Dataset, h: f64, kernel: &Kernel, step: f64) -> CliResult<GriddedDensity> {
    let (lo, hi) = ds.bounding_box();
    let pad = h * kernel.support_radius(ds.dim());
    let lo: Vec<f64> = lo.iter().map(|v| v - pad).collect();
    let hi: Vec<f64> = hi.iter().map(|v| v + pad).collect();
    Ok(GriddedDensity::from_fn(&lo, &hi, step, |_| 0.0)?)
}

/// Flag-level checks that need no data, so conflicts surface before any I/O.
fn check_run_flags(args: &Args) -> CliResult<()> {
    reject_experiment_flags(args)?;
    let conflicts: [(bool, &str); 4] = [
        (args.input.is_some() && args.synthetic.is_some(), "--input and --synthetic"),
        (args.h.is_some() && args.bandwidth_c.is_some(), "--h and --bandwidth-c"),
        (args.prune_delta.is_some() && args.cs.is_some(), "--prune-delta and --cs"),
        (args.algorithm == AlgorithmArg::Dbscan && args.kernel_order.is_some(), "--kernel-order and --algorithm dbscan"),
    ];
    if let Some((_, keys)) = conflicts.iter().find(|(hit, _)| *hit) {
        return usage(format!("{keys} conflict"));
    }
    if args.h.is_none() && args.bandwidth_c.is_none() {
        return usage("no bandwidth: give --h or --alpha with --bandwidth-c");
    }
    if args.bandwidth_c.is_some() && args.alpha.is_none() {
        return usage("--bandwidth-c needs --alpha");
    }
    if args.algorithm == AlgorithmArg::Mdbscan && args.kernel_order.is_none() {
        return usage("--algorithm mdbscan needs --kernel-order");
    }
    if args.cs.is_some() && (args.alpha.is_none() || args.c1.is_none()) {
        return usage("--cs needs --alpha and --c1");
    }
    if args.gap.is_some() {
        if args.algorithm != AlgorithmArg::Dbscan {
            return usage("--gap and --algorithm conflict: the gap estimate uses dbscan");
        }
        if args.c1.is_none() {
            return usage("--gap needs --c1 to compute a_n");
        }
    }
    if args.grid_step.is_some() && args.algorithm != AlgorithmArg::Gridlevel {
        return usage("--grid-step applies to --algorithm gridlevel only");
    }
    Ok(())
}

fn run(args: &Args) -> CliResult<Vec<PathBuf>> {
    check_run_flags(args)?;
    let (ds, source) = load_data(args)?;
    let (n, d) = (ds.len(), ds.dim());
    let (h, bandwidth) = resolve_bandwidth(args, n, d)?;
    let kernel = resolve_kernel(args, d)?;
    let budget = resolve_budget(args, n, h, d)?;

    let mut grid_info = serde_json::Value::Null;
    let hier: ClusterHierarchy = match args.algorithm {
        AlgorithmArg::Dbscan => dbscan_hierarchy(&ds, h)?,
        AlgorithmArg::Mdbscan => modified_dbscan_hierarchy(&ds, &kernel, h)?,
        AlgorithmArg::Gridlevel => {
            if d > 2 {
                return usage(format!("--algorithm gridlevel supports d <= 2, data has d = {d}"));
            }
            let step = args.grid_step.unwrap_or(h / 8.0);
            let like = grid_for(&ds, h, &kernel, step)?;
            let est = kde_on_grid(&ds, &kernel, h, &like)?;
            grid_info = json!({ "step": step, "lo": est.lo(), "shape": est.shape() });
            grid_hierarchy(&ds, &est, &kernel, h)?
        }
    };

    let (delta, pruning) = match (args.prune_delta, args.cs) {
        (Some(_), Some(_)) => return usage("--prune-delta and --cs conflict; give Δ directly or through c_S"),
        (Some(delta), None) => {
            if !(delta > 0.0) {
                return usage("--prune-delta must be positive");
            }
            (Some(delta), json!({ "delta": delta, "source": "explicit" }))
        }
        (None, Some(cs)) => {
            let Some(alpha) = args.alpha else {
                return usage("--cs needs --alpha");
            };
            let Some(b) = &budget else {
                return usage("--cs needs --c1 (and --c2) to compute a_n");
            };
            let delta = 2.0 * b.a_n() + (4.0 * h / cs).powf(alpha);
            (Some(delta), json!({ "delta": delta, "source": "separation", "c_s": cs, "alpha": alpha, "a_n": b.a_n() }))
        }
        (None, None) => (None, serde_json::Value::Null),
    };

    let dendro = dendrogram_json(&hier, delta);
    validate(&dendro)?;
    if hier.check_nesting() != 0 {
        return Err(CliError::Numerical(Error::Precondition("hierarchy nesting check failed".into())));
    }

    let out = &args.out;
    let mut written = Vec::new();
    let mut outputs = vec!["dendrogram.json"];

    let gap_json = match &args.gap {
        None => serde_json::Value::Null,
        Some(g) => {
            if args.algorithm != AlgorithmArg::Dbscan {
                return usage("--gap uses the DBSCAN level set; it needs --algorithm dbscan");
            }
            let Some(b) = &budget else {
                return usage("--gap needs --c1 to compute a_n");
            };
            let (low, eps) = (g[0], g[1]);
            let variance_only = ErrorBudget { c2: 0.0, ..*b };
            let c_rule = match bandwidth {
                BandwidthChoice::Optimal { c, .. } => c,
                BandwidthChoice::Explicit => 1.0,
            };
            let inputs = gap_inputs(n, d, h, low, low + eps, &variance_only, c_rule)?;
            let est = devroye_wise(&ds, h, inputs.k)?;
            let body = json!({
                "lambda_star": low, "epsilon": eps, "lambda": inputs.lambda, "k": inputs.k,
                "a_n": inputs.a_n, "h": h, "h_min": inputs.h_min, "h_min_constant": c_rule, "h_ok": inputs.h_ok,
                "estimate": est.to_json(),
            });
            let path = out.join("levelset.json");
            write_atomic(&path, pretty(&body).as_bytes())?;
            written.push(path);
            outputs.push("levelset.json");
            json!({ "lambda_star": low, "epsilon": eps, "lambda": inputs.lambda, "k": inputs.k, "a_n": inputs.a_n, "h_min": inputs.h_min, "h_ok": inputs.h_ok })
        }
    };

    let lambda_k: Vec<serde_json::Value> = (0..hier.num_levels())
        .filter_map(|i| hier.k_of_level(i).map(|k| json!({ "k": k, "lambda": hier.levels()[i] })))
        .collect();
    outputs.push("manifest.json");
    let manifest = json!({
        "tool": "treeclust",
        "version": env!("CARGO_PKG_VERSION"),
        "source": source,
        "n": n,
        "dim": d,
        "algorithm": Algorithm::from(args.algorithm),
        "kernel": hier.kernel,
        "h": h,
        "bandwidth": bandwidth,
        "grid": grid_info,
        "levels": hier.num_levels(),
        "lambda_k": lambda_k,
        "budget": budget.as_ref().map(budget_json),
        "pruning": pruning,
        "splits": dendro.splits.len(),
        "significant_splits": dendro.splits.iter().filter(|s| s.significant == Some(true)).count(),
        "gap": gap_json,
        "outputs": outputs,
    });

    let path = out.join("dendrogram.json");
    write_atomic(&path, serde_json::to_string(&dendro).expect("serializable").as_bytes())?;
    written.insert(0, path);
    let path = out.join("manifest.json");
    write_atomic(&path, pretty(&manifest).as_bytes())?;
    written.push(path);
    Ok(written)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn seed_list(args: &Args, default: usize) -> Vec<u64> {
    let count = args.seeds.unwrap_or(default) as u64;
    (args.seed..args.seed + count).collect()
}

fn run_rates(args: &Args) -> CliResult<Vec<PathBuf>> {
    let Some(name) = &args.synthetic else {
        return usage("--experiment rates needs --synthetic");
    };
    if args.input.is_some() || args.n.is_some() || args.h.is_some() {
        return usage("--experiment rates takes --ns and a bandwidth rule, not --input, --n or --h");
    }
    let spec = lookup(name).map_err(|e| CliError::Usage(e.to_string()))?;
    let (Some(alpha), Some(c)) = (args.alpha, args.bandwidth_c) else {
        return usage("--experiment rates needs --alpha and --bandwidth-c");
    };
    let algorithm = match args.algorithm {
        AlgorithmArg::Gridlevel => return usage("--experiment rates supports dbscan and mdbscan"),
        a => Algorithm::from(a),
    };
    let kernel = resolve_kernel(args, spec.dim)?;
    let ns = args.ns.clone().unwrap_or_else(|| vec![250, 500, 1000, 2000, 4000]);
    let mut config = RateConfig::new(algorithm, alpha, c, kernel, ns, seed_list(args, 50));
    if let Some(step) = args.grid_step {
        config.grid_step = step;
    }
    let table = rate_experiment(&spec, &config)?;
    let csv_path = args.out.join("rates.csv");
    write_atomic(&csv_path, table.to_csv().as_bytes())?;
    let json_path = args.out.join("rates.json");
    write_atomic(&json_path, pretty(&table).as_bytes())?;
    Ok(vec![csv_path, json_path])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn run_gap_levelset(args: &Args) -> CliResult<Vec<PathBuf>> {
    let name = args.synthetic.as_deref().unwrap_or("gap-disk-square");
    if args.input.is_some() || args.n.is_some() || args.h.is_some() {
        return usage("--experiment gap-levelset takes --ns and --bandwidth-c, not --input, --n or --h");
    }
    let spec = lookup(name).map_err(|e| CliError::Usage(e.to_string()))?;
    let Some(facts) = spec.facts.gap else {
        return usage(format!("density '{name}' has no gap"));
    };
    let (Some(c), Some(c1)) = (args.bandwidth_c, args.c1) else {
        return usage("--experiment gap-levelset needs --bandwidth-c and --c1");
    };
    let ns = args.ns.clone().unwrap_or_else(|| vec![1000, 4000]);
    let seeds = seed_list(args, 50);
    let (lo, hi) = spec.bounds();
    let like = GriddedDensity::from_fn(&lo, &hi, args.grid_step.unwrap_or(0.005), |_| 0.0)?;
    let mut csv = String::from("n,seed,h,k,error,bound,clusters_ok,sandwich_ok\n");
    let mut summary = Vec::new();
    for &n in &ns {
        let h = gap_bandwidth(n, spec.dim, facts.epsilon, facts.sigma, c);
        let gamma = args.gamma.unwrap_or((n as f64).ln());
        let budget = error_budget(n, h, spec.dim, 1.0, 0.0, gamma, c1, 0.0)?;
        let runs: Vec<_> = seeds.iter().map(|&s| gap_run(&spec, n, s, h, &budget, &like)).collect::<crate::Result<_>>()?;
        for r in &runs {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.n, r.seed, r.h, r.k, r.error, r.bound, r.clusters_ok, r.sandwich_ok
            ));
        }
        summary.push(json!({
            "n": n, "h": h, "k": runs[0].k, "lambda": runs[0].lambda, "a_n": runs[0].a_n, "bound": runs[0].bound,
            "median_error": median(runs.iter().map(|r| r.error).collect()),
            "within_bound": runs.iter().filter(|r| r.error <= r.bound).count(),
            "clusters_ok": runs.iter().filter(|r| r.clusters_ok).count(),
            "sandwich_ok": runs.iter().filter(|r| r.sandwich_ok).count(),
            "runs": runs.len(),
        }));
    }
    let csv_path = args.out.join("gap_levelset.csv");
    write_atomic(&csv_path, csv.as_bytes())?;
    let json_path = args.out.join("gap_levelset.json");
    let body = json!({ "density": name, "bandwidth_c": c, "c1": c1, "seeds": seeds, "rows": summary });
    write_atomic(&json_path, pretty(&body).as_bytes())?;
    Ok(vec![csv_path, json_path])
}

fn run_calibrate(args: &Args) -> CliResult<Vec<PathBuf>> {
    let fixtures = match &args.fixture {
        Some(name) => vec![fixture(name)?],
        None => FIXTURES.iter().collect(),
    };
    let seeds = args.seeds.unwrap_or(CALIBRATION_SEEDS);
    let results = fixtures.iter().map(|f| calibrate(f, seeds)).collect::<crate::Result<Vec<_>>>()?;
    let path = args.out.join("calibration.json");
    write_atomic(&path, pretty(&results).as_bytes())?;
    for r in &results {
        eprintln!("(\"{}\", {:?}, {:?}),", r.fixture, r.c1, r.c2);
    }
    Ok(vec![path])
}
