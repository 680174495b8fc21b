use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mirror_kde::bandwidth::{
    self, linear_grid, minimize_criterion, rule_of_thumb, Criterion, CvCopies, Method,
};
use mirror_kde::harness::{run_experiment, ExperimentPlan, PlanMethod};
use mirror_kde::io::{
    load_csv, save_grid_csv, save_pseudo_csv, ColumnRef, DatasetSpec, GridBounds, HeaderMode,
    Manifest, RowFilter,
};
use mirror_kde::reference::sample_kendall_tau;
use mirror_kde::transform::MirrorSet;
use mirror_kde::{
    ecdf_transform, Error, EstimatorConfig, FrankCopula, Kernel, MirrorEstimator, Result, Scaling,
};

/// Mirror-reflection kernel estimation of bivariate copula densities.
#[derive(Parser, Debug)]
#[command(name = "mirror-kde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select a bandwidth, estimate the copula density and export a grid.
    Fit(FitArgs),
    /// Export a bandwidth criterion evaluated over a grid of bandwidths.
    LscvCurve(CurveArgs),
    /// Monte Carlo bandwidth/ISE table against a Frank copula.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,
    /// First variable: 1-based column index or header name.
    #[arg(long)]
    x: ColumnRef,
    /// Second variable: 1-based column index or header name.
    #[arg(long)]
    y: ColumnRef,
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// auto, yes or no.
    #[arg(long, default_value = "auto")]
    header: HeaderMode,
    /// Keep only rows with COLUMN=VALUE.
    #[arg(long)]
    filter: Option<RowFilter>,
    /// Pseudo-observation scaling: n+1 (rank/(n+1)) or n (rank/n).
    #[arg(long, default_value = "n+1")]
    scaling: Scaling,
}

impl DataArgs {
    fn spec(&self) -> Result<DatasetSpec> {
        if !self.delimiter.is_ascii() {
            return Err(Error::InvalidArgument(
                "delimiter must be a single ASCII character".into(),
            ));
        }
        Ok(DatasetSpec {
            path: self.data.clone(),
            column_x: self.x.clone(),
            column_y: self.y.clone(),
            delimiter: self.delimiter as u8,
            header: self.header,
            filter: self.filter.clone(),
        })
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = 0.005)]
    h_min: f64,
    #[arg(long, default_value_t = 0.30)]
    h_max: f64,
    #[arg(long, default_value_t = 0.001)]
    h_step: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<Vec<f64>> {
        if self.h_min == self.h_max && self.h_min > 0.0 {
            return Ok(vec![self.h_min]);
        }
        linear_grid(self.h_min, self.h_max, self.h_step)
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "epanechnikov")]
    kernel: Kernel,
    /// lscv, lscv-gamma, bcv or rule-of-thumb.
    #[arg(long, default_value = "lscv")]
    method: Method,
    /// Use this bandwidth instead of selecting one.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Mirror copies in the cross-validation sum: all or original.
    #[arg(long, default_value = "all")]
    cv_copies: CvCopies,
    /// Density grid nodes per axis.
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "epanechnikov")]
    kernel: Kernel,
    /// lscv, lscv-gamma or bcv.
    #[arg(long, default_value = "lscv")]
    method: Method,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = "all")]
    cv_copies: CvCopies,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,200,500,1000")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 5.0)]
    theta: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: rule-of-thumb, lscv.
    #[arg(long, value_delimiter = ',', default_value = "rule-of-thumb,lscv")]
    methods: Vec<PlanMethod>,
    #[arg(long, default_value = "all")]
    cv_copies: CvCopies,
    #[arg(long, default_value = "n+1")]
    scaling: Scaling,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn criterion(method: Method, kernel: Kernel, copies: CvCopies) -> Result<Criterion> {
    match method {
        Method::LscvFull => Ok(Criterion::LscvFull { kernel, copies }),
        Method::LscvGamma => Ok(Criterion::LscvGamma { kernel }),
        Method::Bcv => Ok(Criterion::Bcv),
        Method::RuleOfThumb => Err(Error::InvalidArgument(
            "rule-of-thumb has no criterion curve".into(),
        )),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let spec = a.data.spec()?;
    let sample = load_csv(&spec)?;
    let pseudo = ecdf_transform(&sample.x, &sample.y, a.data.scaling)?;
    let n = pseudo.len();
    let seed = a.seed.unwrap_or_else(rand::random);
    ensure_dir(&a.out)?;
    let mut manifest = Manifest::new("fit");
    let mut details = json!({
        "data": spec.path,
        "x": spec.column_x.to_string(),
        "y": spec.column_y.to_string(),
        "skipped_rows": sample.skipped,
        "filtered_rows": sample.filtered_out,
        "resolution": a.resolution,
    });
    let h = match a.bandwidth {
        Some(h) => {
            manifest.method = "fixed".into();
            h
        }
        None if a.method == Method::RuleOfThumb => {
            let tau = sample_kendall_tau(&sample.x, &sample.y);
            let s = rule_of_thumb(n, a.kernel, tau)?;
            manifest.method = s.method.name().into();
            details["reference"] = serde_json::to_value(s.diagnostics.reference)?;
            s.h
        }
        None => {
            let grid = a.grid.grid()?;
            let crit = criterion(a.method, a.kernel, a.cv_copies)?;
            let s = minimize_criterion(&pseudo, crit, &grid)?;
            if s.diagnostics.boundary_minimum {
                log::warn!(
                    "criterion minimum at the edge of the bandwidth grid (h = {})",
                    s.h
                );
            }
            s.write_curve_csv(std::fs::File::create(a.out.join("curve.csv")).map_err(
                |source| Error::Io {
                    path: a.out.join("curve.csv"),
                    source,
                },
            )?)?;
            manifest.method = s.method.name().into();
            manifest.grid = Some(GridBounds {
                min: s.diagnostics.grid_min,
                max: s.diagnostics.grid_max,
                len: s.diagnostics.grid_len,
            });
            manifest.boundary_minimum = Some(s.diagnostics.boundary_minimum);
            if a.method == Method::LscvFull {
                details["cv_copies"] = json!(a.cv_copies.name());
            }
            s.h
        }
    };
    let est = MirrorEstimator::new(&pseudo, EstimatorConfig::mirror(h, a.kernel)?);
    let grid = est.grid(a.resolution)?;
    save_pseudo_csv(&pseudo, &a.out.join("pseudo.csv"))?;
    save_grid_csv(&grid, &a.out.join("grid.csv"))?;
    manifest.n = n;
    manifest.h = Some(h);
    manifest.kernel = a.kernel.name().into();
    manifest.scaling = a.data.scaling.name().into();
    manifest.seed = seed;
    manifest.details = details;
    manifest.save(&a.out.join("manifest.json"))?;
    println!("n = {n}, h = {h}, method = {}", manifest.method);
    Ok(())
}

fn cmd_curve(a: &CurveArgs) -> Result<()> {
    let sample = load_csv(&a.data.spec()?)?;
    let pseudo = ecdf_transform(&sample.x, &sample.y, a.data.scaling)?;
    bandwidth::check_not_degenerate(&pseudo)?;
    let crit = criterion(a.method, a.kernel, a.cv_copies)?;
    let mirror = MirrorSet::new(&pseudo);
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["h", "criterion"])?;
    for h in a.grid.grid()? {
        let s = crit.evaluate(&pseudo, &mirror, h)?;
        w.write_record([format!("{h:.16e}"), format!("{s:.16e}")])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    Ok(())
}

/// Returns whether any cell had failing replications.
fn cmd_simulate(a: &SimulateArgs) -> Result<bool> {
    let seed = a.seed.unwrap_or_else(rand::random);
    let mut plan = ExperimentPlan::frank_default(seed);
    plan.n_list = a.n.clone();
    plan.replications = a.reps;
    plan.truth = FrankCopula::new(a.theta)?;
    plan.methods = a.methods.clone();
    plan.scaling = a.scaling;
    plan.lscv = Criterion::LscvFull {
        kernel: plan.kernel,
        copies: a.cv_copies,
    };
    plan.validate()?;
    ensure_dir(&a.out)?;
    let table = run_experiment(&plan)?;
    table.save(&a.out.join("table.csv"), &a.out.join("table.json"))?;
    let mut manifest = Manifest::new("simulate");
    manifest.method = a
        .methods
        .iter()
        .map(|m| m.name())
        .collect::<Vec<_>>()
        .join(",");
    manifest.kernel = plan.kernel.name().into();
    manifest.scaling = plan.scaling.name().into();
    manifest.seed = seed;
    manifest.grid = Some(GridBounds {
        min: plan.h_grid[0],
        max: plan.h_grid[plan.h_grid.len() - 1],
        len: plan.h_grid.len(),
    });
    manifest.details = json!({
        "n": plan.n_list,
        "reps": plan.replications,
        "theta": a.theta,
        "cv_copies": a.cv_copies.name(),
        "ise_quadrature_nodes": plan.quadrature.resolution(),
    });
    manifest.save(&a.out.join("manifest.json"))?;
    for r in &table.rows {
        println!(
            "{:<14} n={:<5} bw={:.4} (se {:.4})  ISE={:.4} (se {:.4})  reps={} failed={}",
            r.method, r.n, r.mean_bw, r.se_bw, r.mean_ise, r.se_ise, r.reps, r.failures
        );
    }
    Ok(table.has_failures())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a).map(|_| false),
        Command::LscvCurve(a) => cmd_curve(a).map(|_| false),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: some replications failed; see the result table");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
