//! Seeded Monte Carlo experiments: bandwidth/ISE tables against a Frank
//! truth, pointwise bias and variance probes, and the mean of the pairwise
//! LSCV criterion.
//!
//! Every replication draws its own sample from a seed derived from
//! `(plan seed, n, replication)`, so any cell can be regenerated alone and
//! results do not depend on the number of worker threads.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{self, amise, default_grid, minimize_criterion, rule_of_thumb, Criterion};
use crate::error::{Error, Result};
use crate::estimator::{mirror_kde_at, naive_kde_at, EstimatorConfig, MirrorEstimator};
use crate::kernels::Kernel;
use crate::metrics::{ise, roughness_true, QuadratureSpec};
use crate::reference::{beta_functional, sample_kendall_tau, FrankCopula};
use crate::transform::{ecdf_transform, MirrorSet, PseudoSample, Scaling};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed shared by all replications of sample size `n`.
pub fn cell_seed(seed: u64, n: usize) -> u64 {
    mix(seed ^ mix(n as u64))
}

/// Seed of replication `rep` within a cell.
pub fn replication_seed(cell: u64, rep: usize) -> u64 {
    mix(cell.wrapping_add(rep as u64))
}

/// Bandwidth selectors compared in a table run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    RuleOfThumb,
    Lscv,
}

impl PlanMethod {
    pub fn name(self) -> &'static str {
        match self {
            PlanMethod::RuleOfThumb => "rule_of_thumb",
            PlanMethod::Lscv => "lscv",
        }
    }
}

impl std::str::FromStr for PlanMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rule_of_thumb" | "rot" => Ok(PlanMethod::RuleOfThumb),
            "lscv" => Ok(PlanMethod::Lscv),
            other => Err(Error::InvalidArgument(format!(
                "unknown simulation method '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<PlanMethod>,
    pub truth: FrankCopula,
    pub kernel: Kernel,
    pub scaling: Scaling,
    pub h_grid: Vec<f64>,
    pub lscv: Criterion,
    pub quadrature: QuadratureSpec,
}

impl ExperimentPlan {
    /// Sample sizes 100, 200, 500, 1000; Frank(5); 100 replications; both
    /// selectors; ISE on a 201-node Simpson grid.
    pub fn frank_default(seed: u64) -> Self {
        Self {
            n_list: vec![100, 200, 500, 1000],
            replications: 100,
            seed,
            methods: vec![PlanMethod::RuleOfThumb, PlanMethod::Lscv],
            truth: FrankCopula::new(5.0).expect("finite"),
            kernel: Kernel::Epanechnikov,
            scaling: Scaling::default(),
            h_grid: default_grid(),
            lscv: Criterion::lscv(Kernel::Epanechnikov),
            quadrature: QuadratureSpec::simpson(201).expect("valid"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be >= 1".into()));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 3) {
            return Err(Error::InvalidArgument(
                "every sample size must be >= 3".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        Ok(())
    }
}

/// One `(method, n)` cell of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub n: usize,
    pub mean_bw: f64,
    pub se_bw: f64,
    pub mean_ise: f64,
    pub se_ise: f64,
    /// Successful replications.
    pub reps: usize,
    pub failures: usize,
    pub seed_base: u64,
    /// Rule-of-thumb bandwidth from the true parameter (rule-of-thumb rows).
    pub reference_bw: Option<f64>,
    /// First failure message, if any replication failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub theta: f64,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.failures > 0)
    }

    pub fn row(&self, method: PlanMethod, n: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method.name() && r.n == n)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method",
            "n",
            "mean_bw",
            "se_bw",
            "mean_ise",
            "se_ise",
            "reps",
            "failures",
            "seed_base",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.n.to_string(),
                fmt17(r.mean_bw),
                fmt17(r.se_bw),
                fmt17(r.mean_ise),
                fmt17(r.se_ise),
                r.reps.to_string(),
                r.failures.to_string(),
                r.seed_base.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let io = |path: &Path| {
            let p = path.to_path_buf();
            move |source| Error::Io { path: p, source }
        };
        self.write_csv(std::fs::File::create(csv_path).map_err(io(csv_path))?)?;
        self.write_json(std::fs::File::create(json_path).map_err(io(json_path))?)
    }
}

pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn pseudo_sample(
    truth: &FrankCopula,
    n: usize,
    seed: u64,
    scaling: Scaling,
) -> Result<(Vec<(f64, f64)>, PseudoSample)> {
    let raw = truth.sample(n, seed);
    let (x, y): (Vec<f64>, Vec<f64>) = raw.iter().copied().unzip();
    let pseudo = ecdf_transform(&x, &y, scaling)?;
    Ok((raw, pseudo))
}

/// Selected bandwidth and ISE for one replication.
pub fn run_replication(
    plan: &ExperimentPlan,
    method: PlanMethod,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (raw, pseudo) = pseudo_sample(&plan.truth, n, seed, plan.scaling)?;
    let h = match method {
        PlanMethod::RuleOfThumb => {
            let (x, y): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
            rule_of_thumb(n, plan.kernel, sample_kendall_tau(&x, &y))?.h
        }
        PlanMethod::Lscv => minimize_criterion(&pseudo, plan.lscv, &plan.h_grid)?.h,
    };
    let est = MirrorEstimator::new(&pseudo, EstimatorConfig::mirror(h, plan.kernel)?);
    let truth = plan.truth;
    let e = ise(
        |u, v| est.eval(u, v),
        |u, v| truth.density(u, v),
        &plan.quadrature,
    )?;
    Ok((h, e))
}

/// Run every `(method, n)` cell. A failing replication is counted in its
/// row and does not stop the table.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let mut rows = Vec::new();
    for &method in &plan.methods {
        for &n in &plan.n_list {
            let base = cell_seed(plan.seed, n);
            let outcomes: Vec<Result<(f64, f64)>> = (0..plan.replications)
                .into_par_iter()
                .map(|rep| run_replication(plan, method, n, replication_seed(base, rep)))
                .collect();
            let mut bws = Vec::new();
            let mut ises = Vec::new();
            let mut error = None;
            for o in outcomes {
                match o {
                    Ok((h, e)) => {
                        bws.push(h);
                        ises.push(e);
                    }
                    Err(err) => {
                        error.get_or_insert_with(|| err.to_string());
                    }
                }
            }
            let (mean_bw, se_bw) = mean_se(&bws);
            let (mean_ise, se_ise) = mean_se(&ises);
            let reference_bw = match method {
                PlanMethod::RuleOfThumb => rule_of_thumb(n, plan.kernel, plan.truth.kendall_tau())
                    .ok()
                    .map(|s| s.h),
                PlanMethod::Lscv => None,
            };
            if let Some(e) = &error {
                log::warn!(
                    "{} n={n}: {} of {} replications failed: {e}",
                    method.name(),
                    plan.replications - bws.len(),
                    plan.replications
                );
            }
            rows.push(ResultRow {
                method: method.name().to_string(),
                n,
                mean_bw,
                se_bw,
                mean_ise,
                se_ise,
                reps: bws.len(),
                failures: plan.replications - bws.len(),
                seed_base: base,
                reference_bw,
                error,
            });
        }
    }
    Ok(ResultTable {
        theta: plan.truth.theta(),
        seed: plan.seed,
        rows,
    })
}

/// Monte Carlo bias and variance of the estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub h: f64,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    /// Standard error of `bias`.
    pub se: f64,
}

/// For each `h`, the mean, bias and variance of `ĉ(point)` over
/// `replications` samples of size `n`. All bandwidths share the same samples.
pub fn bias_probe(
    truth: &FrankCopula,
    point: (f64, f64),
    h_list: &[f64],
    n: usize,
    replications: usize,
    seed: u64,
    kernel: Kernel,
) -> Result<Vec<BiasPoint>> {
    pointwise_probe(truth, point, h_list, n, replications, seed, kernel, false)
}

/// [`bias_probe`] for the unreflected estimator.
pub fn naive_bias_probe(
    truth: &FrankCopula,
    point: (f64, f64),
    h_list: &[f64],
    n: usize,
    replications: usize,
    seed: u64,
    kernel: Kernel,
) -> Result<Vec<BiasPoint>> {
    pointwise_probe(truth, point, h_list, n, replications, seed, kernel, true)
}

#[allow(clippy::too_many_arguments)]
fn pointwise_probe(
    truth: &FrankCopula,
    point: (f64, f64),
    h_list: &[f64],
    n: usize,
    replications: usize,
    seed: u64,
    kernel: Kernel,
    naive: bool,
) -> Result<Vec<BiasPoint>> {
    let (u, v) = point;
    if !((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument(format!(
            "probe point ({u}, {v}) outside the unit square"
        )));
    }
    if replications < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 replications".into(),
        ));
    }
    for &h in h_list {
        EstimatorConfig::mirror(h, kernel)?;
    }
    let base = cell_seed(seed, n);
    let values: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let (_, pseudo) =
                pseudo_sample(truth, n, replication_seed(base, rep), Scaling::default())?;
            if naive {
                Ok(h_list
                    .iter()
                    .map(|&h| naive_kde_at(&pseudo, kernel, h, u, v))
                    .collect())
            } else {
                let m = MirrorSet::new(&pseudo);
                Ok(h_list
                    .iter()
                    .map(|&h| mirror_kde_at(&m, kernel, h, u, v))
                    .collect())
            }
        })
        .collect::<Result<_>>()?;
    let c = truth.density(u, v);
    Ok(h_list
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let xs: Vec<f64> = values.iter().map(|row| row[k]).collect();
            let (mean, se) = mean_se(&xs);
            let variance = se * se * replications as f64;
            BiasPoint {
                h,
                mean,
                bias: mean - c,
                variance,
                se,
            }
        })
        .collect())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|a| a.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|a| a.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Outcome of comparing the mean pairwise LSCV criterion with AMISE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LscvExpectation {
    pub mean_criterion: f64,
    pub se_criterion: f64,
    pub amise: f64,
    pub roughness: f64,
    /// `|mean + R(c) - AMISE| / AMISE`.
    pub relative_gap: f64,
}

/// Mean of [`bandwidth::lscv_gamma`] at fixed `h` over seeded samples,
/// compared against `AMISE(h) - R(c)`.
pub fn lscv_expectation_probe(
    truth: &FrankCopula,
    n: usize,
    h: f64,
    replications: usize,
    seed: u64,
    kernel: Kernel,
) -> Result<LscvExpectation> {
    if replications < 100 {
        return Err(Error::InvalidArgument(format!(
            "need >= 100 replications, got {replications}"
        )));
    }
    let base = cell_seed(seed, n);
    let values: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let (_, pseudo) =
                pseudo_sample(truth, n, replication_seed(base, rep), Scaling::default())?;
            bandwidth::lscv_gamma(&pseudo, kernel, h)
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_se(&values);
    let beta = beta_functional(truth, bandwidth::BETA_RESOLUTION)?.beta;
    let a = amise(h, n, kernel, beta);
    let t = *truth;
    let r = roughness_true(|u, v| t.density(u, v), &QuadratureSpec::simpson(401)?)?;
    Ok(LscvExpectation {
        mean_criterion: mean,
        se_criterion: se,
        amise: a,
        roughness: r,
        relative_gap: ((mean + r - a) / a).abs(),
    })
}

/// Mean absolute error of mirror and naive estimates at the four corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerErrors {
    pub corner: (f64, f64),
    pub mirror_mae: f64,
    pub naive_mae: f64,
}

pub fn corner_probe(
    truth: &FrankCopula,
    n: usize,
    h: f64,
    replications: usize,
    seed: u64,
    kernel: Kernel,
) -> Result<Vec<CornerErrors>> {
    const CORNERS: [(f64, f64); 4] = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
    EstimatorConfig::mirror(h, kernel)?;
    let base = cell_seed(seed, n);
    let errs: Vec<[(f64, f64); 4]> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let (_, pseudo) =
                pseudo_sample(truth, n, replication_seed(base, rep), Scaling::default())?;
            let m = MirrorSet::new(&pseudo);
            let mut out = [(0.0, 0.0); 4];
            for (k, &(u, v)) in CORNERS.iter().enumerate() {
                let c = truth.density(u, v);
                out[k] = (
                    (mirror_kde_at(&m, kernel, h, u, v) - c).abs(),
                    (naive_kde_at(&pseudo, kernel, h, u, v) - c).abs(),
                );
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let r = replications as f64;
    Ok(CORNERS
        .iter()
        .enumerate()
        .map(|(k, &corner)| CornerErrors {
            corner,
            mirror_mae: errs.iter().map(|e| e[k].0).sum::<f64>() / r,
            naive_mae: errs.iter().map(|e| e[k].1).sum::<f64>() / r,
        })
        .collect())
}
