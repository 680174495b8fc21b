//! Bandwidth selectors: AMISE rule of thumb with a Frank reference,
//! least-squares cross-validation in two forms, and biased cross-validation.
//!
//! Data-driven criteria are minimized by exhaustive search over a grid; the
//! full score curve is kept so that the choice can be inspected.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gaussian_derivative, Kernel};
use crate::metrics::roughness_chat;
use crate::reference::{beta_functional, invert_kendall_tau, CurvatureBeta, FrankCopula};
use crate::transform::{MirrorSet, PseudoSample, COPIES};

/// Largest bandwidth the rule of thumb will return.
pub const MAX_BANDWIDTH: f64 = 0.5;

/// Grid resolution (intervals per axis) for the curvature functional.
pub const BETA_RESOLUTION: usize = 400;

/// `(n h^2)^-1 R(K)^2 + h^4 mu_2(K)^2 β / 4`.
pub fn amise(h: f64, n: usize, kernel: Kernel, beta: f64) -> f64 {
    let k = kernel.constants();
    k.roughness.powi(2) / (n as f64 * h * h) + h.powi(4) * k.mu2.powi(2) * beta / 4.0
}

/// Minimizer of [`amise`]: `[2 R(K)^2 / (n mu_2^2 β)]^(1/6)`.
pub fn amise_optimal_bandwidth(n: usize, kernel: Kernel, beta: f64) -> f64 {
    let k = kernel.constants();
    (2.0 * k.roughness.powi(2) / (n as f64 * k.mu2.powi(2) * beta)).powf(1.0 / 6.0)
}

/// Which mirror copies enter the cross-validation sum of [`lscv_full`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvCopies {
    /// Every one of the nine copies of each point, as the criterion is usually
    /// written; copies outside the square see the raw kernel sum.
    #[default]
    All,
    /// The original point only.
    Original,
}

impl CvCopies {
    pub fn name(self) -> &'static str {
        match self {
            CvCopies::All => "all",
            CvCopies::Original => "original",
        }
    }

    fn count(self) -> usize {
        match self {
            CvCopies::All => COPIES,
            CvCopies::Original => 1,
        }
    }
}

impl FromStr for CvCopies {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(CvCopies::All),
            "original" => Ok(CvCopies::Original),
            other => Err(Error::InvalidArgument(format!(
                "unknown copy set '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RuleOfThumb,
    LscvFull,
    LscvGamma,
    Bcv,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RuleOfThumb => "rule_of_thumb",
            Method::LscvFull => "lscv_full",
            Method::LscvGamma => "lscv_gamma",
            Method::Bcv => "bcv",
        }
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
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rule_of_thumb" | "rot" => Ok(Method::RuleOfThumb),
            "lscv_full" | "lscv" => Ok(Method::LscvFull),
            "lscv_gamma" => Ok(Method::LscvGamma),
            "bcv" => Ok(Method::Bcv),
            other => Err(Error::InvalidArgument(format!(
                "unknown bandwidth method '{other}'"
            ))),
        }
    }
}

/// A data-driven criterion, fully specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    LscvFull { kernel: Kernel, copies: CvCopies },
    LscvGamma { kernel: Kernel },
    Bcv,
}

impl Criterion {
    pub fn lscv(kernel: Kernel) -> Self {
        Criterion::LscvFull {
            kernel,
            copies: CvCopies::default(),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Criterion::LscvFull { .. } => Method::LscvFull,
            Criterion::LscvGamma { .. } => Method::LscvGamma,
            Criterion::Bcv => Method::Bcv,
        }
    }

    pub fn evaluate(&self, pseudo: &PseudoSample, mirror: &MirrorSet, h: f64) -> Result<f64> {
        match *self {
            Criterion::LscvFull { kernel, copies } => lscv_full_on(mirror, kernel, h, copies),
            Criterion::LscvGamma { kernel } => lscv_gamma(pseudo, kernel, h),
            Criterion::Bcv => bcv_on(mirror, h),
        }
    }
}

/// Reference-model details attached to a rule-of-thumb selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFit {
    pub tau_hat: f64,
    pub theta_hat: f64,
    pub beta: CurvatureBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_len: usize,
    /// The minimum sits on the first or last grid point.
    pub boundary_minimum: bool,
    pub reference: Option<ReferenceFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub h: f64,
    pub method: Method,
    pub score_curve: Vec<(f64, f64)>,
    pub diagnostics: Diagnostics,
}

impl BandwidthSelection {
    /// Score curve as CSV with columns `h,criterion`.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["h", "criterion"])?;
        for &(h, s) in &self.score_curve {
            w.write_record([format!("{h:.17e}"), format!("{s:.17e}")])?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }
}

/// AMISE-optimal bandwidth for a Frank reference copula matched to `tau_hat`.
///
/// Fails with [`Error::DegenerateReference`] when the reference is the
/// independence copula or the resulting bandwidth exceeds [`MAX_BANDWIDTH`].
pub fn rule_of_thumb(n: usize, kernel: Kernel, tau_hat: f64) -> Result<BandwidthSelection> {
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let theta_hat = invert_kendall_tau(tau_hat)?;
    let model = FrankCopula::new(theta_hat)?;
    if model.is_independence() {
        return Err(Error::DegenerateReference { tau: tau_hat });
    }
    let beta = beta_functional(&model, BETA_RESOLUTION)?;
    let h = amise_optimal_bandwidth(n, kernel, beta.beta);
    if !h.is_finite() || h > MAX_BANDWIDTH {
        return Err(Error::DegenerateReference { tau: tau_hat });
    }
    Ok(BandwidthSelection {
        h,
        method: Method::RuleOfThumb,
        score_curve: vec![(h, amise(h, n, kernel, beta.beta))],
        diagnostics: Diagnostics {
            grid_min: h,
            grid_max: h,
            grid_len: 1,
            boundary_minimum: false,
            reference: Some(ReferenceFit {
                tau_hat,
                theta_hat,
                beta,
            }),
        },
    })
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(())
}

/// Least-squares cross-validation with the exact roughness of the estimate:
///
/// `R(ĉ) - 2/n Σ_i Σ_l ĉ_{-i}(U_il, V_il)`
///
/// where `ĉ_{-i}` is the mirror sum over the other `n - 1` points, scaled by
/// `1/(n - 1)`, and `l` runs over the copies selected by `copies`.
pub fn lscv_full(pseudo: &PseudoSample, kernel: Kernel, h: f64, copies: CvCopies) -> Result<f64> {
    lscv_full_on(&MirrorSet::new(pseudo), kernel, h, copies)
}

pub fn lscv_full_on(mirror: &MirrorSet, kernel: Kernel, h: f64, copies: CvCopies) -> Result<f64> {
    check_h(h)?;
    let n = mirror.source_len();
    if n < 3 {
        return Err(Error::SampleTooSmall { needed: 3, got: n });
    }
    let rough = roughness_chat(mirror, kernel, h)?;
    let cross = leave_one_out_sum(mirror, kernel, h, copies.count());
    Ok(rough - 2.0 * cross / n as f64)
}

/// `Σ_i Σ_{l < copies} ĉ_{-i}(U_il, V_il)`.
fn leave_one_out_sum(mirror: &MirrorSet, kernel: Kernel, h: f64, copies: usize) -> f64 {
    let n = mirror.source_len();
    let reach = kernel.support_radius() * h;
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for l in 0..copies {
                let (u, v) = mirror.copy(i, l);
                mirror.for_each_near(u, v, reach, |a, b, src| {
                    if src != i {
                        acc += kernel.eval((u - a) / h) * kernel.eval((v - b) / h);
                    }
                });
            }
            acc
        })
        .collect();
    partial.iter().sum::<f64>() / ((n - 1) as f64 * h * h)
}

/// `γ(τ1, τ2) = (K*K)(τ1) (K*K)(τ2) - 2 K(τ1) K(τ2)`.
pub fn gamma(kernel: Kernel, t1: f64, t2: f64) -> f64 {
    kernel.self_convolution(t1) * kernel.self_convolution(t2)
        - 2.0 * kernel.eval(t1) * kernel.eval(t2)
}

/// Pairwise form without reflection:
///
/// `R(K)^2/(n h^2) + 2/(n^2 h^2) Σ_{i<j} γ((U_i - U_j)/h, (V_i - V_j)/h)`.
pub fn lscv_gamma(pseudo: &PseudoSample, kernel: Kernel, h: f64) -> Result<f64> {
    check_h(h)?;
    let n = pseudo.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let (first, pairs) = lscv_gamma_terms(pseudo, kernel, h);
    Ok(first + pairs)
}

/// The two terms of [`lscv_gamma`] separately: `(R(K)^2/(n h^2), pair sum)`.
pub fn lscv_gamma_terms(pseudo: &PseudoSample, kernel: Kernel, h: f64) -> (f64, f64) {
    let n = pseudo.len();
    let nf = n as f64;
    let first = kernel.roughness().powi(2) / (nf * h * h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pseudo.u()[a].total_cmp(&pseudo.u()[b]));
    let u: Vec<f64> = order.iter().map(|&k| pseudo.u()[k]).collect();
    let v: Vec<f64> = order.iter().map(|&k| pseudo.v()[k]).collect();
    let reach = kernel.convolution_radius();
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in (i + 1)..n {
                let t1 = (u[j] - u[i]) / h;
                if t1 >= reach {
                    break;
                }
                let t2 = (v[j] - v[i]) / h;
                if t2.abs() < reach {
                    acc += gamma(kernel, t1, t2);
                }
            }
            acc
        })
        .collect();
    let sum: f64 = partial.iter().sum();
    (first, 2.0 * sum / (nf * nf * h * h))
}

/// Leave-one-out plug-ins `(P_uuuu, P_vvvv, P_uuvv)` of the fourth-order
/// curvature functionals, Gaussian kernel over the mirror set.
pub fn bcv_plugins(mirror: &MirrorSet, h: f64) -> (f64, f64, f64) {
    let n = mirror.source_len();
    let reach = Kernel::Gaussian.support_radius() * h;
    let partial: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (u, v) = mirror.copy(i, 0);
            let mut acc = (0.0, 0.0, 0.0);
            mirror.for_each_near(u, v, reach, |a, b, src| {
                if src == i {
                    return;
                }
                let x = (u - a) / h;
                let y = (v - b) / h;
                let (p0x, p2x, p4x) = (
                    gaussian_derivative(x, 0),
                    gaussian_derivative(x, 2),
                    gaussian_derivative(x, 4),
                );
                let (p0y, p2y, p4y) = (
                    gaussian_derivative(y, 0),
                    gaussian_derivative(y, 2),
                    gaussian_derivative(y, 4),
                );
                acc.0 += p4x * p0y;
                acc.1 += p0x * p4y;
                acc.2 += p2x * p2y;
            });
            acc
        })
        .collect();
    let scale = 1.0 / (n as f64 * (n - 1) as f64 * h.powi(6));
    let (a, b, c) = partial
        .iter()
        .fold((0.0, 0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1, s.2 + p.2));
    (a * scale, b * scale, c * scale)
}

/// Biased cross-validation, Gaussian kernel:
///
/// `R(K)^2/(n h^2) + h^4 mu_2^2 / 4 · (P_uuuu + P_vvvv + 2 P_uuvv)`.
pub fn bcv(pseudo: &PseudoSample, h: f64) -> Result<f64> {
    bcv_on(&MirrorSet::new(pseudo), h)
}

pub fn bcv_on(mirror: &MirrorSet, h: f64) -> Result<f64> {
    check_h(h)?;
    let n = mirror.source_len();
    if n < 3 {
        return Err(Error::SampleTooSmall { needed: 3, got: n });
    }
    let (puu, pvv, pcross) = bcv_plugins(mirror, h);
    let k = Kernel::Gaussian.constants();
    let first = k.roughness.powi(2) / (n as f64 * h * h);
    Ok(first + h.powi(4) * k.mu2.powi(2) / 4.0 * (puu + pvv + 2.0 * pcross))
}

/// `len` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, len: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && len >= 2) {
        return Err(Error::InvalidArgument(format!(
            "bad grid [{lo}, {hi}] x {len}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..len)
        .map(|i| {
            if i + 1 == len {
                hi
            } else {
                (a + (b - a) * i as f64 / (len - 1) as f64).exp()
            }
        })
        .collect())
}

/// `lo, lo + step, ...` up to `hi` (inclusive within rounding).
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad grid [{lo}, {hi}] step {step}"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

/// 60 log-spaced bandwidths in `[0.01, MAX_BANDWIDTH]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(0.01, MAX_BANDWIDTH, 60).expect("constant grid")
}

/// Fails if every pseudo-observation sits on the same point.
pub fn check_not_degenerate(pseudo: &PseudoSample) -> Result<()> {
    let (u, v) = (pseudo.u(), pseudo.v());
    if u.is_empty() {
        return Err(Error::SampleTooSmall { needed: 2, got: 0 });
    }
    if u.iter().all(|&x| x == u[0]) && v.iter().all(|&x| x == v[0]) {
        return Err(Error::DegenerateSample(
            "all pseudo-observations coincide; the criterion is flat in h".into(),
        ));
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "bandwidth grid needs >= 10 points, got {}",
            grid.len()
        )));
    }
    if grid[0] <= 0.0 || !grid.iter().all(|h| h.is_finite()) {
        return Err(Error::InvalidArgument(
            "bandwidth grid must be positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "bandwidth grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Global minimizer over a precomputed score curve; ties go to the smaller h.
pub fn argmin_curve(curve: &[(f64, f64)]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &(h, s)) in curve.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite {
                value: s,
                location: format!("criterion at h = {h}"),
            });
        }
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((k, s));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty score curve".into()))
}

/// Evaluate `criterion` on every grid point and return the global minimizer.
pub fn minimize_criterion(
    pseudo: &PseudoSample,
    criterion: Criterion,
    grid: &[f64],
) -> Result<BandwidthSelection> {
    check_grid(grid)?;
    check_not_degenerate(pseudo)?;
    let mirror = MirrorSet::new(pseudo);
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&h| criterion.evaluate(pseudo, &mirror, h))
        .collect::<Result<_>>()?;
    let curve: Vec<(f64, f64)> = grid.iter().copied().zip(scores).collect();
    let (k, _) = argmin_curve(&curve)?;
    Ok(BandwidthSelection {
        h: grid[k],
        method: criterion.method(),
        diagnostics: Diagnostics {
            grid_min: grid[0],
            grid_max: grid[grid.len() - 1],
            grid_len: grid.len(),
            boundary_minimum: k == 0 || k + 1 == grid.len(),
            reference: None,
        },
        score_curve: curve,
    })
}

/// Grid search over an arbitrary criterion function (used for synthetic
/// curves and external criteria).
pub fn minimize_fn<F>(method: Method, grid: &[f64], f: F) -> Result<BandwidthSelection>
where
    F: Fn(f64) -> f64,
{
    check_grid(grid)?;
    let curve: Vec<(f64, f64)> = grid.iter().map(|&h| (h, f(h))).collect();
    let (k, _) = argmin_curve(&curve)?;
    Ok(BandwidthSelection {
        h: grid[k],
        method,
        diagnostics: Diagnostics {
            grid_min: grid[0],
            grid_max: grid[grid.len() - 1],
            grid_len: grid.len(),
            boundary_minimum: k == 0 || k + 1 == grid.len(),
            reference: None,
        },
        score_curve: curve,
    })
}
