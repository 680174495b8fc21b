//! Quadrature, integrated squared error, and roughness functionals.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::transform::MirrorSet;

/// Adaptive Gauss–Kronrod (7, 15) quadrature of `f` over `[a, b]`.
///
/// Bisects until the Kronrod/Gauss difference on every piece is below its
/// share of `tol`, or a depth of 40 is reached.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, tol);
    }
    let whole = gauss_kronrod(&f, a, b);
    adapt(&f, a, b, whole, tol, 40)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, est: (f64, f64), tol: f64, depth: u32) -> f64 {
    let (kronrod, err) = est;
    if err <= tol || depth == 0 || (b - a) < 1e-15 * (1.0 + a.abs().max(b.abs())) {
        return kronrod;
    }
    let mid = 0.5 * (a + b);
    let left = gauss_kronrod(f, a, mid);
    let right = gauss_kronrod(f, mid, b);
    adapt(f, a, mid, left, 0.5 * tol, depth - 1) + adapt(f, mid, b, right, 0.5 * tol, depth - 1)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        // odd Kronrod nodes are the Gauss nodes
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Tensor-product rule used by [`quad2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    /// Cell midpoints; `resolution` is the number of cells per axis.
    Midpoint,
    /// Composite Simpson; `resolution` is the (odd) number of nodes per axis.
    #[default]
    Simpson,
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Rule::Midpoint),
            "simpson" => Ok(Rule::Simpson),
            other => Err(Error::InvalidArgument(format!("unknown rule `{other}`"))),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Midpoint => "midpoint",
            Rule::Simpson => "simpson",
        })
    }
}

/// Quadrature over the closed unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    resolution: usize,
    rule: Rule,
}

impl QuadratureSpec {
    pub const MIN_RESOLUTION: usize = 32;

    pub fn new(resolution: usize, rule: Rule) -> Result<Self> {
        if resolution < Self::MIN_RESOLUTION {
            return Err(Error::InvalidArgument(format!(
                "quadrature resolution {resolution} < {}",
                Self::MIN_RESOLUTION
            )));
        }
        if rule == Rule::Simpson && resolution.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "simpson needs an odd node count, got {resolution}"
            )));
        }
        Ok(Self { resolution, rule })
    }

    pub fn simpson(nodes: usize) -> Result<Self> {
        Self::new(nodes, Rule::Simpson)
    }

    pub fn midpoint(cells: usize) -> Result<Self> {
        Self::new(cells, Rule::Midpoint)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    /// Nodes and weights along one axis of `[0, 1]`.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        axis_rule(self.rule, self.resolution, 0.0, 1.0)
    }
}

/// One-dimensional nodes and weights on `[a, b]`.
pub(crate) fn axis_rule(rule: Rule, resolution: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    match rule {
        Rule::Midpoint => {
            let step = (b - a) / resolution as f64;
            let x = (0..resolution)
                .map(|i| a + (i as f64 + 0.5) * step)
                .collect();
            (x, vec![step; resolution])
        }
        Rule::Simpson => {
            let m = resolution;
            let step = (b - a) / (m - 1) as f64;
            let x = (0..m)
                .map(|i| if i == m - 1 { b } else { a + i as f64 * step })
                .collect();
            let w = (0..m)
                .map(|i| {
                    let c = if i == 0 || i == m - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    c * step / 3.0
                })
                .collect();
            (x, w)
        }
    }
}

/// Tensor-product quadrature of `f` over the unit square.
///
/// Rows are evaluated in parallel and reduced in row order, so the result does
/// not depend on the number of worker threads.
pub fn quad2d<F>(f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let (x, w) = spec.nodes();
    let rows: Vec<Result<f64>> = x
        .par_iter()
        .zip(w.par_iter())
        .map(|(&u, &wu)| {
            let mut acc = 0.0;
            for (&v, &wv) in x.iter().zip(&w) {
                let val = f(u, v);
                if !val.is_finite() {
                    return Err(Error::NonFinite {
                        value: val,
                        location: format!("quadrature node ({u}, {v})"),
                    });
                }
                acc += wv * val;
            }
            Ok(wu * acc)
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total)
}

/// Integrate values tabulated on the equispaced nodes `i / (m - 1)`.
///
/// `values` is row-major `m x m`; Simpson needs `m` odd, otherwise the
/// trapezoid rule is used.
pub fn integrate_grid(values: &[f64], m: usize) -> Result<f64> {
    if m < 2 || values.len() != m * m {
        return Err(Error::InvalidArgument(format!(
            "grid of {} values is not {m} x {m}",
            values.len()
        )));
    }
    let rule = if m % 2 == 1 && m >= 3 {
        Rule::Simpson
    } else {
        Rule::Midpoint
    };
    let w: Vec<f64> = match rule {
        Rule::Simpson => axis_rule(Rule::Simpson, m, 0.0, 1.0).1,
        Rule::Midpoint => {
            let step = 1.0 / (m - 1) as f64;
            (0..m)
                .map(|i| {
                    if i == 0 || i == m - 1 {
                        0.5 * step
                    } else {
                        step
                    }
                })
                .collect()
        }
    };
    let mut total = 0.0;
    for (i, row) in values.chunks_exact(m).enumerate() {
        let mut acc = 0.0;
        for (j, &val) in row.iter().enumerate() {
            if !val.is_finite() {
                return Err(Error::NonFinite {
                    value: val,
                    location: format!("grid node ({i}, {j})"),
                });
            }
            acc += w[j] * val;
        }
        total += w[i] * acc;
    }
    Ok(total)
}

/// Integrated squared error `∬ (estimate - truth)^2` over the unit square.
pub fn ise<E, T>(estimate: E, truth: T, spec: &QuadratureSpec) -> Result<f64>
where
    E: Fn(f64, f64) -> f64 + Sync,
    T: Fn(f64, f64) -> f64 + Sync,
{
    quad2d(
        |u, v| {
            let d = estimate(u, v) - truth(u, v);
            d * d
        },
        spec,
    )
}

/// ISE of a tabulated grid against `truth` evaluated at the same nodes.
pub fn ise_grid<T>(values: &[f64], m: usize, truth: T) -> Result<f64>
where
    T: Fn(f64, f64) -> f64,
{
    if values.len() != m * m {
        return Err(Error::InvalidArgument("grid size mismatch".into()));
    }
    let step = 1.0 / (m - 1) as f64;
    let sq: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let (i, j) = (k / m, k % m);
            let d = c - truth(i as f64 * step, j as f64 * step);
            d * d
        })
        .collect();
    integrate_grid(&sq, m)
}

/// `R(c) = ∬ c^2` by quadrature.
pub fn roughness_true<F>(density: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    quad2d(
        |u, v| {
            let c = density(u, v);
            c * c
        },
        spec,
    )
}

/// Roughness `∬_{[0,1]^2} ĉ^2` of the mirror-reflection estimate.
///
/// For `h <= 1/2` the estimate restricted to the square is reflection
/// symmetric where it matters, which turns the square integral into a
/// whole-plane integral against the unreflected sum:
///
/// `R(ĉ) = 1/(n^2 h^2) Σ_i Σ_(j,m) (K*K)((U_i - U_jm)/h) (K*K)((V_i - V_jm)/h)`
///
/// with `i` over source points and `(j, m)` over the full mirror set. For
/// `h > 1/2` the truncated one-dimensional integrals are evaluated exactly
/// per pair instead.
pub fn roughness_chat(mirror: &MirrorSet, kernel: Kernel, h: f64) -> Result<f64> {
    check_compact(kernel, h)?;
    if h > 0.5 {
        return Ok(roughness_chat_truncated(mirror, kernel, h));
    }
    let n = mirror.source_len();
    let reach = kernel.convolution_radius() * h;
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (u, v) = mirror.copy(i, 0);
            let mut acc = 0.0;
            mirror.for_each_near(u, v, reach, |a, b, _| {
                acc += kernel.self_convolution((u - a) / h) * kernel.self_convolution((v - b) / h);
            });
            acc
        })
        .collect();
    let total: f64 = partial.iter().sum();
    Ok(total / ((n * n) as f64 * h * h))
}

/// Whole-plane roughness of the nine-fold mirror sum, summing every pair of
/// the `9n` points. This integrates outside the unit square and is roughly
/// nine times [`roughness_chat`]; kept for comparison.
pub fn roughness_mirror_plane(mirror: &MirrorSet, kernel: Kernel, h: f64) -> Result<f64> {
    check_compact(kernel, h)?;
    let n = mirror.source_len();
    let reach = kernel.convolution_radius() * h;
    let partial: Vec<f64> = (0..mirror.len())
        .into_par_iter()
        .map(|k| {
            let (u, v) = mirror.point(k);
            let mut acc = 0.0;
            mirror.for_each_near(u, v, reach, |a, b, _| {
                acc += kernel.self_convolution((u - a) / h) * kernel.self_convolution((v - b) / h);
            });
            acc
        })
        .collect();
    let total: f64 = partial.iter().sum();
    Ok(total / ((n * n) as f64 * h * h))
}

fn check_compact(kernel: Kernel, h: f64) -> Result<()> {
    if !kernel.is_compact() {
        return Err(Error::InvalidArgument(
            "closed-form roughness needs a compactly supported kernel".into(),
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(())
}

/// `∫_0^1 K((x - a)/h) K((x - b)/h) dx`, exact for polynomial kernels.
fn truncated_product(kernel: Kernel, a: f64, b: f64, h: f64) -> f64 {
    let lo = (a - h).max(b - h).max(0.0);
    let hi = (a + h).min(b + h).min(1.0);
    if lo >= hi {
        return 0.0;
    }
    // the integrand is a polynomial of degree <= 4 on [lo, hi]; 3-point
    // Gauss–Legendre is exact up to degree 5
    const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (x, w) in X.iter().zip(W) {
        let t = c + r * x;
        acc += w * kernel.eval((t - a) / h) * kernel.eval((t - b) / h);
    }
    acc * r
}

fn roughness_chat_truncated(mirror: &MirrorSet, kernel: Kernel, h: f64) -> f64 {
    let n = mirror.source_len();
    // only copies whose kernel reaches into the square contribute
    let live: Vec<(f64, f64)> = mirror
        .points()
        .filter(|&(a, b)| a > -h && a < 1.0 + h && b > -h && b < 1.0 + h)
        .collect();
    let partial: Vec<f64> = live
        .par_iter()
        .map(|&(a, b)| {
            live.iter()
                .map(|&(c, d)| {
                    truncated_product(kernel, a, c, h) * truncated_product(kernel, b, d, h)
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = partial.iter().sum();
    total / ((n * n) as f64 * h.powi(4))
}
