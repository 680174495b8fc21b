//! Frank copula: the parametric reference family behind the rule-of-thumb
//! bandwidth and the simulation studies.
//!
//! With `a = e^{-θu}`, `b = e^{-θv}` and `k = 1 - e^{-θ}`,
//!
//! ```text
//! c(u, v) = θ k a b / D²,   D = k - (1 - a)(1 - b)
//! ```
//!
//! Negative parameters are handled through `c(u, v; -θ) = c(u, 1 - v; θ)`,
//! so the closed forms only ever see `θ > 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{axis_rule, integrate, Rule};

/// Below this `|θ|` the family is treated as the independence copula.
pub const INDEPENDENCE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrankCopula {
    theta: f64,
}

/// `β = ∬ (c_uu + c_vv)^2` together with the grid that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBeta {
    pub beta: f64,
    pub quadrature_resolution: usize,
}

impl FrankCopula {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite {
                value: theta,
                location: "Frank parameter".into(),
            });
        }
        Ok(Self { theta })
    }

    /// The copula whose Kendall's tau equals `tau`.
    pub fn from_kendall_tau(tau: f64) -> Result<Self> {
        Self::new(invert_kendall_tau(tau)?)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_independence(&self) -> bool {
        self.theta.abs() < INDEPENDENCE_EPS
    }

    /// Map to a positive parameter, reflecting `v` when `θ < 0`.
    #[inline]
    fn canonical(&self, v: f64) -> (f64, f64) {
        if self.theta < 0.0 {
            (-self.theta, 1.0 - v)
        } else {
            (self.theta, v)
        }
    }

    pub fn density(&self, u: f64, v: f64) -> f64 {
        if self.is_independence() {
            return 1.0;
        }
        let (t, v) = self.canonical(v);
        let a = (-t * u).exp();
        let b = (-t * v).exp();
        let k = -(-t).exp_m1();
        let d = k - (1.0 - a) * (1.0 - b);
        t * k * a * b / (d * d)
    }

    /// Density that rejects non-finite or out-of-square arguments.
    pub fn try_density(&self, u: f64, v: f64) -> Result<f64> {
        for (x, name) in [(u, "u"), (v, "v")] {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    value: x,
                    location: format!("Frank density argument {name}"),
                });
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {x} outside [0, 1]"
                )));
            }
        }
        Ok(self.density(u, v))
    }

    /// `C(u, v) = -1/θ · ln(1 + (e^{-θu} - 1)(e^{-θv} - 1) / (e^{-θ} - 1))`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        if self.is_independence() {
            return u * v;
        }
        let t = self.theta;
        let num = (-t * u).exp_m1() * (-t * v).exp_m1();
        -(num / (-t).exp_m1()).ln_1p() / t
    }

    /// `P(V <= v | U = u)`.
    pub fn conditional_cdf(&self, v: f64, u: f64) -> f64 {
        if self.is_independence() {
            return v;
        }
        let t = self.theta;
        let a = (-t * u).exp();
        let bm1 = (-t * v).exp_m1();
        a * bm1 / ((-t).exp_m1() + (a - 1.0) * bm1)
    }

    /// Inverse of [`conditional_cdf`](Self::conditional_cdf) in `v`.
    pub fn conditional_quantile(&self, w: f64, u: f64) -> f64 {
        if self.is_independence() {
            return w;
        }
        let t = self.theta;
        let a = (-t * u).exp();
        let s = w * (-t).exp_m1() / (w + (1.0 - w) * a);
        (-s.ln_1p() / t).clamp(0.0, 1.0)
    }

    /// Analytic `(c_uu, c_vv)`.
    pub fn second_partials(&self, u: f64, v: f64) -> (f64, f64) {
        if self.is_independence() {
            return (0.0, 0.0);
        }
        let (t, vv) = self.canonical(v);
        let a = (-t * u).exp();
        let b = (-t * vv).exp();
        let k = -(-t).exp_m1();
        let d = k - (1.0 - a) * (1.0 - b);
        let c = t * k * a * b / (d * d);
        // c_xx = c (θ² + 4θ g + 6 g² - 2 g2) with g = D_x / D, g2 = D_xx / D
        let along = |own: f64, other: f64| {
            let g = -t * own * (1.0 - other) / d;
            let g2 = t * t * own * (1.0 - other) / d;
            c * (t * t + 4.0 * t * g + 6.0 * g * g - 2.0 * g2)
        };
        (along(a, b), along(b, a))
    }

    /// Laplacian `c_uu + c_vv`, the integrand of the curvature functional.
    pub fn laplacian(&self, u: f64, v: f64) -> f64 {
        let (cuu, cvv) = self.second_partials(u, v);
        cuu + cvv
    }

    /// Kendall's tau of this copula.
    pub fn kendall_tau(&self) -> f64 {
        kendall_tau(self.theta)
    }

    /// `n` i.i.d. pairs by conditional inversion; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let w: f64 = rng.gen();
                (u, self.conditional_quantile(w, u))
            })
            .collect()
    }
}

/// `∬ (c_uu + c_vv)^2` over the closed unit square by tensor Simpson.
///
/// The result is accepted only if doubling the grid moves it by less than
/// 0.5%.
pub fn beta_functional(model: &FrankCopula, resolution: usize) -> Result<CurvatureBeta> {
    if resolution < 64 {
        return Err(Error::InvalidArgument(format!(
            "beta resolution {resolution} < 64"
        )));
    }
    if model.is_independence() {
        return Ok(CurvatureBeta {
            beta: 0.0,
            quadrature_resolution: resolution,
        });
    }
    let coarse = beta_on_grid(model, resolution);
    let fine = beta_on_grid(model, 2 * resolution);
    if !(fine.is_finite() && coarse.is_finite()) {
        return Err(Error::NonFinite {
            value: fine,
            location: format!("beta quadrature at theta = {}", model.theta()),
        });
    }
    let change = ((fine - coarse) / fine).abs();
    if change > 5e-3 {
        return Err(Error::NoConvergence(format!(
            "beta changed by {:.3}% when doubling the grid",
            100.0 * change
        )));
    }
    Ok(CurvatureBeta {
        beta: fine,
        quadrature_resolution: 2 * resolution,
    })
}

fn beta_on_grid(model: &FrankCopula, intervals: usize) -> f64 {
    let nodes = intervals + 1 + intervals % 2;
    let (x, w) = axis_rule(Rule::Simpson, nodes, 0.0, 1.0);
    let mut total = 0.0;
    for (&u, &wu) in x.iter().zip(&w) {
        let mut row = 0.0;
        for (&v, &wv) in x.iter().zip(&w) {
            let l = model.laplacian(u, v);
            row += wv * l * l;
        }
        total += wu * row;
    }
    total
}

/// First Debye function `D_1(θ) = 1/θ ∫_0^θ t / (e^t - 1) dt`.
pub fn debye1(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        return 1.0 - theta / 4.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    integrate(integrand, 0.0, theta, 1e-14) / theta
}

/// Kendall's tau of the Frank copula: `1 + 4 (D_1(θ) - 1) / θ`.
pub fn kendall_tau(theta: f64) -> f64 {
    if theta.abs() < INDEPENDENCE_EPS {
        // leading term of the series
        return theta / 9.0;
    }
    1.0 + 4.0 * (debye1(theta) - 1.0) / theta
}

/// Parameter whose Kendall's tau equals `tau`, by bracketing bisection.
///
/// `tau == 0` returns `θ = 0` (independence).
pub fn invert_kendall_tau(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau.abs() >= 1.0 {
        return Err(Error::TauOutOfRange(tau));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let sign = tau.signum();
    let target = tau.abs();
    // tau(θ) is increasing and odd; grow the bracket until it covers target
    let mut hi = 1.0;
    while kendall_tau(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::TauOutOfRange(tau));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kendall_tau(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    if (kendall_tau(theta) - target).abs() > 1e-8 {
        return Err(Error::NoConvergence(format!(
            "tau inversion stalled at theta = {theta}"
        )));
    }
    Ok(sign * theta)
}

/// Sample Kendall's tau-b (tie-corrected), `O(n^2)`.
pub fn sample_kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let s = (concordant - discordant) as f64;
    let denom = (((concordant + discordant + ties_x) as f64)
        * ((concordant + discordant + ties_y) as f64))
        .sqrt();
    if denom == 0.0 {
        0.0
    } else {
        s / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{quad2d, QuadratureSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn frank(t: f64) -> FrankCopula {
        FrankCopula::new(t).unwrap()
    }

    #[test]
    fn independence_limit() {
        let c = frank(1e-9);
        assert_eq!(c.density(0.3, 0.8), 1.0);
        assert_eq!(c.second_partials(0.3, 0.8), (0.0, 0.0));
        assert_abs_diff_eq!(kendall_tau(1e-9), 0.0, epsilon = 1e-9);
        assert_eq!(beta_functional(&c, 64).unwrap().beta, 0.0);
    }

    #[test]
    fn exchangeable() {
        let c = frank(5.0);
        assert_relative_eq!(
            c.density(0.3, 0.7),
            c.density(0.7, 0.3),
            max_relative = 1e-14
        );
        let (cuu, _) = c.second_partials(0.2, 0.9);
        let (_, cvv) = c.second_partials(0.9, 0.2);
        assert_relative_eq!(cuu, cvv, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(FrankCopula::new(f64::NAN).is_err());
        let c = frank(5.0);
        assert!(c.try_density(f64::INFINITY, 0.5).is_err());
        assert!(c.try_density(0.5, 1.5).is_err());
        assert!(c.try_density(0.5, 0.5).is_ok());
    }

    #[test]
    fn density_matches_mixed_difference_of_cdf() {
        let c = frank(5.0);
        let e = 1e-4;
        let (u, v) = (0.5, 0.5);
        let fd = (c.cdf(u + e, v + e) - c.cdf(u + e, v - e) - c.cdf(u - e, v + e)
            + c.cdf(u - e, v - e))
            / (4.0 * e * e);
        assert_abs_diff_eq!(c.density(u, v), fd, epsilon = 1e-5);
        // by hand: a = b = e^-2.5, D = (1 - e^-5) - (1 - a)^2
        let a = (-2.5f64).exp();
        let k = 1.0 - (-5.0f64).exp();
        let d = k - (1.0 - a).powi(2);
        assert_abs_diff_eq!(
            c.density(0.5, 0.5),
            5.0 * k * a * a / (d * d),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(c.density(0.5, 0.5), 1.473_563_7, epsilon = 1e-7);
    }

    fn fd_second_partials(c: &FrankCopula, u: f64, v: f64, e: f64) -> (f64, f64) {
        let d = |a: f64, b: f64| c.density(a, b);
        let five = |f: &dyn Fn(f64) -> f64, x: f64| {
            (-f(x + 2.0 * e) + 16.0 * f(x + e) - 30.0 * f(x) + 16.0 * f(x - e) - f(x - 2.0 * e))
                / (12.0 * e * e)
        };
        (five(&|x| d(x, v), u), five(&|y| d(u, y), v))
    }

    #[test]
    fn analytic_partials_match_finite_differences() {
        for theta in [5.0, -5.0, 2.0, 10.0] {
            let c = frank(theta);
            for i in 1..=21 {
                for j in 1..=21 {
                    let (u, v) = (i as f64 / 22.0, j as f64 / 22.0);
                    let (auu, avv) = c.second_partials(u, v);
                    let (fuu, fvv) = fd_second_partials(&c, u, v, 1e-3);
                    let scale = auu.abs().max(avv.abs()).max(1.0);
                    assert!(
                        (auu - fuu).abs() <= 1e-4 * scale,
                        "c_uu at ({u},{v}) theta {theta}"
                    );
                    assert!(
                        (avv - fvv).abs() <= 1e-4 * scale,
                        "c_vv at ({u},{v}) theta {theta}"
                    );
                }
            }
        }
        // centre of the square, 5-point stencil with step 1e-3
        let (cuu, cvv) = frank(5.0).second_partials(0.5, 0.5);
        let (fuu, fvv) = fd_second_partials(&frank(5.0), 0.5, 0.5, 1e-3);
        assert_relative_eq!(cuu, fuu, max_relative = 1e-6);
        assert_relative_eq!(cvv, fvv, max_relative = 1e-6);
    }

    #[test]
    fn density_normalization_and_margins() {
        let spec = QuadratureSpec::simpson(201).unwrap();
        for theta in [-5.0, 2.0, 5.0, 10.0] {
            let c = frank(theta);
            let total = quad2d(|u, v| c.density(u, v), &spec).unwrap();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-4);
            for v in [0.1, 0.5, 0.9] {
                let m = integrate(|u| c.density(u, v), 0.0, 1.0, 1e-12);
                assert_abs_diff_eq!(m, 1.0, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn debye_and_tau() {
        // D_1(θ) by an independent composite Simpson on 20000 panels
        let theta = 5.0;
        let m = 20_000;
        let step = theta / m as f64;
        let g = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
        let mut s = g(0.0) + g(theta);
        for i in 1..m {
            s += g(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let d1 = s * step / 3.0 / theta;
        assert_abs_diff_eq!(debye1(theta), d1, epsilon = 1e-12);
        assert_abs_diff_eq!(kendall_tau(5.0), 0.4567, epsilon = 1e-4);
        assert_abs_diff_eq!(kendall_tau(-5.0), -kendall_tau(5.0), epsilon = 1e-12);
    }

    #[test]
    fn tau_round_trip() {
        for theta in [3.7, -3.7, 0.05, 20.0] {
            let back = invert_kendall_tau(kendall_tau(theta)).unwrap();
            assert_abs_diff_eq!(back, theta, epsilon = 1e-6);
        }
        assert_eq!(invert_kendall_tau(0.0).unwrap(), 0.0);
        assert!(invert_kendall_tau(1.0).is_err());
        assert!(invert_kendall_tau(-1.2).is_err());
    }

    #[test]
    fn beta_for_theta_five() {
        // direct quadrature, frozen from an independent 801-node numpy Simpson
        // evaluation of the same integrand
        let b = beta_functional(&frank(5.0), 64).unwrap();
        assert_relative_eq!(b.beta, 401.3848, max_relative = 1e-4);
        let neg = beta_functional(&frank(-5.0), 64).unwrap();
        assert_relative_eq!(b.beta, neg.beta, max_relative = 1e-12);
        assert!(beta_functional(&frank(5.0), 32).is_err());
    }

    #[test]
    fn beta_with_finite_difference_partials() {
        // same integral with the stencil partials, coarse midpoint grid
        let c = frank(5.0);
        let spec = QuadratureSpec::midpoint(300).unwrap();
        let q = quad2d(
            |u, v| {
                let (a, b) = fd_second_partials(&c, u, v, 1e-3);
                (a + b).powi(2)
            },
            &spec,
        )
        .unwrap();
        let b = beta_functional(&c, 64).unwrap().beta;
        assert_relative_eq!(q, b, max_relative = 1e-3);
    }

    #[test]
    fn sampler_is_deterministic() {
        let c = frank(5.0);
        assert_eq!(c.sample(100, 7), c.sample(100, 7));
        assert_ne!(c.sample(100, 7), c.sample(100, 8));
    }

    #[test]
    fn conditional_quantile_inverts_cdf() {
        let c = frank(-3.0);
        for &(w, u) in &[(0.1, 0.2), (0.5, 0.5), (0.93, 0.01)] {
            let v = c.conditional_quantile(w, u);
            assert_abs_diff_eq!(c.conditional_cdf(v, u), w, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampler_matches_kendall_tau() {
        let s = frank(5.0).sample(10_000, 2024);
        let (x, y): (Vec<f64>, Vec<f64>) = s.into_iter().unzip();
        let tau = sample_kendall_tau(&x, &y);
        assert!((tau - 0.4567).abs() < 0.02, "tau {tau}");
    }

    #[test]
    fn independent_sampler_is_uncorrelated() {
        let s = frank(1e-9).sample(10_000, 11);
        let n = s.len() as f64;
        let (mx, my) = s
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for &(x, y) in &s {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() < 0.03, "r {r}");
    }

    #[test]
    fn sampler_goodness_of_fit() {
        let c = frank(5.0);
        let n = 100_000;
        let bins = 20;
        let mut counts = vec![0usize; bins * bins];
        for (u, v) in c.sample(n, 99) {
            let i = ((u * bins as f64) as usize).min(bins - 1);
            let j = ((v * bins as f64) as usize).min(bins - 1);
            counts[i * bins + j] += 1;
        }
        let edge = |k: usize| k as f64 / bins as f64;
        let mut chi2 = 0.0;
        for i in 0..bins {
            for j in 0..bins {
                let p = c.cdf(edge(i + 1), edge(j + 1))
                    - c.cdf(edge(i), edge(j + 1))
                    - c.cdf(edge(i + 1), edge(j))
                    + c.cdf(edge(i), edge(j));
                let e = p * n as f64;
                chi2 += (counts[i * bins + j] as f64 - e).powi(2) / e;
            }
        }
        // 399 degrees of freedom: mean 399, sd ~28; 520 is beyond 4 sd
        assert!(chi2 < 520.0, "chi2 {chi2}");
    }

    #[test]
    fn sample_tau_handles_ties() {
        assert_abs_diff_eq!(sample_kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert_abs_diff_eq!(sample_kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        // tau-b with one tie in x: C = 2, D = 0, tx = 1
        let t = sample_kendall_tau(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(t, 2.0 / (3.0f64 * 2.0).sqrt(), epsilon = 1e-15);
    }
}
