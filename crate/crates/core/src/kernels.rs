//! Symmetric univariate kernels and the constants derived from them.
//!
//! Every estimator in this crate uses a product of two univariate kernels, so
//! the quantities needed downstream are all one-dimensional: the kernel value,
//! its moments `mu_k = ∫ s^k K(s) ds`, its roughness `R(K) = ∫ K(s)^2 ds`, and
//! the self-convolution `(K*K)(x) = ∫ K(t) K(x - t) dt`.
//!
//! Epanechnikov and uniform constants are closed forms. The Gaussian kernel is
//! truncated at [`GAUSSIAN_TRUNCATION`] standard units where its density is
//! below 1e-14.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Radius (in standard units) beyond which the Gaussian kernel evaluates to 0.
pub const GAUSSIAN_TRUNCATION: f64 = 8.0;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `3/4 (1 - x^2)` on `[-1, 1]`.
    Epanechnikov,
    /// Standard normal density, truncated at [`GAUSSIAN_TRUNCATION`].
    Gaussian,
    /// `1/2` on `[-1, 1]`.
    Uniform,
}

/// Roughness and second moment, the two constants entering AMISE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub roughness: f64,
    pub mu2: f64,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
            Kernel::Uniform => "uniform",
        }
    }

    /// True for kernels that vanish identically outside `[-1, 1]`.
    pub fn is_compact(self) -> bool {
        !matches!(self, Kernel::Gaussian)
    }

    /// Half-width of the (possibly truncated) support.
    pub fn support_radius(self) -> f64 {
        match self {
            Kernel::Gaussian => GAUSSIAN_TRUNCATION,
            _ => 1.0,
        }
    }

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    0.75 * (1.0 - x * x)
                }
            }
            Kernel::Uniform => {
                if x.abs() > 1.0 {
                    0.0
                } else {
                    0.5
                }
            }
            Kernel::Gaussian => {
                if x.abs() > GAUSSIAN_TRUNCATION {
                    0.0
                } else {
                    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
                }
            }
        }
    }

    /// `K_h(x) = K(x / h) / h`.
    #[inline]
    pub fn eval_scaled(self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }

    /// `mu_k = ∫ s^k K(s) ds`; odd moments are exactly 0.
    pub fn moment(self, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let kf = f64::from(k);
        match self {
            Kernel::Epanechnikov => 3.0 / ((kf + 1.0) * (kf + 3.0)),
            Kernel::Uniform => 1.0 / (kf + 1.0),
            // (k - 1)!!
            Kernel::Gaussian => (1..k).step_by(2).map(f64::from).product(),
        }
    }

    /// `R(K) = ∫ K(x)^2 dx`.
    pub fn roughness(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.6,
            Kernel::Uniform => 0.5,
            Kernel::Gaussian => 1.0 / (2.0 * PI.sqrt()),
        }
    }

    pub fn constants(self) -> KernelConstants {
        KernelConstants {
            roughness: self.roughness(),
            mu2: self.moment(2),
        }
    }

    /// `(K*K)(x)`, zero outside `[-2, 2]` for the compact kernels.
    #[inline]
    pub fn self_convolution(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Epanechnikov => {
                if a >= 2.0 {
                    0.0
                } else {
                    let r = 2.0 - a;
                    0.01875 * r * r * r * (a * a + 6.0 * a + 4.0)
                }
            }
            Kernel::Uniform => {
                if a >= 2.0 {
                    0.0
                } else {
                    0.25 * (2.0 - a)
                }
            }
            // N(0, 2) density
            Kernel::Gaussian => {
                if a > 2.0 * GAUSSIAN_TRUNCATION {
                    0.0
                } else {
                    (-0.25 * a * a).exp() / (2.0 * PI.sqrt())
                }
            }
        }
    }

    /// Half-width of the support of `K*K`.
    pub fn convolution_radius(self) -> f64 {
        2.0 * self.support_radius()
    }
}

/// Derivatives of the standard normal density up to fourth order.
///
/// Hermite form: `phi^(r)(x) = (-1)^r He_r(x) phi(x)`.
pub fn gaussian_derivative(x: f64, order: u32) -> f64 {
    if x.abs() > GAUSSIAN_TRUNCATION {
        return 0.0;
    }
    let phi = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
    let x2 = x * x;
    let poly = match order {
        0 => 1.0,
        1 => -x,
        2 => x2 - 1.0,
        3 => -(x2 * x - 3.0 * x),
        4 => x2 * x2 - 6.0 * x2 + 3.0,
        _ => panic!("gaussian_derivative: order {order} not supported"),
    };
    poly * phi
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            "uniform" | "box" => Ok(Kernel::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::integrate;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const ALL: [Kernel; 3] = [Kernel::Epanechnikov, Kernel::Gaussian, Kernel::Uniform];

    fn range(k: Kernel) -> (f64, f64) {
        let r = k.support_radius();
        (-r, r)
    }

    #[test]
    fn point_values() {
        assert_eq!(Kernel::Epanechnikov.eval(0.0), 0.75);
        assert_eq!(Kernel::Epanechnikov.eval(1.0), 0.0);
        assert_eq!(Kernel::Epanechnikov.eval(-1.3), 0.0);
        assert_abs_diff_eq!(Kernel::Gaussian.eval(0.0), 0.398942, epsilon = 1e-6);
        assert_eq!(Kernel::Gaussian.eval(8.5), 0.0);
    }

    #[test]
    fn integrates_to_one() {
        for k in ALL {
            let (a, b) = range(k);
            let total = integrate(|x| k.eval(x), a, b, 1e-12);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for k in ALL {
            let (a, b) = range(k);
            for p in 0..=8u32 {
                let q = integrate(|s| s.powi(p as i32) * k.eval(s), a, b, 1e-12);
                assert_relative_eq!(k.moment(p), q, max_relative = 1e-8);
            }
        }
        assert_abs_diff_eq!(Kernel::Epanechnikov.moment(2), 0.2, epsilon = 1e-15);
        assert_eq!(Kernel::Gaussian.moment(4), 3.0);
    }

    #[test]
    fn roughness_matches_quadrature() {
        assert_eq!(Kernel::Uniform.roughness(), 0.5);
        for k in ALL {
            let (a, b) = range(k);
            let q = integrate(|x| k.eval(x).powi(2), a, b, 1e-12);
            assert_abs_diff_eq!(k.roughness(), q, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(Kernel::Gaussian.roughness(), 0.282095, epsilon = 1e-6);
    }

    #[test]
    fn constants_positive() {
        for k in ALL {
            let c = k.constants();
            assert!(c.roughness > 0.0 && c.mu2 > 0.0);
        }
    }

    fn convolution_by_quadrature(k: Kernel, x: f64) -> f64 {
        let r = k.support_radius();
        let lo = (-r).max(x - r);
        let hi = r.min(x + r);
        if lo >= hi {
            return 0.0;
        }
        integrate(|t| k.eval(t) * k.eval(x - t), lo, hi, 1e-13)
    }

    #[test]
    fn epanechnikov_convolution_closed_form_matches_quadrature() {
        let k = Kernel::Epanechnikov;
        for i in 0..401 {
            let x = -2.2 + 4.4 * f64::from(i) / 400.0;
            let q = convolution_by_quadrature(k, x);
            assert_abs_diff_eq!(k.self_convolution(x), q, epsilon = 1e-10);
        }
        assert_eq!(k.self_convolution(2.5), 0.0);
        assert_eq!(k.self_convolution(2.0), 0.0);
        assert_abs_diff_eq!(k.self_convolution(0.0), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn other_convolutions_match_quadrature() {
        for k in [Kernel::Uniform, Kernel::Gaussian] {
            for i in 0..41 {
                let x = -2.2 + 4.4 * f64::from(i) / 40.0;
                assert_abs_diff_eq!(
                    k.self_convolution(x),
                    convolution_by_quadrature(k, x),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn convolution_integrates_to_one() {
        for k in ALL {
            let r = k.convolution_radius();
            let q = integrate(|x| k.self_convolution(x), -r, r, 1e-12);
            assert_abs_diff_eq!(q, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        let step = 1e-2;
        for &x in &[0.0, 0.3, -1.1, 2.4] {
            let f = |t: f64| gaussian_derivative(t, 2);
            let fd4 = (f(x + step) - 2.0 * f(x) + f(x - step)) / (step * step);
            // second difference of the second derivative, O(step^2) error
            assert_abs_diff_eq!(gaussian_derivative(x, 4), fd4, epsilon = 1e-4);
        }
        // 5-point stencil on the density itself, Richardson-refined
        let g = |t: f64| Kernel::Gaussian.eval(t);
        let fourth = |s: f64| {
            (g(2.0 * s) - 4.0 * g(s) + 6.0 * g(0.0) - 4.0 * g(-s) + g(-2.0 * s)) / s.powi(4)
        };
        let refined = (4.0 * fourth(0.01) - fourth(0.02)) / 3.0;
        assert_abs_diff_eq!(gaussian_derivative(0.0, 4), refined, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn symmetric(x in -10.0f64..10.0) {
            for k in ALL {
                prop_assert_eq!(k.eval(x), k.eval(-x));
                prop_assert_eq!(k.self_convolution(x), k.self_convolution(-x));
                prop_assert!(k.eval(x) >= 0.0);
            }
        }

        #[test]
        fn compact_support(x in 1.0f64..50.0) {
            prop_assert_eq!(Kernel::Epanechnikov.eval(x), 0.0);
            prop_assert_eq!(Kernel::Uniform.eval(x + 1e-12), 0.0);
        }

        // ∫ K((u-a)/h) K((u-b)/h) du = h (K*K)((a-b)/h)
        #[test]
        fn scaled_product_integral(a in 0.0f64..1.0, b in 0.0f64..1.0, h in 0.01f64..0.6) {
            let k = Kernel::Epanechnikov;
            let lo = a.max(b) - h;
            let hi = a.min(b) + h;
            let direct = if lo < hi {
                integrate(|u| k.eval((u - a) / h) * k.eval((u - b) / h), lo, hi, 1e-13)
            } else {
                0.0
            };
            prop_assert!((direct - h * k.self_convolution((a - b) / h)).abs() < 1e-8);
        }
    }
}
