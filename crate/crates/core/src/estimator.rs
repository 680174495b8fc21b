//! Mirror-reflection kernel estimator of a copula density, and the naive
//! product-kernel estimator it corrects.
//!
//! ```text
//! ĉ(u, v) = 1/n Σ_i Σ_l K_h(u - U_il) K_h(v - V_il)   for (u, v) in [0, 1]^2
//! ```
//!
//! where `(U_il, V_il)` runs over the nine mirror copies of each
//! pseudo-observation. The estimate is zero outside the closed unit square.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::transform::{MirrorSet, PseudoSample};

/// Bandwidths above this let reflected mass re-enter from the far edge.
pub const MAX_CLEAN_BANDWIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Mirror,
    Naive,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Mirror => "mirror",
            Variant::Naive => "naive",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mirror" => Ok(Variant::Mirror),
            "naive" => Ok(Variant::Naive),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator variant '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    h: f64,
    kernel: Kernel,
    variant: Variant,
}

impl EstimatorConfig {
    /// Validates `0 < h <= 1`; logs a warning above 1/2.
    pub fn new(h: f64, kernel: Kernel, variant: Variant) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::NonFinite {
                value: h,
                location: "bandwidth".into(),
            });
        }
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must lie in (0, 1], got {h}"
            )));
        }
        if h > MAX_CLEAN_BANDWIDTH && variant == Variant::Mirror {
            log::warn!("bandwidth {h} > 0.5: mass reflected at one edge reaches the opposite edge");
        }
        Ok(Self { h, kernel, variant })
    }

    pub fn mirror(h: f64, kernel: Kernel) -> Result<Self> {
        Self::new(h, kernel, Variant::Mirror)
    }

    pub fn naive(h: f64, kernel: Kernel) -> Result<Self> {
        Self::new(h, kernel, Variant::Naive)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
}

#[inline]
fn in_square(u: f64, v: f64) -> bool {
    (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)
}

/// `ĉ(u, v)` over a prebuilt mirror set.
pub fn mirror_kde_at(mirror: &MirrorSet, kernel: Kernel, h: f64, u: f64, v: f64) -> f64 {
    if !in_square(u, v) || mirror.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    mirror.for_each_near(u, v, kernel.support_radius() * h, |a, b, _| {
        acc += kernel.eval((u - a) / h) * kernel.eval((v - b) / h);
    });
    acc / (mirror.source_len() as f64 * h * h)
}

/// Product-kernel estimate without reflection, evaluated anywhere.
pub fn naive_kde_at(pseudo: &PseudoSample, kernel: Kernel, h: f64, u: f64, v: f64) -> f64 {
    let n = pseudo.len();
    if n == 0 {
        return 0.0;
    }
    let acc: f64 = pseudo
        .points()
        .map(|(a, b)| kernel.eval((u - a) / h) * kernel.eval((v - b) / h))
        .sum();
    acc / (n as f64 * h * h)
}

/// A fitted estimator: the configuration together with the data it needs.
#[derive(Debug, Clone)]
pub struct MirrorEstimator {
    config: EstimatorConfig,
    pseudo: PseudoSample,
    mirror: MirrorSet,
}

impl MirrorEstimator {
    pub fn new(pseudo: &PseudoSample, config: EstimatorConfig) -> Self {
        Self {
            config,
            pseudo: pseudo.clone(),
            mirror: MirrorSet::new(pseudo),
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn pseudo(&self) -> &PseudoSample {
        &self.pseudo
    }

    pub fn mirror_set(&self) -> &MirrorSet {
        &self.mirror
    }

    /// Estimate at `(u, v)` using the configured variant.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let EstimatorConfig { h, kernel, variant } = self.config;
        match variant {
            Variant::Mirror => mirror_kde_at(&self.mirror, kernel, h, u, v),
            Variant::Naive => naive_kde_at(&self.pseudo, kernel, h, u, v),
        }
    }

    pub fn grid(&self, resolution: usize) -> Result<DensityGrid> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {resolution} < 2"
            )));
        }
        let m = resolution;
        let step = 1.0 / (m - 1) as f64;
        let node = |i: usize| if i == m - 1 { 1.0 } else { i as f64 * step };
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| (0..m).map(|j| self.eval(node(i), node(j))).collect())
            .collect();
        Ok(DensityGrid {
            resolution: m,
            values: rows.concat(),
            config: self.config,
            source_n: self.pseudo.len(),
        })
    }
}

/// Estimate tabulated on `m x m` equispaced nodes `(i/(m-1), j/(m-1))`,
/// row-major in `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub resolution: usize,
    pub values: Vec<f64>,
    pub config: EstimatorConfig,
    pub source_n: usize,
}

impl DensityGrid {
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.resolution {
            1.0
        } else {
            i as f64 / (self.resolution - 1) as f64
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∬ ĉ` from the tabulated values.
    pub fn integral(&self) -> Result<f64> {
        crate::metrics::integrate_grid(&self.values, self.resolution)
    }
}

/// Convenience wrapper: fit on `pseudo` and tabulate.
pub fn mirror_kde_grid(
    pseudo: &PseudoSample,
    config: EstimatorConfig,
    resolution: usize,
) -> Result<DensityGrid> {
    MirrorEstimator::new(pseudo, config).grid(resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{quad2d, QuadratureSpec};
    use crate::reference::FrankCopula;
    use crate::transform::{ecdf_transform_pairs, Scaling};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn single(u: f64, v: f64) -> PseudoSample {
        PseudoSample::from_unit_square(vec![u], vec![v], Scaling::OverN).unwrap()
    }

    fn frank_pseudo(n: usize, seed: u64) -> PseudoSample {
        let s = FrankCopula::new(5.0).unwrap().sample(n, seed);
        ecdf_transform_pairs(&s, Scaling::OverNPlus1).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::mirror(0.0, Kernel::Epanechnikov).is_err());
        assert!(EstimatorConfig::mirror(-0.1, Kernel::Epanechnikov).is_err());
        assert!(EstimatorConfig::mirror(1.5, Kernel::Epanechnikov).is_err());
        assert!(EstimatorConfig::mirror(f64::NAN, Kernel::Epanechnikov).is_err());
        assert!(EstimatorConfig::mirror(0.7, Kernel::Epanechnikov).is_ok());
        assert_eq!("Naive".parse::<Variant>().unwrap(), Variant::Naive);
        assert!("other".parse::<Variant>().is_err());
    }

    #[test]
    fn zero_outside_square() {
        let p = frank_pseudo(50, 1);
        let est = MirrorEstimator::new(
            &p,
            EstimatorConfig::mirror(0.2, Kernel::Epanechnikov).unwrap(),
        );
        assert_eq!(est.eval(1.2, 0.5), 0.0);
        assert_eq!(est.eval(0.5, -1e-12), 0.0);
        assert!(est.eval(1.0, 1.0) > 0.0);
    }

    #[test]
    fn single_interior_point() {
        let p = single(0.5, 0.5);
        let m = EstimatorConfig::mirror(0.4, Kernel::Epanechnikov).unwrap();
        let n = EstimatorConfig::naive(0.4, Kernel::Epanechnikov).unwrap();
        let expected = (0.75f64 / 0.4).powi(2);
        assert_abs_diff_eq!(expected, 3.515625);
        assert_abs_diff_eq!(
            MirrorEstimator::new(&p, m).eval(0.5, 0.5),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            MirrorEstimator::new(&p, n).eval(0.5, 0.5),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn corner_point_reflections() {
        // a point at the corner is counted by four coincident copies
        let p = single(0.0, 0.0);
        let h = 0.3;
        let est = MirrorEstimator::new(
            &p,
            EstimatorConfig::mirror(h, Kernel::Epanechnikov).unwrap(),
        );
        assert_abs_diff_eq!(
            est.eval(0.0, 0.0),
            4.0 * (0.75f64 / h).powi(2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn normalization_frank_sample() {
        let p = frank_pseudo(200, 3);
        let est = MirrorEstimator::new(
            &p,
            EstimatorConfig::mirror(0.2, Kernel::Epanechnikov).unwrap(),
        );
        let spec = QuadratureSpec::simpson(201).unwrap();
        let total = quad2d(|u, v| est.eval(u, v), &spec).unwrap();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn naive_estimator_leaks_mass() {
        let p = single(0.05, 0.5);
        let est = MirrorEstimator::new(
            &p,
            EstimatorConfig::naive(0.2, Kernel::Epanechnikov).unwrap(),
        );
        let spec = QuadratureSpec::simpson(401).unwrap();
        let total = quad2d(|u, v| est.eval(u, v), &spec).unwrap();
        assert!(total < 0.9, "naive mass {total}");
    }

    #[test]
    fn naive_corner_is_a_quarter() {
        // independence sample: corner estimate loses three quarters of its mass
        let n = 40_000;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let mut v = u.clone();
        // deterministic shuffle, close to independent
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        for i in (1..n).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            v.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let p = PseudoSample::from_unit_square(u, v, Scaling::OverN).unwrap();
        let h = 0.05;
        let naive = naive_kde_at(&p, Kernel::Epanechnikov, h, 0.0, 0.0);
        let mirror = mirror_kde_at(&MirrorSet::new(&p), Kernel::Epanechnikov, h, 0.0, 0.0);
        assert!((naive - 0.25).abs() < 0.06, "naive corner {naive}");
        assert!((mirror - 1.0).abs() < 0.2, "mirror corner {mirror}");
    }

    #[test]
    fn grid_matches_pointwise() {
        let p = frank_pseudo(30, 4);
        let est = MirrorEstimator::new(
            &p,
            EstimatorConfig::mirror(0.25, Kernel::Epanechnikov).unwrap(),
        );
        let g = est.grid(2).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(g.at(i, j), est.eval(i as f64, j as f64));
        }
        assert!(est.grid(1).is_err());
    }

    #[test]
    fn grid_is_symmetric_for_symmetric_sample() {
        let u = vec![0.1, 0.3, 0.6, 0.9, 0.45];
        let v = vec![0.3, 0.1, 0.9, 0.6, 0.45];
        let p = PseudoSample::from_unit_square(u, v, Scaling::OverN).unwrap();
        let g = mirror_kde_grid(
            &p,
            EstimatorConfig::mirror(0.2, Kernel::Epanechnikov).unwrap(),
            41,
        )
        .unwrap();
        for i in 0..41 {
            for j in 0..41 {
                assert_relative_eq!(g.at(i, j), g.at(j, i), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn grid_mean_near_one() {
        let p = frank_pseudo(500, 5);
        let g = mirror_kde_grid(
            &p,
            EstimatorConfig::mirror(0.2, Kernel::Epanechnikov).unwrap(),
            101,
        )
        .unwrap();
        assert_abs_diff_eq!(g.mean(), 1.0, epsilon = 0.02);
        assert_abs_diff_eq!(g.integral().unwrap(), 1.0, epsilon = 2e-3);
    }

    #[test]
    fn pruned_matches_full_scan() {
        let p = frank_pseudo(80, 6);
        let m = MirrorSet::new(&p);
        for kernel in [Kernel::Epanechnikov, Kernel::Uniform, Kernel::Gaussian] {
            let h = 0.15;
            for &(u, v) in &[(0.0, 0.0), (0.03, 0.97), (0.5, 0.5), (1.0, 0.2)] {
                let full: f64 = m
                    .points()
                    .map(|(a, b)| kernel.eval((u - a) / h) * kernel.eval((v - b) / h))
                    .sum::<f64>()
                    / (80.0 * h * h);
                assert_relative_eq!(
                    mirror_kde_at(&m, kernel, h, u, v),
                    full,
                    max_relative = 1e-12
                );
            }
        }
    }

    proptest! {
        #[test]
        fn normalizes_for_any_sample(
            pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..12),
            h in 0.05f64..=0.5,
        ) {
            let (u, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let p = PseudoSample::from_unit_square(u, v, Scaling::OverN).unwrap();
            let est = MirrorEstimator::new(&p, EstimatorConfig::mirror(h, Kernel::Epanechnikov).unwrap());
            let spec = QuadratureSpec::simpson(401).unwrap();
            let total = quad2d(|a, b| est.eval(a, b), &spec).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-3, "mass {}", total);
        }

        #[test]
        fn nonnegative(
            pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..20),
            h in 0.01f64..=1.0,
            q in (-0.2f64..1.2, -0.2f64..1.2),
        ) {
            let (u, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let p = PseudoSample::from_unit_square(u, v, Scaling::OverN).unwrap();
            for kernel in [Kernel::Epanechnikov, Kernel::Gaussian] {
                let est = MirrorEstimator::new(&p, EstimatorConfig::mirror(h, kernel).unwrap());
                prop_assert!(est.eval(q.0, q.1) >= 0.0);
            }
        }

        #[test]
        fn interior_agreement(
            pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..20),
            h in 0.01f64..=0.5,
            s in (0.0f64..=1.0, 0.0f64..=1.0),
        ) {
            let (u, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let p = PseudoSample::from_unit_square(u, v, Scaling::OverN).unwrap();
            let (a, b) = (h + s.0 * (1.0 - 2.0 * h), h + s.1 * (1.0 - 2.0 * h));
            let m = mirror_kde_at(&MirrorSet::new(&p), Kernel::Epanechnikov, h, a, b);
            let nv = naive_kde_at(&p, Kernel::Epanechnikov, h, a, b);
            prop_assert!((m - nv).abs() <= 1e-12 * nv.abs().max(1.0));
        }
    }
}
