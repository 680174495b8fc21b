//! Rank transform to pseudo-observations and the nine-fold mirror set.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Divisor applied to ranks when forming pseudo-observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `rank / n`: the raw empirical CDF, the largest value maps to 1.
    OverN,
    /// `rank / (n + 1)`: keeps every pseudo-observation off the boundary.
    #[default]
    OverNPlus1,
}

impl Scaling {
    pub fn divisor(self, n: usize) -> f64 {
        match self {
            Scaling::OverN => n as f64,
            Scaling::OverNPlus1 => (n + 1) as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scaling::OverN => "over_n",
            Scaling::OverNPlus1 => "over_n_plus_1",
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "over_n" | "n" => Ok(Scaling::OverN),
            "over_n_plus_1" | "n+1" | "n1" => Ok(Scaling::OverNPlus1),
            other => Err(Error::InvalidArgument(format!("unknown scaling `{other}`"))),
        }
    }
}

/// Points on the closed unit square obtained from marginal ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    u: Vec<f64>,
    v: Vec<f64>,
    scaling: Scaling,
}

impl PseudoSample {
    /// Wrap coordinates that are already on the unit square.
    ///
    /// Used for re-ingesting exported pseudo-observations and for hand-built
    /// fixtures; no rank transform is applied.
    pub fn from_unit_square(u: Vec<f64>, v: Vec<f64>, scaling: Scaling) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::InvalidArgument(format!(
                "coordinate lengths differ: {} vs {}",
                u.len(),
                v.len()
            )));
        }
        if u.is_empty() {
            return Err(Error::SampleTooSmall { needed: 1, got: 0 });
        }
        for (i, (&a, &b)) in u.iter().zip(&v).enumerate() {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} = ({a}, {b}) is outside the unit square"
                )));
            }
        }
        Ok(Self { u, v, scaling })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.u[i], self.v[i])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.v.iter().copied())
    }

    /// Swap the two coordinates.
    pub fn transposed(&self) -> Self {
        Self {
            u: self.v.clone(),
            v: self.u.clone(),
            scaling: self.scaling,
        }
    }
}

/// Average ranks (1-based) of `xs`; tied values share the mean of their ranks.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Marginal empirical-CDF transform of a raw bivariate sample.
pub fn ecdf_transform(x: &[f64], y: &[f64], scaling: Scaling) -> Result<PseudoSample> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "coordinate lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            let value = if a.is_finite() { b } else { a };
            return Err(Error::NonFinite {
                value,
                location: format!("row {i}"),
            });
        }
    }
    let s = scaling.divisor(n);
    let u = average_ranks(x).into_iter().map(|r| r / s).collect();
    let v = average_ranks(y).into_iter().map(|r| r / s).collect();
    Ok(PseudoSample { u, v, scaling })
}

/// Same as [`ecdf_transform`] for a slice of pairs.
pub fn ecdf_transform_pairs(pairs: &[(f64, f64)], scaling: Scaling) -> Result<PseudoSample> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    ecdf_transform(&x, &y, scaling)
}

/// The nine images of `(u, v)` under reflection about the edges of the square.
///
/// Order: original first, then `(u,-v), (-u,v), (-u,-v), (u,2-v), (-u,2-v),
/// (2-u,v), (2-u,-v), (2-u,2-v)`.
#[inline]
pub fn reflections(u: f64, v: f64) -> [(f64, f64); 9] {
    [
        (u, v),
        (u, -v),
        (-u, v),
        (-u, -v),
        (u, 2.0 - v),
        (-u, 2.0 - v),
        (2.0 - u, v),
        (2.0 - u, -v),
        (2.0 - u, 2.0 - v),
    ]
}

/// A pseudo-sample augmented with its 8 reflections per point.
///
/// Points are stored in two layouts: canonical order (source `i` occupies
/// slots `9i..9i+9`, ordered as in [`reflections`]) and a copy sorted by `u`
/// for window queries.
#[derive(Debug, Clone)]
pub struct MirrorSet {
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    sorted_u: Vec<f64>,
    sorted_v: Vec<f64>,
    sorted_src: Vec<u32>,
}

/// Number of mirror copies per source point.
pub const COPIES: usize = 9;

impl MirrorSet {
    pub fn new(pseudo: &PseudoSample) -> Self {
        let n = pseudo.len();
        let mut u = Vec::with_capacity(COPIES * n);
        let mut v = Vec::with_capacity(COPIES * n);
        for (a, b) in pseudo.points() {
            for (ra, rb) in reflections(a, b) {
                u.push(ra);
                v.push(rb);
            }
        }
        let mut order: Vec<usize> = (0..u.len()).collect();
        order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
        let sorted_u = order.iter().map(|&k| u[k]).collect();
        let sorted_v = order.iter().map(|&k| v[k]).collect();
        let sorted_src = order.iter().map(|&k| (k / COPIES) as u32).collect();
        Self {
            n,
            u,
            v,
            sorted_u,
            sorted_v,
            sorted_src,
        }
    }

    /// Number of source points.
    pub fn source_len(&self) -> usize {
        self.n
    }

    /// Total number of points, always `9 * source_len()`.
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Point `k` in canonical order.
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.u[k], self.v[k])
    }

    /// Copy `l` (0-based) of source `i`.
    pub fn copy(&self, i: usize, l: usize) -> (f64, f64) {
        self.point(COPIES * i + l)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.v.iter().copied())
    }

    /// Visit every point with `|u' - u| < radius` and `|v' - v| < radius`.
    ///
    /// The callback receives `(u', v', source index)`.
    #[inline]
    pub fn for_each_near<F>(&self, u: f64, v: f64, radius: f64, mut f: F)
    where
        F: FnMut(f64, f64, usize),
    {
        let lo = self.sorted_u.partition_point(|&x| x <= u - radius);
        let hi = self.sorted_u.partition_point(|&x| x < u + radius);
        for k in lo..hi {
            let pv = self.sorted_v[k];
            if (pv - v).abs() < radius {
                f(self.sorted_u[k], pv, self.sorted_src[k] as usize);
            }
        }
    }
}
