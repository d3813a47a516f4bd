//! Spatial locations and the two supported distance metrics.
//!
//! Great-circle coordinates are longitude/latitude in degrees; conversion to
//! radians happens only inside [`distance`].

use std::collections::HashSet;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;

use crate::error::{Error, Result};

/// Earth mean radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A point in the plane, or a (longitude, latitude) pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Haversine distance on a sphere of the given radius.
    GreatCircle { radius: f64 },
}

impl Metric {
    pub fn great_circle_km() -> Self {
        Metric::GreatCircle {
            radius: EARTH_RADIUS_KM,
        }
    }

    pub(crate) fn check(&self, p: &Location) -> Result<()> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite location ({}, {})",
                p.x, p.y
            )));
        }
        if let Metric::GreatCircle { .. } = self {
            if !(-180.0..=180.0).contains(&p.x) || !(-90.0..=90.0).contains(&p.y) {
                return Err(Error::Domain(format!(
                    "longitude/latitude ({}, {}) out of range",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    /// Canonical bit pattern used to detect coincident points.
    pub(crate) fn key(&self, p: &Location) -> (u64, u64) {
        // +0.0 and -0.0 are the same coordinate.
        let norm = |v: f64| if v == 0.0 { 0.0f64 } else { v };
        match self {
            Metric::Euclidean => (norm(p.x).to_bits(), norm(p.y).to_bits()),
            Metric::GreatCircle { .. } => {
                if p.y.abs() == 90.0 {
                    (0, norm(p.y).to_bits())
                } else if p.x == 180.0 {
                    ((-180.0f64).to_bits(), norm(p.y).to_bits())
                } else {
                    (norm(p.x).to_bits(), norm(p.y).to_bits())
                }
            }
        }
    }
}

/// Distance between two locations under `metric`.
pub fn distance(a: &Location, b: &Location, metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => (a.x - b.x).hypot(a.y - b.y),
        Metric::GreatCircle { radius } => {
            let (lon1, lat1) = (a.x.to_radians(), a.y.to_radians());
            let (lon2, lat2) = (b.x.to_radians(), b.y.to_radians());
            let hav = |t: f64| {
                let s = (0.5 * t).sin();
                s * s
            };
            let h = hav(lat2 - lat1) + lat1.cos() * lat2.cos() * hav(lon2 - lon1);
            2.0 * radius * h.clamp(0.0, 1.0).sqrt().asin()
        }
    }
}

/// An ordered, immutable set of distinct locations sharing one metric.
///
/// Index `i` always refers to the same point; it is the row/column identity of
/// every covariance matrix built from the set.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    points: Vec<Location>,
    metric: Metric,
}

impl LocationSet {
    pub fn new(points: Vec<Location>, metric: Metric) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("location set is empty".into()));
        }
        if let Metric::GreatCircle { radius } = metric {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(Error::Domain(format!("invalid sphere radius {radius}")));
            }
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            metric.check(p)?;
            if !seen.insert(metric.key(p)) {
                return Err(Error::Domain(format!(
                    "duplicate location ({}, {}) at index {i}",
                    p.x, p.y
                )));
            }
        }
        Ok(Self { points, metric })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn points(&self) -> &[Location] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Location {
        self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.points[i], &self.points[j], self.metric)
    }

    /// The subset at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i]).collect(), self.metric)
    }

    pub fn into_points(self) -> Vec<Location> {
        self.points
    }
}

/// Irregular grid locations in the unit square.
///
/// With `g = ceil(sqrt(n))`, cell `(r, l)` holds the point
/// `((r - 0.5 + X) / g, (l - 0.5 + Y) / g)` with `X, Y ~ U(-0.4, 0.4)`.
/// Cells are visited row-major and the first `n` are kept, so any two points
/// are at least `0.2 / g` apart.
pub fn generate_locations(n: usize, seed: u64) -> Result<LocationSet> {
    if n == 0 {
        return Err(Error::Domain("number of locations must be positive".into()));
    }
    let g = ceil_sqrt(n);
    let gf = g as f64;
    let jitter = Uniform::new(-0.4, 0.4).expect("valid uniform bounds");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    'cells: for r in 1..=g {
        for l in 1..=g {
            if points.len() == n {
                break 'cells;
            }
            let dx: f64 = rng.sample(jitter);
            let dy: f64 = rng.sample(jitter);
            points.push(Location::new(
                (r as f64 - 0.5 + dx) / gf,
                (l as f64 - 0.5 + dy) / gf,
            ));
        }
    }
    LocationSet::new(points, Metric::Euclidean)
}

/// A permutation listing the points of `set` along a Z-order (Morton) curve
/// over their bounding box. Nearby indices are then nearby in space, which
/// keeps covariance tiles compact.
pub fn spatial_order(set: &LocationSet) -> Vec<usize> {
    const BITS: u32 = 21;
    let pts = set.points();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let top = ((1u64 << BITS) - 1) as f64;
    let quantize = |v: f64, lo: f64, hi: f64| {
        if hi > lo {
            ((v - lo) / (hi - lo) * top).round() as u64
        } else {
            0
        }
    };
    let mut keyed: Vec<(u64, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (qx, qy) = (quantize(p.x, x0, x1), quantize(p.y, y0, y1));
            (spread_bits(qx) | (spread_bits(qy) << 1), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Moves bit `b` of a 21-bit value to bit `2b`.
fn spread_bits(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

pub(crate) fn ceil_sqrt(n: usize) -> usize {
    let mut g = (n as f64).sqrt() as usize;
    while g * g < n {
        g += 1;
    }
    while g > 1 && (g - 1) * (g - 1) >= n {
        g -= 1;
    }
    g
}

/// Distances between `rows` and `cols` of `set`, entry `(i, j)` being
/// `distance(points[rows.start + i], points[cols.start + j])`.
pub fn pairwise_distance_block(
    set: &LocationSet,
    rows: Range<usize>,
    cols: Range<usize>,
) -> Result<DMatrix<f64>> {
    if rows.end > set.len() || cols.end > set.len() || rows.start > rows.end || cols.start > cols.end
    {
        return Err(Error::DimensionMismatch(format!(
            "block {rows:?} x {cols:?} outside a set of {} points",
            set.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        set.distance(rows.start + i, cols.start + j)
    }))
}
