//! Parameter spaces, unit-cube normalization, candidate pools and the
//! deterministic initialization design.
//!
//! All selection and modeling happens in unit coordinates; raw physical
//! units only appear at the simulator boundary.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::euclidean_distance;

/// Coordinate scaling of one input dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log10,
}

/// One bounded, named input dimension in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "default_scale")]
    pub scale: Scale,
}

fn default_scale() -> Scale {
    Scale::Linear
}

impl DimensionSpec {
    pub fn linear(name: &str, lower: f64, upper: f64) -> Self {
        DimensionSpec {
            name: name.to_string(),
            lower,
            upper,
            scale: Scale::Linear,
        }
    }

    pub fn log10(name: &str, lower: f64, upper: f64) -> Self {
        DimensionSpec {
            name: name.to_string(),
            lower,
            upper,
            scale: Scale::Log10,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper) {
            return Err(Error::InvalidDimension {
                name: self.name.clone(),
                reason: format!("lower {} must be strictly below upper {}", self.lower, self.upper),
            });
        }
        if self.scale == Scale::Log10 && self.lower <= 0.0 {
            return Err(Error::InvalidDimension {
                name: self.name.clone(),
                reason: "log10 dimensions require a strictly positive lower bound".into(),
            });
        }
        Ok(())
    }
}

/// Mapping direction for [`ParameterSpace::map_point`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    ToUnit,
    ToRaw,
}

/// An ordered list of input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    dims: Vec<DimensionSpec>,
}

impl ParameterSpace {
    pub fn new(dims: Vec<DimensionSpec>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension {
                name: "<space>".into(),
                reason: "a space needs at least one dimension".into(),
            });
        }
        let mut seen = BTreeSet::new();
        for d in &dims {
            d.validate()?;
            if !seen.insert(d.name.clone()) {
                return Err(Error::InvalidDimension {
                    name: d.name.clone(),
                    reason: "duplicate dimension name".into(),
                });
            }
        }
        Ok(ParameterSpace { dims })
    }

    pub fn dims(&self) -> &[DimensionSpec] {
        &self.dims
    }

    /// Number of input features.
    pub fn n_features(&self) -> usize {
        self.dims.len()
    }

    fn check_len(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: coords.len(),
            });
        }
        Ok(())
    }

    /// Maps a coordinate vector between raw units and the unit cube.
    ///
    /// Linear dimensions map affinely; log10 dimensions map affinely in
    /// log10 space. The two directions invert each other to 1e-12.
    pub fn map_point(&self, coords: &[f64], direction: MapDirection) -> Result<Vec<f64>> {
        self.check_len(coords)?;
        coords
            .iter()
            .zip(&self.dims)
            .map(|(&c, d)| match direction {
                MapDirection::ToUnit => self.coord_to_unit(c, d),
                MapDirection::ToRaw => self.coord_to_raw(c, d),
            })
            .collect()
    }

    fn coord_to_unit(&self, raw: f64, dim: &DimensionSpec) -> Result<f64> {
        let slack = 1e-9 * (dim.upper - dim.lower).abs();
        if raw < dim.lower - slack || raw > dim.upper + slack {
            return Err(Error::OutOfBounds {
                name: dim.name.clone(),
                value: raw,
                lower: dim.lower,
                upper: dim.upper,
            });
        }
        let u = match dim.scale {
            Scale::Linear => (raw - dim.lower) / (dim.upper - dim.lower),
            Scale::Log10 => {
                (raw.log10() - dim.lower.log10()) / (dim.upper.log10() - dim.lower.log10())
            }
        };
        Ok(u.clamp(0.0, 1.0))
    }

    fn coord_to_raw(&self, unit: f64, dim: &DimensionSpec) -> Result<f64> {
        if !(-1e-9..=1.0 + 1e-9).contains(&unit) {
            return Err(Error::OutOfBounds {
                name: dim.name.clone(),
                value: unit,
                lower: 0.0,
                upper: 1.0,
            });
        }
        let u = unit.clamp(0.0, 1.0);
        Ok(match dim.scale {
            Scale::Linear => dim.lower + u * (dim.upper - dim.lower),
            Scale::Log10 => {
                let lo = dim.lower.log10();
                let hi = dim.upper.log10();
                10f64.powf(lo + u * (hi - lo))
            }
        })
    }

    pub fn to_unit(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.map_point(raw, MapDirection::ToUnit)
    }

    pub fn to_raw(&self, unit: &[f64]) -> Result<Vec<f64>> {
        self.map_point(unit, MapDirection::ToRaw)
    }

    /// Builds a design point from unit coordinates.
    pub fn point_from_unit(&self, unit: Vec<f64>) -> Result<DesignPoint> {
        let raw = self.to_raw(&unit)?;
        Ok(DesignPoint { unit, raw })
    }
}

/// A single candidate location in both coordinate systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub unit: Vec<f64>,
    pub raw: Vec<f64>,
}

/// How the pool point set was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    Grid,
    Quasirandom,
}

/// Pool construction request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PoolSpec {
    /// Full tensor grid, `points_per_dim` per dimension including both endpoints.
    Grid { points_per_dim: usize },
    /// Seeded low-discrepancy set (Halton sequence with a random shift).
    Quasirandom { size: usize, seed: u64 },
}

impl PoolSpec {
    /// Pool defaults: full grids while tractable, Halton sets in high dimension.
    pub fn default_for(n_features: usize) -> Self {
        match n_features {
            0..=2 => PoolSpec::Grid { points_per_dim: 41 },
            3..=4 => PoolSpec::Grid { points_per_dim: 11 },
            _ => PoolSpec::Quasirandom { size: 4096, seed: 0 },
        }
    }
}

const GRID_LIMIT: u128 = 1_000_000;

/// Finite ordered candidate set over a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    points: Vec<DesignPoint>,
    labeled: BTreeSet<usize>,
    source: PoolSource,
}

impl CandidatePool {
    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source(&self) -> PoolSource {
        self.source
    }

    pub fn labeled(&self) -> &BTreeSet<usize> {
        &self.labeled
    }

    pub fn is_labeled(&self, index: usize) -> bool {
        self.labeled.contains(&index)
    }

    /// Marks a pool point as labeled. Labels are never removed.
    pub fn mark_labeled(&mut self, index: usize) {
        assert!(index < self.points.len(), "label index out of range");
        self.labeled.insert(index);
    }

    pub fn unlabeled_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.points.len()).filter(move |i| !self.labeled.contains(i))
    }
}

/// Builds the candidate pool for a space.
///
/// Grid pools enumerate the tensor grid in row-major dimension order (last
/// dimension fastest); quasirandom pools use a Halton sequence with a
/// seeded Cranley-Patterson rotation, which keeps points distinct and
/// reproducible for a given seed.
pub fn build_pool(space: &ParameterSpace, spec: &PoolSpec) -> Result<CandidatePool> {
    let nf = space.n_features();
    let points = match spec {
        PoolSpec::Grid { points_per_dim } => {
            let k = *points_per_dim;
            if k < 2 {
                return Err(Error::InvalidPoolSpec(
                    "grid needs at least 2 points per dimension".into(),
                ));
            }
            let total = (k as u128).checked_pow(nf as u32).unwrap_or(u128::MAX);
            if total > GRID_LIMIT {
                return Err(Error::GridOverflow {
                    requested: total,
                    limit: GRID_LIMIT,
                });
            }
            let total = total as usize;
            let mut pts = Vec::with_capacity(total);
            for flat in 0..total {
                let mut unit = vec![0.0; nf];
                let mut rem = flat;
                for d in (0..nf).rev() {
                    let idx = rem % k;
                    rem /= k;
                    unit[d] = idx as f64 / (k - 1) as f64;
                }
                pts.push(space.point_from_unit(unit)?);
            }
            pts
        }
        PoolSpec::Quasirandom { size, seed } => {
            if *size < 1 {
                return Err(Error::InvalidPoolSpec("quasirandom_size must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let shifts: Vec<f64> = (0..nf).map(|_| rng.gen::<f64>()).collect();
            let mut pts = Vec::with_capacity(*size);
            for i in 0..*size {
                let unit: Vec<f64> = (0..nf)
                    .map(|d| {
                        let h = van_der_corput(i as u64 + 1, HALTON_PRIMES[d % HALTON_PRIMES.len()]);
                        (h + shifts[d]).fract()
                    })
                    .collect();
                pts.push(space.point_from_unit(unit)?);
            }
            pts
        }
    };
    Ok(CandidatePool {
        points,
        labeled: BTreeSet::new(),
        source: match spec {
            PoolSpec::Grid { .. } => PoolSource::Grid,
            PoolSpec::Quasirandom { .. } => PoolSource::Quasirandom,
        },
    })
}

const HALTON_PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn van_der_corput(mut n: u64, base: u64) -> f64 {
    let mut q = 0.0;
    let mut bk = 1.0 / base as f64;
    while n > 0 {
        q += (n % base) as f64 * bk;
        n /= base;
        bk /= base as f64;
    }
    q
}

/// Rule for the number of initialization points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitRule {
    FourNf,
    TwoNf,
    Fixed(usize),
}

/// Number of initialization points implied by a rule.
pub fn default_initial_count(rule: InitRule, n_features: usize) -> usize {
    match rule {
        InitRule::FourNf => 4 * n_features,
        InitRule::TwoNf => 2 * n_features,
        InitRule::Fixed(k) => k,
    }
}

/// Deterministic initialization: the pool point nearest the unit-cube
/// centroid, then `n0 - 1` greedy-input selections. Ties break to the
/// lowest pool index.
pub fn initial_design(pool: &CandidatePool, n0: usize) -> Result<Vec<usize>> {
    if !pool.labeled.is_empty() || n0 < 1 || n0 > pool.len() {
        return Err(Error::InvalidInitialDesign {
            n0,
            pool_size: pool.len(),
        });
    }
    let nf = pool.points[0].unit.len();
    let centroid = vec![0.5; nf];

    let mut chosen: Vec<usize> = Vec::with_capacity(n0);
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, p) in pool.points.iter().enumerate() {
        let d = euclidean_distance(&p.unit, &centroid);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    chosen.push(best);

    // Greedy sampling on inputs: maximize the min distance to chosen points.
    let mut min_dist: Vec<f64> = pool
        .points
        .iter()
        .map(|p| euclidean_distance(&p.unit, &pool.points[best].unit))
        .collect();
    while chosen.len() < n0 {
        let mut next = None;
        let mut next_score = -1.0;
        for (i, &d) in min_dist.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if d > next_score {
                next_score = d;
                next = Some(i);
            }
        }
        let next = next.expect("pool not exhausted");
        chosen.push(next);
        for (i, p) in pool.points.iter().enumerate() {
            let d = euclidean_distance(&p.unit, &pool.points[next].unit);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    Ok(chosen)
}
