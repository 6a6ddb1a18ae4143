use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operator::EmpiricalMeasure;

/// Disjoint sorted closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct BandSet {
    bands: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for BandSet {
    type Error = LabError;
    fn try_from(bands: Vec<[f64; 2]>) -> Result<Self> {
        BandSet::new(bands)
    }
}

impl From<BandSet> for Vec<[f64; 2]> {
    fn from(b: BandSet) -> Self {
        b.bands
    }
}

impl BandSet {
    pub fn new(bands: Vec<[f64; 2]>) -> Result<Self> {
        for (i, [l, r]) in bands.iter().enumerate() {
            if !l.is_finite() || !r.is_finite() || r < l {
                return Err(LabError::param("bands", format!("band {i} is [{l}, {r}]")));
            }
            if i > 0 && *l <= bands[i - 1][1] {
                return Err(LabError::param(
                    "bands",
                    format!("band {i} overlaps or is out of order"),
                ));
            }
        }
        Ok(Self { bands })
    }

    pub fn empty() -> Self {
        Self { bands: Vec::new() }
    }

    pub fn bands(&self) -> &[[f64; 2]] {
        &self.bands
    }

    pub fn count(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.bands.iter().map(|[l, r]| r - l).collect()
    }

    pub fn min_length(&self) -> Option<f64> {
        self.lengths().into_iter().reduce(f64::min)
    }

    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.bands.first()?[0], self.bands.last()?[1]))
    }

    pub fn contains(&self, x: f64) -> bool {
        let idx = self.bands.partition_point(|b| b[0] <= x);
        idx > 0 && x <= self.bands[idx - 1][1]
    }

    /// Distance from `x` to the nearest band endpoint.
    pub fn edge_distance(&self, x: f64) -> f64 {
        self.bands
            .iter()
            .flat_map(|[l, r]| [(x - l).abs(), (x - r).abs()])
            .fold(f64::INFINITY, f64::min)
    }

    /// Widens every band by `by` on both sides, merging overlaps.
    pub fn expand(&self, by: f64) -> Self {
        let mut out: Vec<[f64; 2]> = Vec::with_capacity(self.bands.len());
        for [l, r] in &self.bands {
            let (l, r) = (l - by, r + by);
            match out.last_mut() {
                Some(last) if l <= last[1] => last[1] = last[1].max(r),
                _ => out.push([l, r]),
            }
        }
        Self { bands: out }
    }

    /// Every band of `self` contains at least one band of `earlier`.
    pub fn each_contains_one_of(&self, earlier: &BandSet) -> bool {
        self.bands
            .iter()
            .all(|[l, r]| earlier.bands.iter().any(|[el, er]| *l <= *el && *er <= *r))
    }

    /// Largest distance from a point of the bands to the nearest atom of
    /// `nu`: the resolution at which `supp ν` is dense in the bands.
    pub fn covering_radius(&self, nu: &EmpiricalMeasure) -> f64 {
        let atoms = nu.atoms();
        let nearest = |x: f64| {
            let i = atoms.partition_point(|a| *a < x);
            let mut d = f64::INFINITY;
            if i < atoms.len() {
                d = d.min(atoms[i] - x);
            }
            if i > 0 {
                d = d.min(x - atoms[i - 1]);
            }
            d
        };
        let mut worst: f64 = 0.0;
        for [l, r] in &self.bands {
            worst = worst.max(nearest(*l)).max(nearest(*r));
            let lo = atoms.partition_point(|a| *a < *l);
            let hi = atoms.partition_point(|a| *a <= *r);
            for w in atoms[lo..hi].windows(2) {
                worst = worst.max(0.5 * (w[1] - w[0]));
            }
        }
        worst
    }
}

/// Merges atoms closer than `gap_tol` into intervals and discards every
/// resulting cluster of total weight `≤ weight_tol`.
pub fn support_bands(nu: &EmpiricalMeasure, gap_tol: f64, weight_tol: f64) -> Result<BandSet> {
    if !(gap_tol > 0.0) {
        return Err(LabError::param("gap_tol", "must be positive"));
    }
    if !(weight_tol >= 0.0) {
        return Err(LabError::param("weight_tol", "must be nonnegative"));
    }
    let atoms = nu.atoms();
    let weights = nu.weights();
    let mut bands = Vec::new();
    let mut start = 0;
    for i in 0..atoms.len() {
        let closes = i + 1 == atoms.len() || atoms[i + 1] - atoms[i] >= gap_tol;
        if closes {
            let mass: f64 = weights[start..=i].iter().sum();
            if mass > weight_tol {
                bands.push([atoms[start], atoms[i]]);
            }
            start = i + 1;
        }
    }
    BandSet::new(bands)
}

/// Support of `S_ε ν` after shedding light clusters: atoms closer than
/// `2ε` share a component, each widened by `ε`.
pub fn smoothed_support(nu: &EmpiricalMeasure, eps: f64, weight_tol: f64) -> Result<BandSet> {
    Ok(support_bands(nu, 2.0 * eps, weight_tol)?.expand(eps))
}
