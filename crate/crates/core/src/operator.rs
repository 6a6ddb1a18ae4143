//! Finite Dirichlet truncations of `H_ω = Δ + V_ω`, eigenvalue counting,
//! and the empirical density-of-states measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::System;
use crate::error::{LabError, Result};
use crate::sampler::Sampler;

/// Symmetric tridiagonal matrix with unit off-diagonal (the discrete
/// Laplacian) and the potential on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    diag: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(LabError::param("N", "matrix must have at least one row"));
        }
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(LabError::param("diag", "entries must be finite"));
        }
        Ok(Self { diag })
    }

    pub fn free(n: usize) -> Self {
        Self { diag: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Gershgorin interval `[min(diag) − 2, max(diag) + 2]`.
    pub fn gershgorin(&self) -> (f64, f64) {
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let off = if self.diag.len() > 1 { 2.0 } else { 0.0 };
        (lo - off, hi + off)
    }

    fn pivot_floor(&self) -> f64 {
        let scale = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + 2.0;
        f64::EPSILON * scale
    }

    /// Number of eigenvalues `≤ e`, from the signs of the pivots of the
    /// LDLᵀ factorization of `H − e`.
    pub fn eig_count(&self, e: f64) -> usize {
        let pivmin = self.pivot_floor();
        let mut count = 0;
        let mut q = self.diag[0] - e;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for d in &self.diag[1..] {
            q = (d - e) - 1.0 / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// All eigenvalues, ascending, by bisection on [`Self::eig_count`].
    pub fn eigenvalues_bisection(&self) -> Vec<f64> {
        let n = self.dim();
        let (glo, ghi) = self.gershgorin();
        let (glo, ghi) = (glo - 1e-9, ghi + 1e-9);
        let mut out = Vec::with_capacity(n);
        let mut lo = glo;
        for k in 0..n {
            // smallest x with count(x) ≥ k + 1
            let mut a = lo;
            let mut b = ghi;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if self.eig_count(mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let x = 0.5 * (a + b);
            out.push(x);
            lo = a;
        }
        out
    }

    /// All eigenvalues, ascending, by implicit-shift QL iteration. This is
    /// the fast path used by the pipelines; it agrees with the bisection
    /// route to rounding.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let mut d = self.diag.clone();
        if n == 1 {
            return d;
        }
        // e[i] couples i and i + 1
        let mut e = vec![1.0f64; n];
        e[n - 1] = 0.0;
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    // not reached for unit off-diagonals in practice
                    break;
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = (g * g + 1.0).sqrt();
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut underflow = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = (f * f + g * g).sqrt();
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if underflow {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(f64::total_cmp);
        d
    }
}

/// Finite atomic probability measure on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    /// `cumulative[i] = Σ_{k ≤ i} weights[k]`
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for EmpiricalMeasure {
    type Error = LabError;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        EmpiricalMeasure::new(raw.atoms, raw.weights)
    }
}

impl From<EmpiricalMeasure> for RawMeasure {
    fn from(m: EmpiricalMeasure) -> Self {
        RawMeasure {
            atoms: m.atoms,
            weights: m.weights,
        }
    }
}

impl EmpiricalMeasure {
    /// Validating constructor: sorts, coalesces equal atoms, and requires
    /// positive finite weights summing to 1 within 1e−12.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LabError::param("atoms", "measure has no atoms"));
        }
        if atoms.len() != weights.len() {
            return Err(LabError::param("weights", "length differs from atoms"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(LabError::param("atoms", "atoms must be finite"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(LabError::param("weights", "weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::param(
                "weights",
                format!("weights sum to {total}, not 1"),
            ));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted_pairs(pairs))
    }

    /// Equal weights `1/len` on the given (unsorted) atoms.
    pub fn uniform(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LabError::param("atoms", "measure has no atoms"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(LabError::param("atoms", "atoms must be finite"));
        }
        atoms.sort_by(f64::total_cmp);
        let w = 1.0 / atoms.len() as f64;
        Ok(Self::from_sorted_pairs(
            atoms.into_iter().map(|a| (a, w)).collect(),
        ))
    }

    pub fn dirac(at: f64) -> Self {
        Self::from_sorted_pairs(vec![(at, 1.0)])
    }

    fn from_sorted_pairs(pairs: Vec<(f64, f64)>) -> Self {
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match atoms.last() {
                Some(&last) if last == a => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self {
            atoms,
            weights,
            cumulative,
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Integrated density `ν((−∞, e])`.
    pub fn ids(&self, e: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| *a <= e);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Push-forward under `x ↦ x + c`.
    pub fn translate(&self, c: f64) -> Self {
        Self::from_sorted_pairs(
            self.atoms
                .iter()
                .zip(&self.weights)
                .map(|(a, w)| (a + c, *w))
                .collect(),
        )
    }

    /// Mixture `Σ_k p_k · translate(self, s_k)` with `Σ p_k = 1`.
    pub fn translated_mixture(&self, shifts: &[f64], probs: &[f64]) -> Result<Self> {
        if shifts.is_empty() || shifts.len() != probs.len() {
            return Err(LabError::param("shifts", "need one probability per shift"));
        }
        let mut pairs = Vec::with_capacity(self.len() * shifts.len());
        for (s, p) in shifts.iter().zip(probs) {
            for (a, w) in self.atoms.iter().zip(&self.weights) {
                pairs.push((a + s, w * p));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted_pairs(pairs))
    }

    /// Wasserstein-1 distance `∫ |F − G| dx` between two atomic measures.
    pub fn wasserstein1(&self, other: &Self) -> f64 {
        let mut xs: Vec<f64> = self.atoms.iter().chain(&other.atoms).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.windows(2)
            .map(|w| (self.ids(w[0]) - other.ids(w[0])).abs() * (w[1] - w[0]))
            .sum()
    }
}

/// `v(T^j ω)` for `j = 0..n`.
pub fn potential_window<S: Sampler + ?Sized>(
    v: &S,
    system: &System,
    omega: crate::dynamics::Point,
    n: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(LabError::param("N", "window must be at least 1"));
    }
    let coords = system.orbit(omega, n)?;
    Ok(coords.into_iter().map(|x| v.eval(x)).collect())
}

/// Pooled eigenvalues of `m` truncations of size `n` at μ-random base
/// points, each with weight `1/(n·m)`.
pub fn empirical_dos<S: Sampler + ?Sized>(
    v: &S,
    system: &System,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    if n < 8 {
        return Err(LabError::param("numerics.N", "window must be at least 8"));
    }
    if m == 0 {
        return Err(LabError::param("numerics.M", "need at least one sample"));
    }
    let points = system.sample_points(m, seed);
    let spectra: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| {
            let diag = potential_window(v, system, *p, n)?;
            Ok(TridiagonalMatrix::new(diag)?.eigenvalues())
        })
        .collect::<Result<_>>()?;
    let mut atoms: Vec<f64> = spectra.into_iter().flatten().collect();
    atoms.sort_by(f64::total_cmp);
    let w = 1.0 / atoms.len() as f64;
    Ok(EmpiricalMeasure::from_sorted_pairs(
        atoms.into_iter().map(|a| (a, w)).collect(),
    ))
}

/// Free IDS `1 − arccos(E/2)/π` on `[−2, 2]`.
pub fn free_ids(e: f64) -> f64 {
    if e <= -2.0 {
        0.0
    } else if e >= 2.0 {
        1.0
    } else {
        1.0 - (e / 2.0).acos() / std::f64::consts::PI
    }
}
