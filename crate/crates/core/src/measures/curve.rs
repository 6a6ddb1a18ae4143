use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{self, check_eps, normalization, MAX_ORDER};
use crate::error::{LabError, Result};
use crate::operator::EmpiricalMeasure;

/// Equispaced energies `start + i·step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl EnergyGrid {
    /// `len` points from `lo` to `hi` inclusive; a single point sits at the
    /// midpoint.
    pub fn linspace(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(LabError::param("grid.size", "must be at least 1"));
        }
        if !(lo.is_finite() && hi.is_finite()) || (len > 1 && hi <= lo) {
            return Err(LabError::param(
                "grid",
                format!("invalid bounds [{lo}, {hi}]"),
            ));
        }
        if len == 1 {
            return Ok(Self {
                start: 0.5 * (lo + hi),
                step: 0.0,
                len,
            });
        }
        Ok(Self {
            start: lo,
            step: (hi - lo) / (len - 1) as f64,
            len,
        })
    }

    /// Same spacing, shifted by `fraction` of a step.
    pub fn offset(&self, fraction: f64) -> Self {
        Self {
            start: self.start + fraction * self.step,
            ..*self
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    pub fn lo(&self) -> f64 {
        self.start
    }

    pub fn hi(&self) -> f64 {
        self.point(self.len - 1)
    }

    pub fn translate(&self, c: f64) -> Self {
        Self {
            start: self.start + c,
            ..*self
        }
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.len == other.len
            && (self.start - other.start).abs() <= 1e-12 * (1.0 + self.start.abs())
            && (self.step - other.step).abs() <= 1e-12 * (1.0 + self.step.abs())
    }
}

/// A function sampled on an energy grid together with its derivatives up
/// to order `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: EnergyGrid,
    /// `orders[0]` holds the values, `orders[j]` the `j`-th derivative.
    orders: Vec<Vec<f64>>,
}

impl DensityCurve {
    pub fn new(grid: EnergyGrid, orders: Vec<Vec<f64>>) -> Result<Self> {
        if orders.is_empty() {
            return Err(LabError::param("curve", "needs at least the values"));
        }
        if orders.iter().any(|o| o.len() != grid.len) {
            return Err(LabError::GridMismatch(
                "derivative arrays must match the grid length".into(),
            ));
        }
        Ok(Self { grid, orders })
    }

    pub fn from_values(grid: EnergyGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, vec![values])
    }

    /// Highest derivative order carried.
    pub fn order(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.orders[0]
    }

    pub fn deriv(&self, j: usize) -> &[f64] {
        &self.orders[j]
    }

    pub fn orders(&self) -> &[Vec<f64>] {
        &self.orders
    }

    /// Trapezoidal integral of the values.
    pub fn mass(&self) -> f64 {
        let v = self.values();
        if v.len() < 2 {
            return 0.0;
        }
        let inner: f64 = v[1..v.len() - 1].iter().sum();
        self.grid.step * (inner + 0.5 * (v[0] + v[v.len() - 1]))
    }

    /// Running trapezoidal integral, starting at 0 on the first node.
    pub fn cumulative(&self) -> Vec<f64> {
        let v = self.values();
        let mut out = Vec::with_capacity(v.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in v.windows(2) {
            acc += 0.5 * self.grid.step * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index and value of the smallest entry.
    pub fn argmin(&self) -> (usize, f64) {
        self.values()
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (i, v)| if v < best.1 { (i, v) } else { best },
            )
    }

    /// Keeps derivative orders `0..=j`.
    pub fn truncated(&self, j: usize) -> Self {
        Self {
            grid: self.grid,
            orders: self.orders[..=j.min(self.order())].to_vec(),
        }
    }
}

/// Density of `S_ε ν` and its derivatives up to order `j_max`.
pub fn mollify(
    nu: &EmpiricalMeasure,
    eps: f64,
    grid: &EnergyGrid,
    j_max: usize,
) -> Result<DensityCurve> {
    check_eps(eps)?;
    if j_max > MAX_ORDER {
        return Err(LabError::param("J", format!("at most {MAX_ORDER}")));
    }
    let need_lo = nu.min_atom() - eps;
    let need_hi = nu.max_atom() + eps;
    let slack = 1e-12 * (1.0 + need_lo.abs().max(need_hi.abs()));
    if grid.lo() > need_lo + slack || grid.hi() < need_hi - slack {
        return Err(LabError::GridCoverage {
            lo: grid.lo(),
            hi: grid.hi(),
            need_lo,
            need_hi,
        });
    }
    let atoms = nu.atoms();
    let weights = nu.weights();
    let inv = 1.0 / eps;
    let scales: Vec<f64> = (0..=j_max).map(|j| inv.powi(1 + j as i32)).collect();
    let columns: Vec<Vec<f64>> = (0..grid.len)
        .into_par_iter()
        .map(|g| {
            let x = grid.point(g);
            let lo = atoms.partition_point(|a| *a <= x - eps);
            let hi = atoms.partition_point(|a| *a < x + eps);
            let mut acc = vec![0.0; j_max + 1];
            let mut buf = [0.0; MAX_ORDER + 1];
            for i in lo..hi {
                unit_derivatives_fast((x - atoms[i]) * inv, j_max, &mut buf);
                for j in 0..=j_max {
                    acc[j] += weights[i] * buf[j];
                }
            }
            for (a, s) in acc.iter_mut().zip(&scales) {
                *a *= s;
            }
            acc
        })
        .collect();
    let mut orders = vec![Vec::with_capacity(grid.len); j_max + 1];
    for col in columns {
        for (o, v) in orders.iter_mut().zip(col) {
            o.push(v);
        }
    }
    DensityCurve::new(*grid, orders)
}

/// As [`kernel::unit_derivatives`], with one exponential per call.
fn unit_derivatives_fast(x: f64, j_max: usize, out: &mut [f64]) {
    let u = 1.0 - x * x;
    if u <= 0.0 {
        out[..=j_max].iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let e = normalization() * (-1.0 / u).exp();
    if e == 0.0 {
        out[..=j_max].iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let inv_u2 = 1.0 / (u * u);
    let polys = kernel::derivative_polynomials();
    let mut pow = e;
    for (j, o) in out.iter_mut().enumerate().take(j_max + 1) {
        let p = &polys[j];
        let val = p.iter().rev().fold(0.0, |acc, c| acc * x + c);
        *o = val * pow;
        pow *= inv_u2;
    }
}

/// Tabulated unit-kernel CDF with cubic Hermite interpolation (the
/// density supplies the node slopes).
fn cdf_table() -> &'static (Vec<f64>, Vec<f64>) {
    static T: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    T.get_or_init(|| {
        let n = CDF_NODES;
        let mut vals = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let t = -1.0 + 2.0 * i as f64 / n as f64;
            vals.push(kernel::unit_cdf(t));
            slopes.push(kernel::unit_derivative(t, 0));
        }
        (vals, slopes)
    })
}

const CDF_NODES: usize = 8192;

/// Fast unit-kernel CDF, accurate to ~1e−14.
pub fn unit_cdf_fast(t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let (vals, slopes) = cdf_table();
    let h = 2.0 / CDF_NODES as f64;
    let pos = (t + 1.0) / h;
    let i = (pos as usize).min(CDF_NODES - 1);
    let s = pos - i as f64;
    let (y0, y1) = (vals[i], vals[i + 1]);
    let (m0, m1) = (slopes[i] * h, slopes[i + 1] * h);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * m1
}

/// `(S_ε ν)((−∞, x])`, exactly through the kernel CDF.
pub fn mollified_ids(nu: &EmpiricalMeasure, eps: f64, x: f64) -> f64 {
    let atoms = nu.atoms();
    let weights = nu.weights();
    let lo = atoms.partition_point(|a| *a <= x - eps);
    let hi = atoms.partition_point(|a| *a < x + eps);
    let below = if lo == 0 { 0.0 } else { nu.ids(atoms[lo - 1]) };
    let inv = 1.0 / eps;
    let mut partial = 0.0;
    for i in lo..hi {
        partial += weights[i] * unit_cdf_fast((x - atoms[i]) * inv);
    }
    below + partial
}

/// Truncated C∞ distance `Σ_{j≤J} 2^{−j} min(‖f^{(j)} − g^{(j)}‖_∞, 1)`.
pub fn cinf_dist(f: &DensityCurve, g: &DensityCurve, j_max: usize) -> Result<f64> {
    Ok(cinf_terms(f, g, j_max)?
        .iter()
        .enumerate()
        .map(|(j, d)| d.min(1.0) * 0.5f64.powi(j as i32))
        .sum())
}

/// Per-order sup distances `‖f^{(j)} − g^{(j)}‖_∞`, `j ≤ J`.
pub fn cinf_terms(f: &DensityCurve, g: &DensityCurve, j_max: usize) -> Result<Vec<f64>> {
    if !f.grid.same_as(&g.grid) {
        return Err(LabError::GridMismatch(format!(
            "{:?} vs {:?}",
            f.grid, g.grid
        )));
    }
    if f.order() < j_max || g.order() < j_max {
        return Err(LabError::GridMismatch(format!(
            "curves carry orders {} and {}, need {j_max}",
            f.order(),
            g.order()
        )));
    }
    Ok((0..=j_max)
        .map(|j| {
            f.deriv(j)
                .iter()
                .zip(g.deriv(j))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::kernel::kernel_eval;

    #[test]
    fn fast_derivatives_match_reference() {
        let mut a = [0.0; MAX_ORDER + 1];
        let mut b = [0.0; MAX_ORDER + 1];
        for x in [-0.95, -0.5, 0.0, 0.3, 0.99] {
            unit_derivatives_fast(x, 10, &mut a);
            kernel::unit_derivatives(x, 10, &mut b);
            for j in 0..=10 {
                assert!((a[j] - b[j]).abs() <= 1e-12 * b[j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn dirac_mollifies_to_the_kernel() {
        let grid = EnergyGrid::linspace(-1.0, 1.0, 801).unwrap();
        let eps = 0.3;
        let curve = mollify(&EmpiricalMeasure::dirac(0.0), eps, &grid, 4).unwrap();
        for (i, x) in grid.points().into_iter().enumerate() {
            for j in 0..=4 {
                let want = kernel_eval(eps, x, j).unwrap();
                assert!((curve.deriv(j)[i] - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn two_point_measure_gives_two_bumps() {
        let nu = EmpiricalMeasure::uniform(vec![-1.0, 1.0]).unwrap();
        let grid = EnergyGrid::linspace(-2.0, 2.0, 4001).unwrap();
        let curve = mollify(&nu, 0.5, &grid, 0).unwrap();
        let cum = curve.cumulative();
        let mid = grid.len / 2;
        assert!(curve.values()[mid] == 0.0);
        assert!((cum[mid] - 0.5).abs() < 1e-8);
        assert!((curve.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coverage_is_enforced() {
        let grid = EnergyGrid::linspace(-1.0, 1.0, 101).unwrap();
        let nu = EmpiricalMeasure::dirac(0.9);
        assert!(matches!(
            mollify(&nu, 0.2, &grid, 2),
            Err(LabError::GridCoverage { .. })
        ));
    }

    #[test]
    fn cdf_table_is_accurate() {
        for t in [-0.99, -0.5, -0.123, 0.0, 0.4, 0.77] {
            assert!((unit_cdf_fast(t) - kernel::unit_cdf(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn mollified_ids_matches_integrated_density() {
        let nu = EmpiricalMeasure::uniform(vec![-0.3, 0.0, 0.05, 0.4]).unwrap();
        let grid = EnergyGrid::linspace(-1.0, 1.0, 20_001).unwrap();
        let curve = mollify(&nu, 0.2, &grid, 1).unwrap();
        let cum = curve.cumulative();
        let f1 = curve.deriv(1);
        let h = grid.step;
        for i in (0..grid.len).step_by(997) {
            let x = grid.point(i);
            // Euler–Maclaurin endpoint correction of the trapezoid rule
            let corrected = cum[i] - h * h / 12.0 * (f1[i] - f1[0]);
            let exact = mollified_ids(&nu, 0.2, x);
            assert!(
                (corrected - exact).abs() < 1e-11,
                "{x}: {corrected} vs {exact}"
            );
        }
    }

    #[test]
    fn saturated_distance() {
        let grid = EnergyGrid::linspace(0.0, 1.0, 11).unwrap();
        let j = 5;
        let f = DensityCurve::new(grid, vec![vec![0.0; 11]; j + 1]).unwrap();
        let g = DensityCurve::new(grid, vec![vec![3.0; 11]; j + 1]).unwrap();
        let d = cinf_dist(&f, &g, j).unwrap();
        assert!((d - (2.0 - 0.5f64.powi(j as i32))).abs() < 1e-15);
        assert_eq!(cinf_dist(&f, &f, j).unwrap(), 0.0);
        let other = DensityCurve::new(grid.translate(0.5), vec![vec![0.0; 11]; j + 1]).unwrap();
        assert!(cinf_dist(&f, &other, j).is_err());
        assert!(cinf_dist(&f, &g, j + 1).is_err());
    }
}
