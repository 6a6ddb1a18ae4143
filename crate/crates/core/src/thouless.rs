//! Logarithmic potentials `L(E) = ∫ log|E′ − E| dν(E′)` of measures and
//! densities.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::measures::curve::{mollify, DensityCurve, EnergyGrid};
use crate::measures::kernel::{self, MAX_ORDER};
use crate::operator::EmpiricalMeasure;
use crate::quadrature::GaussLegendre;

/// Atoms closer than this to the evaluation point are nudged.
pub const NUDGE_RADIUS: f64 = 1e-13;

/// Relative displacement applied to nudged atoms.
pub const NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPotential {
    pub value: f64,
    pub nudged: bool,
}

/// `Σ w_i log|a_i − E|`, with atoms within [`NUDGE_RADIUS`] of `E` moved to
/// distance `NUDGE·max(1, |E|)`.
pub fn log_potential(nu: &EmpiricalMeasure, e: f64) -> LogPotential {
    let floor = NUDGE * e.abs().max(1.0);
    let mut nudged = false;
    let mut value = 0.0;
    for (a, w) in nu.atoms().iter().zip(nu.weights()) {
        let d = (a - e).abs();
        let d = if d < NUDGE_RADIUS {
            nudged = true;
            floor
        } else {
            d
        };
        value += w * d.ln();
    }
    LogPotential { value, nudged }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogPotentialCurve {
    pub curve: DensityCurve,
    /// Grid indices where an atom had to be nudged.
    pub nudged: Vec<usize>,
}

impl LogPotentialCurve {
    pub fn values(&self) -> &[f64] {
        self.curve.values()
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.curve.grid
    }
}

pub fn thouless_curve(nu: &EmpiricalMeasure, grid: &EnergyGrid) -> Result<LogPotentialCurve> {
    let evals: Vec<LogPotential> = (0..grid.len)
        .into_par_iter()
        .map(|g| log_potential(nu, grid.point(g)))
        .collect();
    let nudged = evals
        .iter()
        .enumerate()
        .filter(|(_, p)| p.nudged)
        .map(|(i, _)| i)
        .collect();
    let values = evals.into_iter().map(|p| p.value).collect();
    Ok(LogPotentialCurve {
        curve: DensityCurve::from_values(*grid, values)?,
        nudged,
    })
}

// Hermite basis on [0, 1] in monomial form: h00, h10, h01, h11.
const HERMITE: [[f64; 4]; 4] = [
    [1.0, 0.0, -3.0, 2.0],
    [0.0, 1.0, -2.0, 1.0],
    [0.0, 0.0, 3.0, -2.0],
    [0.0, 0.0, -1.0, 1.0],
];
const HERMITE_MASS: [f64; 4] = [0.5, 1.0 / 12.0, 0.5, -1.0 / 12.0];

fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// `∫_0^1 H_b(t) log|t + d| dt` for the four Hermite basis polynomials.
fn cell_log_moments(d: i64) -> [f64; 4] {
    let mut out = [0.0; 4];
    match d {
        0 => {
            // ∫ t^k log t = −1/(k+1)²
            for (o, h) in out.iter_mut().zip(HERMITE) {
                *o = h
                    .iter()
                    .enumerate()
                    .map(|(k, c)| -c / ((k + 1) * (k + 1)) as f64)
                    .sum();
            }
        }
        -1 => {
            // ∫ t^k log(1 − t) = −H_{k+1}/(k+1)
            for (o, h) in out.iter_mut().zip(HERMITE) {
                *o = h
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let harmonic: f64 = (1..=k + 1).map(|i| 1.0 / i as f64).sum();
                        -c * harmonic / (k + 1) as f64
                    })
                    .sum();
            }
        }
        _ => {
            let df = d as f64;
            for (o, h) in out.iter_mut().zip(HERMITE) {
                *o = gl16().integrate(0.0, 1.0, |t| {
                    let p = ((h[3] * t + h[2]) * t + h[1]) * t + h[0];
                    p * (t + df).abs().ln()
                });
            }
        }
    }
    out
}

/// Log-potential of the density carried by `f` (and its derivatives):
/// order `j` of the result is `∫ log|x − E| f^{(j)}(x) dx` on the grid
/// nodes, integrating the cubic Hermite interpolant of `f^{(j)}` exactly
/// against the logarithm. Requires `f` to carry order `j_max + 1` and to
/// vanish at both grid ends.
pub fn density_log_potential(f: &DensityCurve, j_max: usize) -> Result<DensityCurve> {
    let grid = f.grid;
    if grid.len < 2 {
        return Err(LabError::param("grid.size", "need at least two points"));
    }
    if f.order() < j_max + 1 {
        return Err(LabError::GridMismatch(format!(
            "need derivative order {} on the density, have {}",
            j_max + 1,
            f.order()
        )));
    }
    let g = grid.len as i64;
    let h = grid.step;
    let log_h = h.ln();
    // moments[d + g − 1] for d = i − m in [−(g − 1), g − 2]
    let moments: Vec<[f64; 4]> = (-(g - 1)..=(g - 2))
        .into_par_iter()
        .map(cell_log_moments)
        .collect();
    let mut orders = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let v = f.deriv(j);
        let dv = f.deriv(j + 1);
        // per-cell Hermite coefficients
        let cells: Vec<[f64; 4]> = (0..grid.len - 1)
            .map(|i| [v[i], h * dv[i], v[i + 1], h * dv[i + 1]])
            .collect();
        let mass: f64 = cells
            .iter()
            .map(|c| c.iter().zip(HERMITE_MASS).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let out: Vec<f64> = (0..grid.len)
            .into_par_iter()
            .map(|m| {
                let mut acc = 0.0;
                for (i, c) in cells.iter().enumerate() {
                    let k = &moments[(i as i64 - m as i64 + g - 1) as usize];
                    acc += c[0] * k[0] + c[1] * k[1] + c[2] * k[2] + c[3] * k[3];
                }
                h * (acc + log_h * mass)
            })
            .collect();
        orders.push(out);
    }
    DensityCurve::new(grid, orders)
}

/// `S_ε L`: the log-potential of `S_ε ν`, values only.
pub fn smoothed_lyapunov(
    nu: &EmpiricalMeasure,
    eps: f64,
    grid: &EnergyGrid,
) -> Result<DensityCurve> {
    let f = mollify(nu, eps, grid, 1)?;
    density_log_potential(&f, 0)
}

/// `∫_{−ε}^{ε} log|y − c| dy` for `|c| < ε`.
fn log_integral(eps: f64, c: f64) -> f64 {
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() - x } else { 0.0 };
    xlogx(eps - c) + xlogx(eps + c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeIdentity {
    /// `s_ε * L`, the energy-smoothed log-potential of `ν`.
    pub lhs: DensityCurve,
    /// Log-potential of the density `S_ε ν`.
    pub rhs: DensityCurve,
    pub sup_gap: f64,
}

/// Both sides of `s_ε * L_ν = L_{S_ε ν}`. The left side applies a
/// 129-point Gauss–Legendre rule on `[−ε, ε]` to the exact log-potential.
pub fn smoothed_le_identity(
    nu: &EmpiricalMeasure,
    eps: f64,
    grid: &EnergyGrid,
    j: usize,
) -> Result<LeIdentity> {
    smoothed_le_identity_with(nu, eps, grid, j, 1)
}

/// As [`smoothed_le_identity`], splitting `[−ε, ε]` into `panels` equal
/// panels of 129 nodes each.
pub fn smoothed_le_identity_with(
    nu: &EmpiricalMeasure,
    eps: f64,
    grid: &EnergyGrid,
    j: usize,
    panels: usize,
) -> Result<LeIdentity> {
    kernel::check_eps(eps)?;
    if j + 1 > MAX_ORDER {
        return Err(LabError::param("J", format!("at most {}", MAX_ORDER - 1)));
    }
    if panels == 0 {
        return Err(LabError::param("panels", "must be at least 1"));
    }
    let f = mollify(nu, eps, grid, j + 1)?;
    let rhs = density_log_potential(&f, j)?;

    let rule = GaussLegendre::new(129);
    let width = 2.0 * eps / panels as f64;
    let mut nodes = Vec::with_capacity(129 * panels);
    for p in 0..panels {
        let a = -eps + p as f64 * width;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push((a + 0.5 * width * (x + 1.0), 0.5 * width * w));
        }
    }
    let inv = 1.0 / eps;
    let kernel_weights: Vec<Vec<f64>> = nodes
        .iter()
        .map(|(y, w)| {
            let mut buf = [0.0; MAX_ORDER + 1];
            kernel::unit_derivatives(y * inv, j, &mut buf);
            (0..=j)
                .map(|k| w * buf[k] * inv.powi(1 + k as i32))
                .collect()
        })
        .collect();
    let atoms = nu.atoms();
    let columns: Vec<Vec<f64>> = (0..grid.len)
        .into_par_iter()
        .map(|g| {
            let e = grid.point(g);
            let mut acc = vec![0.0; j + 1];
            for ((y, _), kw) in nodes.iter().zip(&kernel_weights) {
                let l = log_potential(nu, e - y).value;
                for (a, k) in acc.iter_mut().zip(kw) {
                    *a += k * l;
                }
            }
            // singularity subtraction: for each atom whose log singularity
            // c = E − a falls inside (−ε, ε), replace the rule's estimate of
            // s^{(k)}(c)·∫ log|y − c| by its closed form
            let lo = atoms.partition_point(|a| *a <= e - eps);
            let hi = atoms.partition_point(|a| *a < e + eps);
            let mut buf = [0.0; MAX_ORDER + 1];
            for i in lo..hi {
                let c = e - atoms[i];
                let w = nu.weights()[i];
                kernel::unit_derivatives(c * inv, j, &mut buf);
                let rule_part: f64 = nodes
                    .iter()
                    .map(|(y, wy)| wy * (y - c).abs().max(NUDGE).ln())
                    .sum();
                let exact = log_integral(eps, c);
                for (k, a) in acc.iter_mut().enumerate() {
                    let sk = buf[k] * inv.powi(1 + k as i32);
                    *a += w * sk * (exact - rule_part);
                }
            }
            acc
        })
        .collect();
    let mut orders = vec![Vec::with_capacity(grid.len); j + 1];
    for col in columns {
        for (o, v) in orders.iter_mut().zip(col) {
            o.push(v);
        }
    }
    let lhs = DensityCurve::new(*grid, orders)?;
    let sup_gap = lhs
        .values()
        .iter()
        .zip(rhs.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(LeIdentity { lhs, rhs, sup_gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses() {
        let p = log_potential(&EmpiricalMeasure::dirac(0.0), 2.0);
        assert!((p.value - 2f64.ln()).abs() < 1e-15 && !p.nudged);
        let two = EmpiricalMeasure::uniform(vec![-1.0, 1.0]).unwrap();
        assert_eq!(log_potential(&two, 0.0).value, 0.0);
    }

    #[test]
    fn nudging_is_flagged_and_finite() {
        let p = log_potential(&EmpiricalMeasure::dirac(0.5), 0.5);
        assert!(p.nudged);
        assert!((p.value - 1e-12f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn curve_on_symmetric_grid() {
        let grid = EnergyGrid::linspace(-10.0, 10.0, 2).unwrap();
        let c = thouless_curve(&EmpiricalMeasure::dirac(0.0), &grid).unwrap();
        for v in c.values() {
            assert!((v - 10f64.ln()).abs() < 1e-15);
        }
        assert!(c.nudged.is_empty());
    }

    #[test]
    fn moments_match_quadrature() {
        // regular cells against fine composite quadrature
        for d in [1i64, 2, -2, -7, 40] {
            let m = cell_log_moments(d);
            for (b, h) in HERMITE.iter().enumerate() {
                let q = GaussLegendre::new(32).integrate_composite(0.0, 1.0, 64, |t| {
                    (((h[3] * t + h[2]) * t + h[1]) * t + h[0]) * (t + d as f64).abs().ln()
                });
                assert!((m[b] - q).abs() < 1e-13, "d={d} b={b}");
            }
        }
        // ∫_0^1 log t = −1 and ∫_0^1 log(1 − t) = −1 on the constant
        let m0 = cell_log_moments(0);
        let m1 = cell_log_moments(-1);
        assert!((m0[0] + m0[2] + 1.0).abs() < 1e-15);
        assert!((m1[0] + m1[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_potential_of_a_bump() {
        // L_{s_ε}(E) for E far outside the support is ≈ log|E|
        let grid = EnergyGrid::linspace(-3.0, 3.0, 1201).unwrap();
        let f = mollify(&EmpiricalMeasure::dirac(0.0), 0.5, &grid, 1).unwrap();
        let l = density_log_potential(&f, 0).unwrap();
        let direct = GaussLegendre::new(64).integrate_composite(-0.5, 0.5, 8, |y| {
            kernel::kernel_eval(0.5, y, 0).unwrap() * (3.0 - y).ln()
        });
        assert!((l.values()[1200] - direct).abs() < 1e-9);
    }
}
