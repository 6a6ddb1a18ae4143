//! The fixed bump kernel `s(x) = c·exp(−1/(1−x²))` on (−1, 1), its
//! derivatives, rescalings and cumulative distribution.

use std::sync::OnceLock;

use crate::error::{LabError, Result};
use crate::quadrature::{adaptive_simpson, GaussLegendre};

/// Highest derivative order supported.
pub const MAX_ORDER: usize = 16;

/// Default truncation order of the C∞ metric.
pub const DEFAULT_J: usize = 8;

fn unnormalized(x: f64) -> f64 {
    let u = 1.0 - x * x;
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

/// Coefficients (ascending powers) of the polynomials `P_j` with
/// `s^{(j)}(x) = c·exp(−1/u)·P_j(x)/u^{2j}`, `u = 1 − x²`, from
/// `P_{j+1} = P_j'·u² + (4j·x·u − 2x)·P_j`.
pub(crate) fn derivative_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        // u² = 1 − 2x² + x⁴
        let u2 = [1.0, 0.0, -2.0, 0.0, 1.0];
        for j in 0..MAX_ORDER {
            let p = &polys[j];
            let dp: Vec<f64> = p
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect();
            // 4j·x·u − 2x = (4j − 2)x − 4j·x³
            let jf = j as f64;
            let lin = [0.0, 4.0 * jf - 2.0, 0.0, -4.0 * jf];
            let mut next = vec![0.0; p.len() + 4];
            for (i, a) in dp.iter().enumerate() {
                for (k, b) in u2.iter().enumerate() {
                    next[i + k] += a * b;
                }
            }
            for (i, a) in p.iter().enumerate() {
                for (k, b) in lin.iter().enumerate() {
                    next[i + k] += a * b;
                }
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            polys.push(next);
        }
        polys
    })
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// The normalizing constant `c = 1/∫ exp(−1/(1−x²)) dx`, by adaptive
/// quadrature to 1e−12.
pub fn normalization() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / adaptive_simpson(&unnormalized, -1.0, 1.0, 1e-14))
}

/// `s^{(j)}(x)` for the unit kernel.
pub fn unit_derivative(x: f64, j: usize) -> f64 {
    let u = 1.0 - x * x;
    if u <= 0.0 {
        return 0.0;
    }
    let p = horner(&derivative_polynomials()[j], x);
    if j == 0 {
        return normalization() * (-1.0 / u).exp();
    }
    let log_mag = -1.0 / u - 2.0 * j as f64 * u.ln();
    normalization() * p * log_mag.exp()
}

/// All derivatives `s^{(0..=j_max)}(x)` of the unit kernel.
pub fn unit_derivatives(x: f64, j_max: usize, out: &mut [f64]) {
    let u = 1.0 - x * x;
    if u <= 0.0 {
        out[..=j_max].iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let c = normalization();
    let polys = derivative_polynomials();
    let base = -1.0 / u;
    let lu = u.ln();
    for (j, o) in out.iter_mut().enumerate().take(j_max + 1) {
        let p = horner(&polys[j], x);
        *o = c * p * (base - 2.0 * j as f64 * lu).exp();
    }
}

/// `s_ε^{(j)}(x) = ε^{−1−j} s^{(j)}(x/ε)`.
pub fn kernel_eval(eps: f64, x: f64, j: usize) -> Result<f64> {
    check_eps(eps)?;
    if j > MAX_ORDER {
        return Err(LabError::param(
            "J",
            format!("derivative order {j} exceeds {MAX_ORDER}"),
        ));
    }
    Ok(unit_derivative(x / eps, j) * eps.powi(-1 - j as i32))
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LabError::param(
            "eps",
            format!("must be positive, got {eps}"),
        ));
    }
    Ok(())
}

fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// `∫_{−1}^{t} s`, the unit kernel's distribution function.
pub fn unit_cdf(t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let u = t.abs();
    let panels = 16;
    let half = normalization() * gl20().integrate_composite(0.0, u, panels, unnormalized);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Quantile of the unit kernel by bisection on [`unit_cdf`].
pub fn unit_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return -1.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if p == 0.5 {
        return 0.0;
    }
    let (mut a, mut b) = (-1.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if unit_cdf(mid) < p {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Largest `|s^{(j)}|` over a fine sample of (−1, 1); used for Lipschitz
/// constants `Lip(s_ε^{(j)}) = ε^{−2−j} max|s^{(j+1)}|`.
pub fn unit_sup(j: usize) -> f64 {
    static SUPS: OnceLock<Vec<f64>> = OnceLock::new();
    let sups = SUPS.get_or_init(|| {
        let samples = 20_000;
        let mut best = [0.0f64; MAX_ORDER + 1];
        let mut buf = vec![0.0; MAX_ORDER + 1];
        for i in 1..samples {
            let x = -1.0 + 2.0 * i as f64 / samples as f64;
            unit_derivatives(x, MAX_ORDER, &mut buf);
            for (b, v) in best.iter_mut().zip(&buf) {
                *b = b.max(v.abs());
            }
        }
        // sampling can miss the peak slightly
        best.iter().map(|b| b * 1.01).collect()
    });
    sups[j]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_constant() {
        // ∫ exp(−1/(1−x²)) = 0.443993816168...
        let integral = 1.0 / normalization();
        let gl = GaussLegendre::new(64).integrate_composite(-1.0, 1.0, 32, unnormalized);
        assert!((integral - gl).abs() < 1e-12);
        assert!((integral - 0.443_993_816_168).abs() < 1e-10);
    }

    #[test]
    fn peak_value_and_scaling() {
        let s0 = kernel_eval(1.0, 0.0, 0).unwrap();
        assert!((s0 - normalization() * (-1f64).exp()).abs() < 1e-15);
        assert!((s0 - 0.828_57).abs() < 1e-5);
        let half = kernel_eval(0.5, 0.0, 0).unwrap();
        assert!((half - 2.0 * s0).abs() < 1e-14);
        assert!(kernel_eval(0.0, 0.0, 0).is_err());
        assert!(kernel_eval(-1.0, 0.0, 0).is_err());
    }

    #[test]
    fn vanishes_at_and_near_support_edge() {
        for j in 0..=DEFAULT_J {
            for eps in [1.0, 0.3] {
                assert_eq!(kernel_eval(eps, eps, j).unwrap(), 0.0);
                assert_eq!(kernel_eval(eps, -eps, j).unwrap(), 0.0);
            }
            assert!(unit_derivative(1.0 - 1e-3, j).abs() < 1e-100);
            assert!(unit_derivative(-1.0 + 1e-3, j).abs() < 1e-100);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for j in 1..=DEFAULT_J {
            for x in [-0.7, -0.2, 0.1, 0.55] {
                let fd =
                    (unit_derivative(x + h, j - 1) - unit_derivative(x - h, j - 1)) / (2.0 * h);
                let exact = unit_derivative(x, j);
                let scale = unit_sup(j).max(1.0);
                assert!(
                    (fd - exact).abs() < 1e-5 * scale,
                    "j={j} x={x}: {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn cdf_is_consistent_with_density() {
        assert_eq!(unit_cdf(-1.0), 0.0);
        assert_eq!(unit_cdf(1.0), 1.0);
        assert!((unit_cdf(0.0) - 0.5).abs() < 1e-15);
        for t in [-0.9, -0.4, 0.25, 0.8] {
            let direct = adaptive_simpson(&|x| normalization() * unnormalized(x), -1.0, t, 1e-14);
            assert!((unit_cdf(t) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn quantiles_invert_the_cdf() {
        for p in [0.01, 0.25, 0.5, 0.75, 0.999] {
            let q = unit_quantile(p);
            assert!((unit_cdf(q) - p).abs() < 1e-12);
        }
        assert!((unit_quantile(0.25) + unit_quantile(0.75)).abs() < 1e-12);
    }
}
