//! Transfer-matrix cocycles, Lyapunov exponents and the uniformity probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Point, System};
use crate::error::{LabError, Result};
use crate::operator::potential_window;
use crate::sampler::Sampler;

/// Products are renormalized by their Frobenius norm this often.
const RESCALE_EVERY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Largest singular value, in closed form.
    pub fn spectral_norm(&self) -> f64 {
        let f2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det().abs();
        let sum = (f2 + 2.0 * det).max(0.0).sqrt();
        let diff = (f2 - 2.0 * det).max(0.0).sqrt();
        0.5 * (sum + diff)
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2 {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        }
    }
}

/// One-step transfer matrix `[[E − v, −1], [1, 0]]`.
pub fn transfer(e: f64, vval: f64) -> Mat2 {
    Mat2 {
        a: e - vval,
        b: -1.0,
        c: 1.0,
        d: 0.0,
    }
}

/// A cocycle product kept as `exp(log_scale) · mat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProduct {
    pub mat: Mat2,
    pub log_scale: f64,
    pub steps: usize,
}

impl Default for ScaledProduct {
    fn default() -> Self {
        Self {
            mat: Mat2::IDENTITY,
            log_scale: 0.0,
            steps: 0,
        }
    }
}

impl ScaledProduct {
    /// Left-multiplies by the transfer matrix at potential value `vval`.
    #[inline]
    pub fn push(&mut self, e: f64, vval: f64) {
        let m = &self.mat;
        let t = e - vval;
        // [[t, -1], [1, 0]] · m
        self.mat = Mat2 {
            a: t * m.a - m.c,
            b: t * m.b - m.d,
            c: m.a,
            d: m.b,
        };
        self.steps += 1;
        if self.steps.is_multiple_of(RESCALE_EVERY) {
            self.rescale();
        }
    }

    pub fn rescale(&mut self) {
        let f = self.mat.frobenius();
        if f > 0.0 && f.is_finite() {
            self.mat = self.mat.scale(1.0 / f);
            self.log_scale += f.ln();
        }
    }

    /// `log ‖product‖` (spectral norm).
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.mat.spectral_norm().ln()
    }

    /// Deviation of the determinant of the unit-normalized product from
    /// the value `exp(−2·log_scale)` that an exact SL(2,ℝ) product implies.
    /// For hyperbolic products this is an absolute error at unit scale.
    pub fn det_defect(&self) -> f64 {
        let mut p = *self;
        p.rescale();
        (p.mat.det() - (-2.0 * p.log_scale).exp()).abs()
    }
}

/// Product `A_E(x_{n−1}) ⋯ A_E(x_0)` over a potential sequence.
pub fn product_over(potential: &[f64], e: f64) -> ScaledProduct {
    let mut p = ScaledProduct::default();
    for v in potential {
        p.push(e, *v);
    }
    p
}

/// `(1/n) log ‖A_E^n‖` over a precomputed potential window.
pub fn lognorm_from_potential(potential: &[f64], e: f64) -> f64 {
    let n = potential.len();
    (product_over(potential, e).log_norm() / n as f64).max(0.0)
}

/// `(1/n) log ‖A_E^n(ω)‖`.
pub fn cocycle_lognorm<S: Sampler + ?Sized>(
    v: &S,
    system: &System,
    e: f64,
    omega: Point,
    n: usize,
) -> Result<f64> {
    let window = potential_window(v, system, omega, n)?;
    Ok(lognorm_from_potential(&window, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub stderr: f64,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_lyapunov_args(n: usize, m: usize) -> Result<()> {
    if n < 100 {
        return Err(LabError::param("lyapunov.n", "must be at least 100"));
    }
    if m == 0 {
        return Err(LabError::param("lyapunov.samples", "must be at least 1"));
    }
    Ok(())
}

/// Mean of `(1/n) log ‖A_E^n‖` over `m` seeded μ-samples.
pub fn lyapunov<S: Sampler + ?Sized>(
    v: &S,
    system: &System,
    e: f64,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    Ok(lyapunov_curve(v, system, &[e], n, m, seed)?[0])
}

/// [`lyapunov`] at many energies, reusing the same `m` potential windows.
pub fn lyapunov_curve<S: Sampler + ?Sized>(
    v: &S,
    system: &System,
    energies: &[f64],
    n: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<LyapunovEstimate>> {
    check_lyapunov_args(n, m)?;
    let windows: Vec<Vec<f64>> = system
        .sample_points(m, seed)
        .into_iter()
        .map(|p| potential_window(v, system, p, n))
        .collect::<Result<_>>()?;
    Ok(energies
        .par_iter()
        .map(|&e| {
            let vals: Vec<f64> = windows
                .iter()
                .map(|w| lognorm_from_potential(w, e))
                .collect();
            let (value, stderr) = mean_and_stderr(&vals);
            LyapunovEstimate { value, stderr }
        })
        .collect())
}

/// Finite-`n` statistics of `(1/n) log ‖A_E^n(ω)‖` over an ω-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleStats {
    pub energy: f64,
    pub n: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Lyapunov estimate: the grid mean.
    pub l_hat: f64,
}

impl CocycleStats {
    fn from_values(energy: f64, n: usize, values: Vec<f64>) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mean, stderr) = mean_and_stderr(&values);
        Self {
            energy,
            n,
            values,
            min,
            max,
            mean,
            stderr,
            l_hat: mean,
        }
    }

    /// `L̂ − min_ω`: the finite-scale non-uniformity signature.
    pub fn gap(&self) -> f64 {
        self.l_hat - self.min
    }
}

/// Equispaced grid of `size` points on the circle.
pub fn omega_grid(size: usize) -> Vec<f64> {
    (0..size).map(|i| i as f64 / size as f64).collect()
}

/// Evaluates `(1/n) log ‖A_E^n(ω)‖` for each `n` in `n_list` at every grid
/// point (one pass per point up to the largest `n`) and summarizes.
pub fn uniformity_probe<S: Sampler + ?Sized>(
    v: &S,
    system: &System,
    e: f64,
    n_list: &[usize],
    omega_grid: &[f64],
) -> Result<Vec<CocycleStats>> {
    if omega_grid.is_empty() {
        return Err(LabError::param(
            "walters.grid_size",
            "ω-grid must be nonempty",
        ));
    }
    if n_list.is_empty() {
        return Err(LabError::param("walters.n_list", "must be nonempty"));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::param(
            "walters.n_list",
            "must be positive and strictly increasing",
        ));
    }
    if system.as_rotation().is_none() {
        return Err(LabError::param("system.kind", "the probe needs a rotation"));
    }
    let n_max = *n_list.last().unwrap();
    let per_point: Vec<Vec<f64>> = omega_grid
        .par_iter()
        .map(|&x| {
            let window = potential_window(v, system, Point::Circle(x), n_max)?;
            let mut p = ScaledProduct::default();
            let mut out = Vec::with_capacity(n_list.len());
            let mut next = 0;
            for (i, val) in window.iter().enumerate() {
                p.push(e, *val);
                if i + 1 == n_list[next] {
                    out.push((p.log_norm() / (i + 1) as f64).max(0.0));
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let vals = per_point.iter().map(|row| row[k]).collect();
            CocycleStats::from_values(e, n, vals)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RotationSystem;
    use crate::sampler::{BaseSampler, Shifted};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn golden() -> System {
        System::Rotation(RotationSystem::golden())
    }

    #[test]
    fn transfer_examples() {
        assert_eq!(
            transfer(0.0, 0.0),
            Mat2 {
                a: 0.0,
                b: -1.0,
                c: 1.0,
                d: 0.0
            }
        );
        assert_eq!(
            transfer(3.0, 1.0),
            Mat2 {
                a: 2.0,
                b: -1.0,
                c: 1.0,
                d: 0.0
            }
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let e: f64 = rng.gen_range(-50.0..50.0);
            let v: f64 = rng.gen_range(-50.0..50.0);
            assert_eq!(transfer(e, v).det(), 1.0);
        }
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let m = Mat2 {
            a: 2.0,
            b: -1.0,
            c: 0.5,
            d: 3.0,
        };
        // largest eigenvalue of mᵀm
        let mtm = Mat2 {
            a: m.a * m.a + m.c * m.c,
            b: m.a * m.b + m.c * m.d,
            c: m.a * m.b + m.c * m.d,
            d: m.b * m.b + m.d * m.d,
        };
        let tr = mtm.a + mtm.d;
        let det = mtm.det();
        let lam = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        assert!((m.spectral_norm() - lam.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rotation_cocycle_has_zero_exponent() {
        let sys = golden();
        for n in [2usize, 10, 1000] {
            let l = cocycle_lognorm(&BaseSampler::Zero, &sys, 0.0, Point::Circle(0.3), n).unwrap();
            assert!(l.abs() < 1e-14);
        }
        let est = lyapunov(&BaseSampler::Zero, &sys, 0.0, 1000, 4, 1).unwrap();
        assert!(est.value.abs() < 1e-6);
    }

    #[test]
    fn constant_hyperbolic_cocycle() {
        let sys = golden();
        let l = cocycle_lognorm(&BaseSampler::Zero, &sys, 3.0, Point::Circle(0.0), 10_000).unwrap();
        let want = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((l - want).abs() < 1e-3);
        assert!((want - 0.96242).abs() < 1e-5);
        let est = lyapunov(&BaseSampler::Zero, &sys, 10.0, 10_000, 4, 2).unwrap();
        let want10 = ((10.0 + 96f64.sqrt()) / 2.0).ln();
        assert!((est.value - want10).abs() < 1e-3);
        assert!((want10 - 2.2924).abs() < 1e-4);
    }

    #[test]
    fn lyapunov_rejects_short_products() {
        let sys = golden();
        assert!(lyapunov(&BaseSampler::Zero, &sys, 0.0, 50, 3, 1).is_err());
        assert!(lyapunov(&BaseSampler::Zero, &sys, 0.0, 500, 0, 1).is_err());
    }

    #[test]
    fn cocycle_identity_on_random_instances() {
        let r = RotationSystem::golden();
        let sys = System::Rotation(r.clone());
        let v = BaseSampler::cosine(2.7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..=50usize);
            let m = rng.gen_range(1..=50usize);
            let e: f64 = rng.gen_range(-5.0..5.0);
            let x: f64 = rng.gen();
            let full = potential_window(&v, &sys, Point::Circle(x), n + m).unwrap();
            let plain = |pot: &[f64]| {
                pot.iter()
                    .fold(Mat2::IDENTITY, |acc, val| transfer(e, *val).mul(&acc))
            };
            let lhs = plain(&full);
            let first = plain(&full[..n]);
            let second = plain(
                &potential_window(&v, &sys, Point::Circle(r.point_at(x, n as u64)), m).unwrap(),
            );
            let rhs = second.mul(&first);
            let scale = lhs.frobenius();
            for (p, q) in [
                (lhs.a, rhs.a),
                (lhs.b, rhs.b),
                (lhs.c, rhs.c),
                (lhs.d, rhs.d),
            ] {
                assert!((p - q).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn subadditivity_at_finite_n() {
        let r = RotationSystem::golden();
        let sys = System::Rotation(r.clone());
        let v = BaseSampler::cosine(3.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(1..400usize);
            let m = rng.gen_range(1..400usize);
            let e: f64 = rng.gen_range(-5.0..5.0);
            let x: f64 = rng.gen();
            let ln = |pt: f64, len: usize| {
                let w = potential_window(&v, &sys, Point::Circle(pt), len).unwrap();
                product_over(&w, e).log_norm()
            };
            let lhs = ln(x, n) + ln(r.point_at(x, n as u64), m);
            assert!(lhs >= ln(x, n + m) - 1e-9);
        }
    }

    #[test]
    fn energy_shift_covariance() {
        let sys = golden();
        let v = BaseSampler::cosine(3.0);
        let c = 0.75;
        let shifted = Shifted {
            inner: v.clone(),
            by: c,
        };
        for e in [-2.0, 0.3, 4.1] {
            let a = cocycle_lognorm(&shifted, &sys, e, Point::Circle(0.41), 5000).unwrap();
            let b = cocycle_lognorm(&v, &sys, e - c, Point::Circle(0.41), 5000).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn determinant_defect_grows_at_most_linearly() {
        let sys = golden();
        for (sampler, e) in [
            (BaseSampler::Zero, 1.0),
            (BaseSampler::Zero, 3.0),
            (BaseSampler::cosine(4.0), 0.5),
        ] {
            for n in [10usize, 1000, 100_000] {
                let w = potential_window(&sampler, &sys, Point::Circle(0.2), n).unwrap();
                let p = product_over(&w, e);
                assert!(
                    p.det_defect() <= n as f64 * 1e-14,
                    "n={n} e={e}: {}",
                    p.det_defect()
                );
            }
        }
    }

    #[test]
    fn degenerate_probe_grid() {
        let sys = golden();
        let stats =
            uniformity_probe(&BaseSampler::cosine(4.0), &sys, 0.3, &[100, 1000], &[0.37]).unwrap();
        for s in &stats {
            assert_eq!(s.min, s.max);
            assert_eq!(s.min, s.mean);
        }
    }

    #[test]
    fn constant_cocycle_probe_has_no_gap() {
        let sys = golden();
        let stats =
            uniformity_probe(&BaseSampler::Zero, &sys, 3.0, &[10_000], &omega_grid(64)).unwrap();
        assert!(stats[0].gap() < 1e-3);
        assert!(uniformity_probe(&BaseSampler::Zero, &sys, 3.0, &[], &omega_grid(4)).is_err());
        assert!(uniformity_probe(&BaseSampler::Zero, &sys, 3.0, &[100], &[]).is_err());
        assert!(uniformity_probe(&BaseSampler::Zero, &sys, 3.0, &[100, 100], &[0.1]).is_err());
    }
}
