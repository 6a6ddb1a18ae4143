use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Sup-norm allowances `ε_n = (ε/2)·2^{−n−1}` (summing to `ε/2`),
/// Lyapunov decrements `ℓ_n = (L^{(0)}/2)·2^{−n}` (summing to `L^{(0)}/2`)
/// and the realized smoothing sizes `ε^{(n)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub eps: f64,
    pub l0: Option<f64>,
    pub smoothing: Vec<f64>,
}

impl Budgets {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(LabError::param("construction.eps", "must be positive"));
        }
        Ok(Self {
            eps,
            l0: None,
            smoothing: Vec::new(),
        })
    }

    /// `ε_n`.
    pub fn eps_n(&self, n: usize) -> f64 {
        0.5 * self.eps * 0.5f64.powi(n as i32 + 1)
    }

    /// `ε_0, …, ε_{count−1}`.
    pub fn eps_seq(&self, count: usize) -> Vec<f64> {
        (0..count).map(|n| self.eps_n(n)).collect()
    }

    /// `ℓ_n`, `n ≥ 1`; zero before `L^{(0)}` is known.
    pub fn ell(&self, n: usize) -> f64 {
        match self.l0 {
            Some(l0) if n >= 1 => 0.5 * l0 * 0.5f64.powi(n as i32),
            _ => 0.0,
        }
    }

    /// `L^{(0)} − Σ_{k=1}^{n} ℓ_k`.
    pub fn lyapunov_floor(&self, n: usize) -> Option<f64> {
        let l0 = self.l0?;
        Some(l0 - (1..=n).map(|k| self.ell(k)).sum::<f64>())
    }

    pub fn set_l0(&mut self, l0: f64) -> Result<()> {
        if !(l0 > 0.0 && l0.is_finite()) {
            return Err(LabError::param("L0", format!("must be positive, got {l0}")));
        }
        self.l0 = Some(l0);
        Ok(())
    }

    /// `ε^{(0)} = ε_1 / 2`.
    pub fn initial_smoothing(&self) -> f64 {
        0.5 * self.eps_n(1)
    }

    /// First trial `min(ε_{n+1}/2, ε^{(n−1)})` for step `n ≥ 1`.
    pub fn trial_smoothing(&self, n: usize) -> f64 {
        let prev = self
            .smoothing
            .get(n.wrapping_sub(1))
            .copied()
            .unwrap_or_else(|| self.initial_smoothing());
        (0.5 * self.eps_n(n + 1)).min(prev)
    }

    /// `0 < ε^{(n)} < ε_{n+1}`.
    pub fn check_smoothing(&self, n: usize, eps_n: f64) -> Result<()> {
        let bound = self.eps_n(n + 1);
        if !(eps_n > 0.0 && eps_n < bound) {
            return Err(LabError::param(
                "smoothing",
                format!("ε^({n}) = {eps_n} must lie in (0, {bound})"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_defaults() {
        let b = Budgets::new(0.5).unwrap();
        assert_eq!(b.eps_n(0), 0.125);
        assert_eq!(b.eps_n(1), 0.0625);
        let total: f64 = b.eps_seq(60).iter().sum();
        assert!((total - 0.25).abs() < 1e-15 && total < 0.5);
        assert_eq!(b.initial_smoothing(), 0.03125);
        assert_eq!(b.trial_smoothing(1), 0.015625);
        assert!(b.check_smoothing(1, 0.02).is_ok());
        assert!(b.check_smoothing(1, 10.0 * b.eps_n(2)).is_err());
        assert!(b.check_smoothing(1, 0.0).is_err());
        assert!(Budgets::new(0.0).is_err());
    }

    #[test]
    fn lyapunov_decrements_leave_half() {
        let mut b = Budgets::new(0.5).unwrap();
        assert_eq!(b.ell(1), 0.0);
        assert!(b.lyapunov_floor(1).is_none());
        b.set_l0(0.4).unwrap();
        assert_eq!(b.ell(1), 0.1);
        assert!((b.lyapunov_floor(2).unwrap() - 0.25).abs() < 1e-15);
        assert!(b.lyapunov_floor(200).unwrap() >= 0.2);
        assert!(b.set_l0(-1.0).is_err());
    }
}
