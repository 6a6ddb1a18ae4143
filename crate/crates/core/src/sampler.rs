//! Sampling functions `v` evaluated on orbit coordinates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// A continuous sampling function. `x` is the orbit coordinate: a circle
/// point for rotations, a potential level for the i.i.d. shift.
pub trait Sampler: Send + Sync {
    fn eval(&self, x: f64) -> f64;

    /// An upper bound on `sup |v|`.
    fn sup_bound(&self) -> f64;
}

impl<S: Sampler + ?Sized> Sampler for &S {
    fn eval(&self, x: f64) -> f64 {
        (**self).eval(x)
    }
    fn sup_bound(&self) -> f64 {
        (**self).sup_bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Closed-form samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseSampler {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · cos(2π(x + phase))`.
    Cosine {
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `offset + Σ amplitude · cos(2π(order·x + phase))`.
    Trig {
        offset: f64,
        terms: Vec<Harmonic>,
    },
    /// `v(x) = x`; the Anderson model over an i.i.d. shift.
    Identity,
}

impl BaseSampler {
    pub fn cosine(amplitude: f64) -> Self {
        BaseSampler::Cosine {
            amplitude,
            phase: 0.0,
        }
    }

    fn as_trig(&self) -> Option<(f64, Vec<Harmonic>)> {
        match *self {
            BaseSampler::Zero => Some((0.0, vec![])),
            BaseSampler::Constant { value } => Some((value, vec![])),
            BaseSampler::Cosine { amplitude, phase } => Some((
                0.0,
                vec![Harmonic {
                    order: 1,
                    amplitude,
                    phase,
                }],
            )),
            BaseSampler::Trig {
                offset, ref terms, ..
            } => Some((offset, terms.clone())),
            BaseSampler::Identity => None,
        }
    }

    /// `self + delta · cos(2πx)`; `None` for the identity sampler.
    pub fn plus_cosine(&self, delta: f64) -> Option<BaseSampler> {
        if delta == 0.0 {
            return Some(self.clone());
        }
        let (offset, mut terms) = self.as_trig()?;
        terms.push(Harmonic {
            order: 1,
            amplitude: delta,
            phase: 0.0,
        });
        Some(BaseSampler::Trig { offset, terms })
    }

    pub fn is_finite(&self) -> bool {
        match self {
            BaseSampler::Zero | BaseSampler::Identity => true,
            BaseSampler::Constant { value } => value.is_finite(),
            BaseSampler::Cosine { amplitude, phase } => amplitude.is_finite() && phase.is_finite(),
            BaseSampler::Trig { offset, terms } => {
                offset.is_finite()
                    && terms
                        .iter()
                        .all(|h| h.amplitude.is_finite() && h.phase.is_finite())
            }
        }
    }
}

impl Sampler for BaseSampler {
    fn eval(&self, x: f64) -> f64 {
        match self {
            BaseSampler::Zero => 0.0,
            BaseSampler::Constant { value } => *value,
            BaseSampler::Cosine { amplitude, phase } => amplitude * (2.0 * PI * (x + phase)).cos(),
            BaseSampler::Trig { offset, terms } => {
                offset
                    + terms
                        .iter()
                        .map(|h| h.amplitude * (2.0 * PI * (h.order as f64 * x + h.phase)).cos())
                        .sum::<f64>()
            }
            BaseSampler::Identity => x,
        }
    }

    fn sup_bound(&self) -> f64 {
        match self {
            BaseSampler::Zero => 0.0,
            BaseSampler::Constant { value } => value.abs(),
            BaseSampler::Cosine { amplitude, .. } => amplitude.abs(),
            BaseSampler::Trig { offset, terms } => {
                offset.abs() + terms.iter().map(|h| h.amplitude.abs()).sum::<f64>()
            }
            // levels are bounded by the system, not the sampler
            BaseSampler::Identity => f64::INFINITY,
        }
    }
}

/// `v + c`.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<S> {
    pub inner: S,
    pub by: f64,
}

impl<S: Sampler> Sampler for Shifted<S> {
    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x) + self.by
    }
    fn sup_bound(&self) -> f64 {
        self.inner.sup_bound() + self.by.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_quarter_points() {
        let v = BaseSampler::cosine(1.0);
        let got: Vec<f64> = [0.0, 0.25, 0.5, 0.75].iter().map(|x| v.eval(*x)).collect();
        let want = [1.0, 0.0, -1.0, 0.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn plus_cosine_adds_a_harmonic() {
        let v = BaseSampler::Constant { value: 0.5 }
            .plus_cosine(0.25)
            .unwrap();
        assert!((v.eval(0.0) - 0.75).abs() < 1e-15);
        assert!((v.sup_bound() - 0.75).abs() < 1e-15);
        assert!(BaseSampler::Identity.plus_cosine(0.1).is_none());
    }

    #[test]
    fn serde_tags() {
        let v: BaseSampler = serde_json::from_str(r#"{"kind":"cosine","amplitude":3.0}"#).unwrap();
        assert_eq!(v, BaseSampler::cosine(3.0));
        let z: BaseSampler = serde_json::from_str(r#"{"kind":"zero"}"#).unwrap();
        assert_eq!(z, BaseSampler::Zero);
    }
}
