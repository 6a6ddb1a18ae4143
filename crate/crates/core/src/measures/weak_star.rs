use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::curve::{cinf_dist, mollify, DensityCurve, EnergyGrid};
use crate::error::{LabError, Result};
use crate::operator::EmpiricalMeasure;

/// One stage `m` of the diagonal selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagStage {
    pub m: usize,
    pub eps: f64,
    /// Index into the sequence where the stage takes over.
    pub start: usize,
}

/// Result of [`weak_star_diag`]: the selected `ε_n` and the realized
/// `sup_{n'≥n} dist(S_{ε_n} ν_{n'}, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakStarDiag {
    pub eps_seq: Vec<f64>,
    pub dist_seq: Vec<f64>,
    pub stages: Vec<DiagStage>,
    /// The finest smoothing size; `R = S_{ε_floor} ν_limit`.
    pub eps_floor: f64,
}

impl WeakStarDiag {
    pub fn strictly_decreasing(&self) -> bool {
        self.dist_seq.windows(2).all(|w| w[1] < w[0])
    }

    pub fn nonincreasing(&self, noise: f64) -> bool {
        self.dist_seq.windows(2).all(|w| w[1] <= w[0] + noise)
    }
}

/// Geometric ladder of `count` smoothing sizes from `hi` down to `lo`.
pub fn eps_ladder(hi: f64, lo: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || count < 2 {
        return Err(LabError::param(
            "ladder",
            format!("need 0 < lo < hi and count ≥ 2, got [{lo}, {hi}] × {count}"),
        ));
    }
    let ratio = (lo / hi).powf(1.0 / (count - 1) as f64);
    Ok((0..count).map(|i| hi * ratio.powi(i as i32)).collect())
}

struct Cache<'a> {
    seq: &'a [EmpiricalMeasure],
    limit: &'a EmpiricalMeasure,
    ladder: &'a [f64],
    grid: &'a EnergyGrid,
    j: usize,
    curves: HashMap<(usize, Option<usize>), DensityCurve>,
}

impl Cache<'_> {
    fn curve(&mut self, e: usize, which: Option<usize>) -> Result<&DensityCurve> {
        if !self.curves.contains_key(&(e, which)) {
            let nu = which.map_or(self.limit, |i| &self.seq[i]);
            let c = mollify(nu, self.ladder[e], self.grid, self.j)?;
            self.curves.insert((e, which), c);
        }
        Ok(&self.curves[&(e, which)])
    }

    fn dist(&mut self, a: (usize, Option<usize>), b: (usize, Option<usize>)) -> Result<f64> {
        self.curve(a.0, a.1)?;
        self.curve(b.0, b.1)?;
        cinf_dist(&self.curves[&a], &self.curves[&b], self.j)
    }
}

/// Numerical diagonal selection of smoothing sizes along a measure
/// sequence converging weak-* to `nu_limit`.
///
/// Stage `m` picks the coarsest ladder size `ε^{(m)}` above the floor with
/// `dist(S_ε ν_limit, R) < 1/m`, then the first index `n^{(m)}` (strictly
/// after the previous stage's) from which every later `S_ε ν_{n'}` lies
/// within `1/m` of `S_ε ν_limit`. Selection stops when either choice is
/// impossible on the finite data.
pub fn weak_star_diag(
    nu_seq: &[EmpiricalMeasure],
    nu_limit: &EmpiricalMeasure,
    grid: &EnergyGrid,
    j: usize,
    ladder: &[f64],
) -> Result<WeakStarDiag> {
    if nu_seq.is_empty() {
        return Err(LabError::param("nu_seq", "must be nonempty"));
    }
    if ladder.len() < 2
        || ladder.windows(2).any(|w| !(w[1] < w[0]))
        || !(ladder[ladder.len() - 1] > 0.0)
    {
        return Err(LabError::param(
            "ladder",
            "need at least two positive sizes in strictly decreasing order",
        ));
    }
    let floor = ladder.len() - 1;
    let mut cache = Cache {
        seq: nu_seq,
        limit: nu_limit,
        ladder,
        grid,
        j,
        curves: HashMap::new(),
    };
    let reference = (floor, None);

    let mut stages: Vec<DiagStage> = Vec::new();
    let mut stage_idx: Vec<usize> = Vec::new();
    for m in 1.. {
        let bound = 1.0 / m as f64;
        let mut pick = None;
        for e in 0..floor {
            if cache.dist((e, None), reference)? < bound {
                pick = Some(e);
                break;
            }
        }
        let Some(e) = pick else {
            if m == 1 {
                return Err(LabError::NoSmoothingScale {
                    m,
                    eps_lo: ladder[floor - 1],
                    eps_hi: ladder[0],
                });
            }
            break;
        };
        let first = stages.last().map_or(0, |s| s.start + 1);
        let mut start = None;
        'n: for n in first..nu_seq.len() {
            for k in n..nu_seq.len() {
                if cache.dist((e, Some(k)), (e, None))? >= bound {
                    continue 'n;
                }
            }
            start = Some(n);
            break;
        }
        let Some(start) = start else { break };
        stages.push(DiagStage {
            m,
            eps: ladder[e],
            start,
        });
        stage_idx.push(e);
        if start + 1 >= nu_seq.len() {
            break;
        }
    }
    if stages.is_empty() {
        return Err(LabError::NoSmoothingScale {
            m: 1,
            eps_lo: ladder[floor - 1],
            eps_hi: ladder[0],
        });
    }

    let mut eps_seq = Vec::with_capacity(nu_seq.len());
    let mut dist_seq = Vec::with_capacity(nu_seq.len());
    for n in 0..nu_seq.len() {
        let s = stages.iter().rposition(|s| s.start <= n).unwrap_or(0);
        let e = stage_idx[s];
        let mut worst: f64 = 0.0;
        for k in n..nu_seq.len() {
            worst = worst.max(cache.dist((e, Some(k)), reference)?);
        }
        eps_seq.push(ladder[e]);
        dist_seq.push(worst);
    }
    Ok(WeakStarDiag {
        eps_seq,
        dist_seq,
        stages,
        eps_floor: ladder[floor],
    })
}
