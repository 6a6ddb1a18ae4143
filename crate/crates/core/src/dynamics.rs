//! Base dynamics: irrational circle rotations with their continued-fraction
//! towers, and an i.i.d. full shift for Anderson-type comparisons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Convergents beyond this point are dropped: `‖q α‖` must exceed
/// `q · 2^-40` so that floor positions stay resolvable in `f64`.
const PRECISION_HORIZON: f64 = 1.0 / (1u64 << 40) as f64;

/// Distance to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Fractional part in [0, 1).
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergent {
    /// Partial quotient.
    pub a: u64,
    pub p: u64,
    pub q: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub alpha: f64,
    pub terms: Vec<Convergent>,
    /// The expansion terminated exactly: `alpha` is rational.
    pub rational: bool,
    /// The requested depth was cut short by the precision horizon.
    pub truncated: bool,
}

impl ContinuedFraction {
    pub fn denominators(&self) -> Vec<u64> {
        self.terms.iter().map(|t| t.q).collect()
    }

    /// Signed `q_k α − p_k`.
    pub fn signed_error(&self, k: usize) -> f64 {
        let t = self.terms[k];
        (t.q as f64).mul_add(self.alpha, -(t.p as f64))
    }
}

/// Continued-fraction expansion of `alpha ∈ (0,1)` up to `depth` terms.
///
/// The expansion is computed exactly on the binary value of `alpha`
/// (a dyadic rational), and stops at the precision horizon where the
/// double stops behaving like an irrational.
pub fn cf_expand(alpha: f64, depth: usize) -> Result<ContinuedFraction> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(LabError::param(
            "alpha",
            format!("must lie in (0,1), got {alpha}"),
        ));
    }
    if depth == 0 {
        return Err(LabError::param("depth", "must be at least 1"));
    }
    let (num, den) = dyadic_parts(alpha)?;

    let mut terms = Vec::with_capacity(depth);
    let (mut r_num, mut r_den) = (num, den);
    let (mut p_prev, mut p) = (1u128, 0u128);
    let (mut q_prev, mut q) = (0u128, 1u128);
    let mut rational = false;
    let mut truncated = false;
    while terms.len() < depth {
        if r_num == 0 {
            rational = true;
            break;
        }
        let a = r_den / r_num;
        let rem = r_den - a * r_num;
        let p_next = a * p + p_prev;
        let q_next = a * q + q_prev;
        if q_next > u64::MAX as u128 || a > u64::MAX as u128 {
            truncated = true;
            break;
        }
        // exact ‖q α‖ = |q num − p den| / den
        let lhs = q_next * num;
        let rhs = p_next * den;
        let gap = lhs.abs_diff(rhs);
        if gap != 0 {
            let dist = gap as f64 / den as f64;
            if dist <= q_next as f64 * PRECISION_HORIZON {
                truncated = true;
                break;
            }
        }
        terms.push(Convergent {
            a: a as u64,
            p: p_next as u64,
            q: q_next as u64,
        });
        p_prev = p;
        p = p_next;
        q_prev = q;
        q = q_next;
        r_den = r_num;
        r_num = rem;
        if gap == 0 {
            rational = true;
            break;
        }
    }
    Ok(ContinuedFraction {
        alpha,
        terms,
        rational,
        truncated,
    })
}

fn dyadic_parts(alpha: f64) -> Result<(u128, u128)> {
    let bits = alpha.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac_bits = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_bits == 0 {
        (frac_bits, -1074)
    } else {
        (frac_bits | (1u64 << 52), exp_bits - 1075)
    };
    let shift = -exp;
    let tz = mant.trailing_zeros() as i64;
    let (mant, shift) = (mant >> tz.min(shift), shift - tz.min(shift));
    if shift > 120 {
        return Err(LabError::param(
            "alpha",
            format!("{alpha} is too small for an exact expansion"),
        ));
    }
    Ok((mant as u128, 1u128 << shift))
}

/// The golden-mean rotation number (√5 − 1)/2.
pub fn golden_alpha() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Irrational rotation `x ↦ x + α mod 1` with Lebesgue measure.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSystem {
    pub alpha: f64,
    pub cf: ContinuedFraction,
}

impl RotationSystem {
    pub const DEFAULT_DEPTH: usize = 40;

    /// Accepts rational `alpha`; [`RotationSystem::is_irrational`] reports it.
    pub fn new(alpha: f64, depth: usize) -> Result<Self> {
        let cf = cf_expand(alpha, depth)?;
        Ok(Self { alpha, cf })
    }

    pub fn golden() -> Self {
        Self::new(golden_alpha(), Self::DEFAULT_DEPTH).expect("golden mean expands")
    }

    pub fn is_irrational(&self) -> bool {
        !self.cf.rational
    }

    /// `frac(ω + j α)`, using the exact product error so there is no drift
    /// with `j`.
    pub fn point_at(&self, omega: f64, j: u64) -> f64 {
        let jf = j as f64;
        let prod = jf * self.alpha;
        let err = jf.mul_add(self.alpha, -prod);
        frac(frac(prod) + (omega + err))
    }

    pub fn orbit(&self, omega: f64, n: usize) -> Vec<f64> {
        (0..n as u64).map(|j| self.point_at(omega, j)).collect()
    }
}

/// Bernoulli shift over finitely many potential levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidSystem {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    pub seed: u64,
}

impl IidSystem {
    pub fn new(values: Vec<f64>, probs: Vec<f64>, seed: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(LabError::param("system.levels", "must not be empty"));
        }
        if values.len() != probs.len() {
            return Err(LabError::param(
                "system.probs",
                format!("{} probabilities for {} levels", probs.len(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::param("system.levels", "levels must be finite"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(LabError::param("system.probs", "must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::param(
                "system.probs",
                format!("must sum to 1, got {total}"),
            ));
        }
        Ok(Self {
            values,
            probs,
            seed,
        })
    }

    /// Levels `ω_0, …, ω_{n−1}` of the sequence labelled by `point`.
    pub fn sequence(&self, point: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, point));
        let last = self.values.len() - 1;
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = last;
                for (i, p) in self.probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                self.values[pick]
            })
            .collect()
    }
}

/// SplitMix64 finalizer applied to a pair of seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A point of the base space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Circle(f64),
    /// Label of an i.i.d. sequence.
    Sequence(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Rotation(RotationSystem),
    Iid(IidSystem),
}

impl System {
    /// Coordinates `x_j` of the orbit of `point` that samplers are
    /// evaluated on: circle positions for rotations, levels for the shift.
    pub fn orbit(&self, point: Point, n: usize) -> Result<Vec<f64>> {
        match (self, point) {
            (System::Rotation(r), Point::Circle(x)) => Ok(r.orbit(x, n)),
            (System::Iid(s), Point::Sequence(label)) => Ok(s.sequence(label, n)),
            _ => Err(LabError::param("point", "point kind does not match system")),
        }
    }

    /// `count` points drawn i.i.d. from the invariant measure.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| match self {
                System::Rotation(_) => Point::Circle(rng.gen::<f64>()),
                System::Iid(_) => Point::Sequence(rng.gen::<u64>()),
            })
            .collect()
    }

    pub fn as_rotation(&self) -> Option<&RotationSystem> {
        match self {
            System::Rotation(r) => Some(r),
            System::Iid(_) => None,
        }
    }
}

/// Half-open arc `[left, left + len)` on the circle, `left ∈ [0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub left: f64,
    pub len: f64,
}

impl Arc {
    pub fn contains(&self, x: f64) -> bool {
        frac(x - self.left) < self.len
    }

    pub fn translate(&self, t: f64) -> Arc {
        Arc {
            left: frac(self.left + t),
            len: self.len,
        }
    }

    /// Length of the intersection of two arcs.
    pub fn overlap(&self, other: &Arc) -> f64 {
        // unroll other relative to self
        let start = frac(other.left - self.left);
        let a = overlap_1d(0.0, self.len, start, start + other.len);
        let b = overlap_1d(0.0, self.len, start - 1.0, start - 1.0 + other.len);
        a + b
    }
}

fn overlap_1d(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TowerKind {
    Tall,
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorArc {
    pub arc: Arc,
    pub floor: u64,
    pub kind: TowerKind,
}

/// Where a point sits in a tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub floor: u64,
    pub column: usize,
    pub tower: TowerKind,
}

/// Position of a point inside its floor: the floor arc index and the
/// offset from the arc's left end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub location: Location,
    pub offset_in_column: f64,
    pub column_width: f64,
}

/// Exact two-tower Kakutani–Rokhlin partition of a rotation at
/// continued-fraction level `k`: the tall tower has height `q_{k+1}` over
/// an arc of length `‖q_k α‖`; the short one height `q_k` over an arc of
/// length `‖q_{k+1} α‖`. Both bases are split into `columns` equal arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub alpha: f64,
    pub level: usize,
    pub tall: Convergent,
    pub next: Convergent,
    pub base_arc: Arc,
    pub height: u64,
    pub short_base: Arc,
    pub short_height: u64,
    pub columns: usize,
    /// Width of the collars around column boundaries where `locate`
    /// reports nothing.
    pub collar: f64,
    floors: Vec<FloorArc>,
}

/// Cap on the number of floors a tower may hold.
pub const MAX_FLOORS: u64 = 2_000_000;

pub fn build_tower(system: &RotationSystem, k: usize, columns: usize) -> Result<Tower> {
    let available = system.cf.terms.len();
    if k + 1 >= available {
        return Err(LabError::LevelOutOfRange {
            level: k,
            needed: k + 1,
            available,
        });
    }
    Tower::from_convergents(
        system.alpha,
        k,
        system.cf.terms[k],
        system.cf.terms[k + 1],
        columns,
    )
}

impl Tower {
    /// Builds the partition from two consecutive convergents.
    pub fn from_convergents(
        alpha: f64,
        level: usize,
        tall: Convergent,
        next: Convergent,
        columns: usize,
    ) -> Result<Self> {
        if columns == 0 {
            return Err(LabError::param("columns", "must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(LabError::param("alpha", "must lie in (0,1)"));
        }
        let cross = (next.p as i128) * (tall.q as i128) - (tall.p as i128) * (next.q as i128);
        if cross.abs() != 1 || next.q <= tall.q || tall.q == 0 {
            return Err(LabError::param(
                "convergents",
                "not consecutive convergents",
            ));
        }
        if tall.q.saturating_add(next.q) > MAX_FLOORS {
            return Err(LabError::param("level", "tower has too many floors"));
        }
        let d_tall = (tall.q as f64).mul_add(alpha, -(tall.p as f64));
        let d_next = (next.q as f64).mul_add(alpha, -(next.p as f64));
        if d_tall == 0.0 || d_next == 0.0 || d_tall.signum() == d_next.signum() {
            return Err(LabError::param(
                "alpha",
                "convergent errors must be nonzero with alternating signs",
            ));
        }
        let total = next.q as f64 * d_tall.abs() + tall.q as f64 * d_next.abs();
        if (total - 1.0).abs() > 1e-9 {
            return Err(LabError::param(
                "convergents",
                format!("towers cover measure {total}, not 1"),
            ));
        }
        let base_arc = signed_arc(d_tall);
        let short_base = signed_arc(d_next);
        let mut floors = Vec::with_capacity((tall.q + next.q) as usize);
        for j in 0..next.q {
            floors.push(FloorArc {
                arc: translate_exact(&base_arc, alpha, j),
                floor: j,
                kind: TowerKind::Tall,
            });
        }
        for j in 0..tall.q {
            floors.push(FloorArc {
                arc: translate_exact(&short_base, alpha, j),
                floor: j,
                kind: TowerKind::Short,
            });
        }
        floors.sort_by(|a, b| a.arc.left.total_cmp(&b.arc.left));
        Ok(Self {
            alpha,
            level,
            tall,
            next,
            base_arc,
            height: next.q,
            short_base,
            short_height: tall.q,
            columns,
            collar: 0.0,
            floors,
        })
    }

    pub fn with_collar(mut self, width: f64) -> Self {
        self.collar = width;
        self
    }

    pub fn floors(&self) -> &[FloorArc] {
        &self.floors
    }

    pub fn tall_measure(&self) -> f64 {
        self.height as f64 * self.base_arc.len
    }

    pub fn short_measure(&self) -> f64 {
        self.short_height as f64 * self.short_base.len
    }

    /// Column sub-arc `ℓ` of a base.
    pub fn column(&self, kind: TowerKind, l: usize) -> Arc {
        let base = match kind {
            TowerKind::Tall => self.base_arc,
            TowerKind::Short => self.short_base,
        };
        let w = base.len / self.columns as f64;
        Arc {
            left: frac(base.left + l as f64 * w),
            len: w,
        }
    }

    /// Index into the sorted floor table of the arc holding `x`.
    fn arc_index(&self, x: f64) -> usize {
        let x = frac(x);
        let idx = self.floors.partition_point(|f| f.arc.left <= x);
        if idx == 0 {
            // left of every left end: inside the arc that wraps past 1
            self.floors.len() - 1
        } else {
            idx - 1
        }
    }

    /// Floor, column and offset of `x`; always succeeds.
    pub fn position(&self, x: f64) -> Position {
        let f = &self.floors[self.arc_index(x)];
        let mut off = frac(x - f.arc.left);
        if off >= f.arc.len {
            // rounding gap between adjacent arcs
            off = f.arc.len * (1.0 - f64::EPSILON);
        }
        let w = f.arc.len / self.columns as f64;
        let column = ((off / w) as usize).min(self.columns - 1);
        Position {
            location: Location {
                floor: f.floor,
                column,
                tower: f.kind,
            },
            offset_in_column: (off - column as f64 * w).clamp(0.0, w),
            column_width: w,
        }
    }

    /// The unique (floor, column, tower) holding `x`, or `None` inside a
    /// collar of width [`Tower::collar`] around a column boundary.
    pub fn locate(&self, x: f64) -> Option<Location> {
        let pos = self.position(x);
        let half = 0.5 * self.collar;
        if half > 0.0
            && (pos.offset_in_column < half || pos.column_width - pos.offset_in_column < half)
        {
            return None;
        }
        Some(pos.location)
    }

    /// Largest overlap between consecutive floors and total uncovered
    /// length, from a sweep over the sorted floor table.
    pub fn coverage_defect(&self) -> (f64, f64) {
        let n = self.floors.len();
        let mut max_overlap: f64 = 0.0;
        let mut gap = 0.0;
        for i in 0..n {
            let a = &self.floors[i].arc;
            let b = &self.floors[(i + 1) % n].arc;
            let end = a.left + a.len;
            let next_left = if i + 1 == n { b.left + 1.0 } else { b.left };
            let d = next_left - end;
            if d > 0.0 {
                gap += d;
            } else {
                max_overlap = max_overlap.max(-d);
            }
        }
        (max_overlap, gap)
    }
}

fn signed_arc(delta: f64) -> Arc {
    if delta > 0.0 {
        Arc {
            left: 0.0,
            len: delta,
        }
    } else {
        Arc {
            left: frac(delta),
            len: -delta,
        }
    }
}

fn translate_exact(arc: &Arc, alpha: f64, j: u64) -> Arc {
    let jf = j as f64;
    let prod = jf * alpha;
    let err = jf.mul_add(alpha, -prod);
    Arc {
        left: frac(frac(prod) + (arc.left + err)),
        len: arc.len,
    }
}
