use serde::{Deserialize, Serialize};

use crate::dynamics::{build_tower, Convergent, RotationSystem, Tower};
use crate::error::{LabError, Result};
use crate::measures::kernel::{check_eps, unit_quantile};
use crate::sampler::{BaseSampler, Sampler};

/// Ramp width as a fraction of a tall-base column.
pub const RAMP_FRACTION: f64 = 1.0 / 16.0;

/// Smallest admissible ramp, in units of machine epsilon on the circle.
pub const MIN_RAMP: f64 = 64.0 * f64::EPSILON;

/// The `(2ℓ−1)/(2K')`-quantiles of `s_ε`, `ℓ = 1..K'`.
pub fn shift_values(eps_prev: f64, columns: usize) -> Result<Vec<f64>> {
    check_eps(eps_prev)?;
    if columns == 0 {
        return Err(LabError::param("columns", "must be at least 1"));
    }
    let k = columns as f64;
    let mut out: Vec<f64> = (1..=columns)
        .map(|l| eps_prev * unit_quantile((2 * l - 1) as f64 / (2.0 * k)))
        .collect();
    // symmetrize: the kernel is even
    for l in 0..columns / 2 {
        let m = 0.5 * (out[columns - 1 - l] - out[l]);
        out[l] = -m;
        out[columns - 1 - l] = m;
    }
    if columns % 2 == 1 {
        out[columns / 2] = 0.0;
    }
    Ok(out)
}

/// Largest gap between consecutive sorted shifts, including the gaps to
/// `±eps_prev`.
pub fn max_shift_gap(shifts: &[f64], eps_prev: f64) -> f64 {
    let mut sorted = shifts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gap = (sorted[0] + eps_prev).max(eps_prev - sorted[sorted.len() - 1]);
    for w in sorted.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}

/// Constant shift `s_ℓ` on column `ℓ` of every floor of both towers, with
/// linear ramps of width `η` centred on column boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftLayer {
    pub tower: Tower,
    pub shifts: Vec<f64>,
    pub ramp_width: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerSpec {
    level: usize,
    tall: Convergent,
    next: Convergent,
    columns: usize,
    shifts: Vec<f64>,
    ramp_width: f64,
}

impl ShiftLayer {
    pub fn new(tower: Tower, shifts: Vec<f64>) -> Result<Self> {
        let ramp_width = tower.base_arc.len / tower.columns as f64 * RAMP_FRACTION;
        Self::with_ramp(tower, shifts, ramp_width)
    }

    pub fn with_ramp(tower: Tower, shifts: Vec<f64>, ramp_width: f64) -> Result<Self> {
        if shifts.len() != tower.columns {
            return Err(LabError::param(
                "shifts",
                format!("{} shifts for {} columns", shifts.len(), tower.columns),
            ));
        }
        if shifts.iter().any(|s| !s.is_finite()) {
            return Err(LabError::param("shifts", "must be finite"));
        }
        if !(ramp_width >= MIN_RAMP) {
            return Err(LabError::param(
                "ramp_width",
                format!("{ramp_width} is below circle resolution"),
            ));
        }
        let narrow = tower.short_base.len / tower.columns as f64;
        if ramp_width > 0.5 * narrow {
            return Err(LabError::param(
                "ramp_width",
                format!("{ramp_width} exceeds half the short-base column {narrow}"),
            ));
        }
        let tower = tower.with_collar(ramp_width);
        Ok(Self {
            tower,
            shifts,
            ramp_width,
        })
    }

    pub fn build(system: &RotationSystem, level: usize, shifts: Vec<f64>) -> Result<Self> {
        let tower = build_tower(system, level, shifts.len())?;
        Self::new(tower, shifts)
    }

    pub fn columns(&self) -> usize {
        self.shifts.len()
    }

    pub fn max_shift(&self) -> f64 {
        self.shifts.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Value of the layer at circle point `x`.
    pub fn shift_at(&self, x: f64) -> f64 {
        let pos = self.tower.position(x);
        let k = self.shifts.len();
        let l = pos.location.column;
        let own = self.shifts[l];
        let half = 0.5 * self.ramp_width;
        let t = pos.offset_in_column;
        let w = pos.column_width;
        if t < half {
            let left = self.shifts[(l + k - 1) % k];
            left + (own - left) * (0.5 + t / self.ramp_width)
        } else if w - t < half {
            let right = self.shifts[(l + 1) % k];
            own + (right - own) * (0.5 - (w - t) / self.ramp_width)
        } else {
            own
        }
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec {
            level: self.tower.level,
            tall: self.tower.tall,
            next: self.tower.next,
            columns: self.tower.columns,
            shifts: self.shifts.clone(),
            ramp_width: self.ramp_width,
        }
    }

    fn from_spec(alpha: f64, spec: LayerSpec) -> Result<Self> {
        let tower = Tower::from_convergents(alpha, spec.level, spec.tall, spec.next, spec.columns)?;
        Self::with_ramp(tower, spec.shifts, spec.ramp_width)
    }
}

/// `v = base + Σ layers` on a rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComposed", into = "RawComposed")]
pub struct ComposedSampler {
    pub alpha: f64,
    pub base: BaseSampler,
    pub layers: Vec<ShiftLayer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComposed {
    alpha: f64,
    base: BaseSampler,
    #[serde(default)]
    layers: Vec<LayerSpec>,
}

impl TryFrom<RawComposed> for ComposedSampler {
    type Error = LabError;
    fn try_from(raw: RawComposed) -> Result<Self> {
        if !(raw.alpha > 0.0 && raw.alpha < 1.0) {
            return Err(LabError::param("alpha", "must lie in (0,1)"));
        }
        if !raw.base.is_finite() {
            return Err(LabError::param("base", "parameters must be finite"));
        }
        if matches!(raw.base, BaseSampler::Identity) {
            return Err(LabError::param(
                "base",
                "identity sampler needs an i.i.d. system",
            ));
        }
        let layers = raw
            .layers
            .into_iter()
            .map(|l| ShiftLayer::from_spec(raw.alpha, l))
            .collect::<Result<_>>()?;
        Ok(Self {
            alpha: raw.alpha,
            base: raw.base,
            layers,
        })
    }
}

impl From<ComposedSampler> for RawComposed {
    fn from(c: ComposedSampler) -> Self {
        RawComposed {
            alpha: c.alpha,
            layers: c.layers.iter().map(ShiftLayer::spec).collect(),
            base: c.base,
        }
    }
}

impl ComposedSampler {
    pub fn new(alpha: f64, base: BaseSampler) -> Self {
        Self {
            alpha,
            base,
            layers: Vec::new(),
        }
    }

    pub fn with_layer(&self, layer: ShiftLayer) -> Self {
        let mut next = self.clone();
        next.layers.push(layer);
        next
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

impl Sampler for ComposedSampler {
    fn eval(&self, x: f64) -> f64 {
        self.base.eval(x) + self.layers.iter().map(|l| l.shift_at(x)).sum::<f64>()
    }

    fn sup_bound(&self) -> f64 {
        self.base.sup_bound() + self.layers.iter().map(ShiftLayer::max_shift).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{frac, TowerKind};
    use crate::measures::kernel::unit_cdf;

    #[test]
    fn single_column_is_the_median() {
        assert_eq!(shift_values(0.3, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_columns_are_quartiles() {
        let s = shift_values(0.2, 2).unwrap();
        assert_eq!(s[0], -s[1]);
        assert!((unit_cdf(s[1] / 0.2) - 0.75).abs() < 1e-10);
    }

    #[test]
    fn shifts_are_quantiles_strictly_inside() {
        let eps = 0.07;
        for k in [3, 8, 64, 256] {
            let s = shift_values(eps, k).unwrap();
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            for (l, v) in s.iter().enumerate() {
                assert!(v.abs() < eps);
                let p = (2 * l + 1) as f64 / (2 * k) as f64;
                assert!((unit_cdf(v / eps) - p).abs() < 1e-10);
            }
        }
        assert!(shift_values(0.0, 4).is_err());
        assert!(shift_values(0.1, 0).is_err());
    }

    #[test]
    fn zero_shift_layer_is_identity() {
        let r = RotationSystem::golden();
        let layer = ShiftLayer::build(&r, 8, vec![0.0]).unwrap();
        let v = ComposedSampler::new(r.alpha, BaseSampler::cosine(3.0));
        let w = v.with_layer(layer);
        for i in 0..1000 {
            let x = i as f64 / 1000.0;
            assert_eq!(v.eval(x), w.eval(x));
        }
    }

    #[test]
    fn layer_is_bounded_and_continuous() {
        let r = RotationSystem::golden();
        let shifts = shift_values(0.2, 16).unwrap();
        let layer = ShiftLayer::build(&r, 8, shifts).unwrap();
        let bound = layer.max_shift();
        let n = 200_000;
        let mut prev = layer.shift_at(0.0);
        let mut worst_jump: f64 = 0.0;
        for i in 1..=n {
            let x = frac(i as f64 / n as f64);
            let v = layer.shift_at(x);
            assert!(v.abs() <= bound + 1e-15);
            worst_jump = worst_jump.max((v - prev).abs());
            prev = v;
        }
        // slope is at most 2·bound/η
        let step = 1.0 / n as f64;
        assert!(worst_jump <= 2.0 * bound / layer.ramp_width * step * 1.01 + 1e-12);
    }

    #[test]
    fn columns_carry_their_shift() {
        let r = RotationSystem::golden();
        let shifts = shift_values(0.2, 4).unwrap();
        let layer = ShiftLayer::build(&r, 6, shifts.clone()).unwrap();
        for kind in [TowerKind::Tall, TowerKind::Short] {
            for (l, s) in shifts.iter().enumerate() {
                let c = layer.tower.column(kind, l);
                let mid = frac(c.left + 0.5 * c.len);
                assert_eq!(layer.shift_at(mid), *s);
                // one floor up, same column
                assert_eq!(layer.shift_at(frac(mid + r.alpha)), *s);
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let r = RotationSystem::golden();
        let layer = ShiftLayer::build(&r, 8, shift_values(0.1, 8).unwrap()).unwrap();
        let v = ComposedSampler::new(r.alpha, BaseSampler::cosine(3.0)).with_layer(layer);
        let json = serde_json::to_string(&v).unwrap();
        let back: ComposedSampler = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        for i in 0..100 {
            let x = i as f64 * 0.0137;
            assert_eq!(back.eval(x), v.eval(x));
        }
    }

    #[test]
    fn malformed_layers_are_rejected() {
        let good = r#"{"alpha":0.6180339887498949,"base":{"kind":"zero"},"layers":[
            {"level":2,"tall":{"a":1,"p":2,"q":3},"next":{"a":1,"p":3,"q":5},
             "columns":2,"shifts":[-0.1,0.1],"ramp_width":0.001}]}"#;
        assert!(serde_json::from_str::<ComposedSampler>(good).is_ok());
        let bad_shifts = good.replace("[-0.1,0.1]", "[0.1]");
        assert!(serde_json::from_str::<ComposedSampler>(&bad_shifts).is_err());
        let not_consecutive = good.replace(r#""p":3,"q":5"#, r#""p":5,"q":8"#);
        assert!(serde_json::from_str::<ComposedSampler>(&not_consecutive).is_err());
        let wide_ramp = good.replace("0.001", "0.5");
        assert!(serde_json::from_str::<ComposedSampler>(&wide_ramp).is_err());
        let bad_alpha = good.replace("0.6180339887498949", "1.5");
        assert!(serde_json::from_str::<ComposedSampler>(&bad_alpha).is_err());
    }
}
