use serde::{Deserialize, Serialize};

/// One row per construction step. Step 0 records the seed `v_0`; its
/// condition flags describe `v_0` against the same checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: usize,
    /// `ε^{(n)}`
    pub smoothing: f64,
    /// `ε_n`
    pub budget: f64,
    /// Tower level `k`, 0 when no layer was added.
    pub level: usize,
    /// Tall height `q_{k+1}`.
    pub height: u64,
    /// `K'`
    pub columns: usize,
    pub increment: f64,
    pub cumulative_increment: f64,
    pub band_count: usize,
    pub min_band_length: f64,
    pub band_floor: f64,
    pub cinf_dist: f64,
    pub le_floor: f64,
    pub le_bound: f64,
    /// Largest distance from a point of the previous smoothed support to
    /// `supp ν_{v_n}`.
    pub covering_radius: f64,
    pub inherits_bands: bool,
    pub increment_ok: bool,
    pub bands_ok: bool,
    pub cinf_ok: bool,
    pub lyapunov_ok: bool,
    pub pass: bool,
    pub attempts: usize,
}

impl LedgerRow {
    pub fn failed_conditions(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.increment_ok {
            out.push("increment");
        }
        if !self.bands_ok {
            out.push("band-length");
        }
        if !self.cinf_ok {
            out.push("cinf-distance");
        }
        if !self.lyapunov_ok {
            out.push("lyapunov-floor");
        }
        out
    }
}

/// Column order of `ledger.csv`.
pub const LEDGER_COLUMNS: [&str; 22] = [
    "step",
    "smoothing",
    "budget",
    "level",
    "height",
    "columns",
    "increment",
    "cumulative_increment",
    "band_count",
    "min_band_length",
    "band_floor",
    "cinf_dist",
    "le_floor",
    "le_bound",
    "covering_radius",
    "inherits_bands",
    "increment_ok",
    "bands_ok",
    "cinf_ok",
    "lyapunov_ok",
    "pass",
    "attempts",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstructionLedger {
    pub eps: f64,
    pub l0: f64,
    pub seed_delta: f64,
    pub rows: Vec<LedgerRow>,
}

impl ConstructionLedger {
    /// Every step row (n ≥ 1) passed.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().filter(|r| r.step > 0).all(|r| r.pass)
    }

    pub fn total_increment(&self) -> f64 {
        self.rows.iter().map(|r| r.increment).sum()
    }

    /// `Σ ‖v_k − v_{k−1}‖∞ < ε` at every prefix.
    pub fn budget_safe(&self) -> bool {
        let mut acc = 0.0;
        self.rows.iter().all(|r| {
            acc += r.increment;
            acc < self.eps
        })
    }

    /// Triangle-inequality bound on the distance between the step-0 and
    /// step-n smoothed densities.
    pub fn telescoped_cinf(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.step > 0)
            .map(|r| r.cinf_dist)
            .sum()
    }
}
