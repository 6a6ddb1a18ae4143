use serde::{Deserialize, Serialize};

use super::budgets::Budgets;
use super::layer::{shift_values, ComposedSampler, ShiftLayer};
use super::ledger::{ConstructionLedger, LedgerRow};
use crate::dynamics::{RotationSystem, System};
use crate::error::{LabError, Result};
use crate::measures::bands::{smoothed_support, BandSet};
use crate::measures::curve::{cinf_dist, mollified_ids, mollify, DensityCurve, EnergyGrid};
use crate::operator::{empirical_dos, EmpiricalMeasure};
use crate::sampler::{BaseSampler, Sampler};
use crate::thouless::density_log_potential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructionParams {
    /// Truncation size for the empirical DOS.
    pub n: usize,
    /// Base-point samples for the empirical DOS.
    pub m: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub j: usize,
    pub weight_tol: f64,
    /// Smallest smoothed Lyapunov floor accepted for `v_0`.
    pub seed_margin: f64,
    /// Seed perturbations `δ = f·ε_0` tried in order.
    pub seed_fractions: Vec<f64>,
    pub columns_min: usize,
    pub columns_max: usize,
    pub level_escalations: usize,
    pub halvings: usize,
    /// The first tower level tried has tall height at least this.
    pub min_height: u64,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        Self {
            n: 2000,
            m: 50,
            seed: 1,
            grid_size: 4001,
            j: 8,
            weight_tol: 1e-4,
            seed_margin: 0.02,
            seed_fractions: vec![0.0, 0.25, 0.5, 0.75],
            columns_min: 8,
            columns_max: 256,
            level_escalations: 4,
            halvings: 6,
            min_height: 64,
        }
    }
}

impl ConstructionParams {
    pub fn validate(&self) -> Result<()> {
        let p = |f: &str, r: &str| Err(LabError::param(format!("construction.{f}"), r));
        if self.n < 8 {
            return p("N", "must be at least 8");
        }
        if self.m == 0 {
            return p("M", "must be at least 1");
        }
        if self.grid_size < 3 {
            return p("grid_size", "must be at least 3");
        }
        if self.j == 0 || self.j >= crate::measures::kernel::MAX_ORDER {
            return p("J", "must lie in 1..16");
        }
        if !(self.weight_tol >= 0.0 && self.weight_tol < 1.0) {
            return p("weight_tol", "must lie in [0, 1)");
        }
        if !(self.seed_margin > 0.0) {
            return p("seed_margin", "must be positive");
        }
        if self.seed_fractions.is_empty()
            || self.seed_fractions.iter().any(|f| !(*f >= 0.0 && *f < 1.0))
        {
            return p("seed_fractions", "need values in [0, 1)");
        }
        if self.columns_min == 0 || self.columns_max < self.columns_min {
            return p("columns_max", "need 1 ≤ columns_min ≤ columns_max");
        }
        if self.level_escalations == 0 {
            return p("level_escalations", "must be at least 1");
        }
        Ok(())
    }
}

/// Everything measured for one sampler at one smoothing size.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub step: usize,
    pub sampler: ComposedSampler,
    pub smoothing: f64,
    pub dos: EmpiricalMeasure,
    /// `S_{ε^{(n)}} ν_{v_n}` with derivatives.
    pub dos_curve: DensityCurve,
    /// `S_{ε^{(n)}} L_{v_n}`.
    pub le_curve: DensityCurve,
    pub bands: BandSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTrial {
    pub delta: f64,
    pub le_floor: f64,
}

#[derive(Debug, Clone)]
pub struct ConstructionState {
    pub system: RotationSystem,
    pub params: ConstructionParams,
    pub budgets: Budgets,
    pub grid: EnergyGrid,
    pub current: StepSnapshot,
    pub ledger: ConstructionLedger,
    pub seed_trials: Vec<SeedTrial>,
}

/// The fixed energy window `[−M, M]`, `M = 2 + ‖ṽ‖∞ + ε`.
pub fn energy_window(v_tilde: &BaseSampler, eps: f64, size: usize) -> Result<EnergyGrid> {
    let m = 2.0 + v_tilde.sup_bound() + eps;
    if !m.is_finite() {
        return Err(LabError::param("sampler", "needs a finite sup bound"));
    }
    EnergyGrid::linspace(-m, m, size)
}

fn evaluate(
    sampler: ComposedSampler,
    step: usize,
    smoothing: f64,
    system: &RotationSystem,
    grid: &EnergyGrid,
    params: &ConstructionParams,
) -> Result<StepSnapshot> {
    let dos = measure(&sampler, system, params)?;
    smooth(sampler, dos, step, smoothing, grid, params)
}

fn measure(
    sampler: &ComposedSampler,
    system: &RotationSystem,
    params: &ConstructionParams,
) -> Result<EmpiricalMeasure> {
    let sys = System::Rotation(system.clone());
    empirical_dos(sampler, &sys, params.n, params.m, params.seed)
}

fn smooth(
    sampler: ComposedSampler,
    dos: EmpiricalMeasure,
    step: usize,
    smoothing: f64,
    grid: &EnergyGrid,
    params: &ConstructionParams,
) -> Result<StepSnapshot> {
    let dos_curve = mollify(&dos, smoothing, grid, params.j.max(1))?;
    let le_curve = density_log_potential(&dos_curve, 0)?;
    let bands = smoothed_support(&dos, smoothing, params.weight_tol)?;
    Ok(StepSnapshot {
        step,
        sampler,
        smoothing,
        dos,
        dos_curve,
        le_curve,
        bands,
    })
}

/// Seeds the construction: picks `v_0 = ṽ + δ cos(2πω)` with a positive
/// smoothed Lyapunov floor and fixes `L^{(0)}`.
pub fn init(
    v_tilde: &BaseSampler,
    eps: f64,
    system: &RotationSystem,
    params: &ConstructionParams,
) -> Result<ConstructionState> {
    params.validate()?;
    if !system.is_irrational() {
        return Err(LabError::param(
            "system.alpha",
            "construction needs irrational alpha",
        ));
    }
    if !v_tilde.is_finite() {
        return Err(LabError::param("sampler", "parameters must be finite"));
    }
    let mut budgets = Budgets::new(eps)?;
    let grid = energy_window(v_tilde, eps, params.grid_size)?;
    let eps0 = budgets.eps_n(0);
    let smoothing = budgets.initial_smoothing();
    let mut trials = Vec::new();
    let mut accepted = None;
    for f in &params.seed_fractions {
        let delta = f * eps0;
        let base = v_tilde.plus_cosine(delta).ok_or_else(|| {
            LabError::param(
                "sampler",
                "identity sampler cannot seed a rotation construction",
            )
        })?;
        let sampler = ComposedSampler::new(system.alpha, base);
        let snap = evaluate(sampler, 0, smoothing, system, &grid, params)?;
        let le_floor = snap.le_curve.min_value();
        trials.push(SeedTrial { delta, le_floor });
        if le_floor >= params.seed_margin {
            accepted = Some((delta, snap));
            break;
        }
    }
    let Some((delta, snap)) = accepted else {
        let tried: Vec<String> = trials
            .iter()
            .map(|t| format!("δ={:.3e}: floor {:.4}", t.delta, t.le_floor))
            .collect();
        return Err(LabError::Seeding(format!(
            "no v_0 within ε_0 = {eps0} reached smoothed Lyapunov floor {} ({})",
            params.seed_margin,
            tried.join(", ")
        )));
    };
    let l0 = snap.le_curve.min_value();
    budgets.set_l0(l0)?;
    budgets.smoothing.push(smoothing);
    let min_len = snap.bands.min_length().unwrap_or(0.0);
    let band_floor = 2.0 * smoothing;
    let row = LedgerRow {
        step: 0,
        smoothing,
        budget: eps0,
        level: 0,
        height: 0,
        columns: 0,
        increment: delta,
        cumulative_increment: delta,
        band_count: snap.bands.count(),
        min_band_length: min_len,
        band_floor,
        cinf_dist: 0.0,
        le_floor: l0,
        le_bound: l0,
        covering_radius: 0.0,
        inherits_bands: true,
        increment_ok: delta < eps0,
        bands_ok: min_len >= band_floor * (1.0 - 1e-12),
        cinf_ok: true,
        lyapunov_ok: l0 > 0.0,
        pass: delta < eps0 && min_len >= band_floor * (1.0 - 1e-12) && l0 > 0.0,
        attempts: trials.len(),
    };
    let ledger = ConstructionLedger {
        eps,
        l0,
        seed_delta: delta,
        rows: vec![row],
    };
    Ok(ConstructionState {
        system: system.clone(),
        params: params.clone(),
        budgets,
        grid,
        current: snap,
        ledger,
        seed_trials: trials,
    })
}

/// Smallest level whose tall tower has height at least `min_height`.
pub fn first_level(system: &RotationSystem, min_height: u64) -> Option<usize> {
    let terms = &system.cf.terms;
    (0..terms.len().saturating_sub(1)).find(|&k| terms[k + 1].q >= min_height)
}

/// The current sampler with one more layer: quantile shifts of
/// `s_{ε^{(n−1)}}` on `K'` columns of the level-`k` towers.
pub fn apply_layer(state: &ConstructionState, k: usize, columns: usize) -> Result<ComposedSampler> {
    let shifts = shift_values(state.current.smoothing, columns)?;
    let layer = ShiftLayer::build(&state.system, k, shifts)?;
    Ok(state.current.sampler.with_layer(layer))
}

/// Measures `candidate` at smoothing `eps_n` and checks the four step
/// conditions against the budgets. Rejects `eps_n ∉ (0, ε_{n+1})` before
/// any evaluation.
pub fn verify_step(
    state: &ConstructionState,
    candidate: &ComposedSampler,
    eps_n: f64,
) -> Result<(LedgerRow, StepSnapshot)> {
    verify_with(state, candidate, eps_n, None)
}

fn verify_with(
    state: &ConstructionState,
    candidate: &ComposedSampler,
    eps_n: f64,
    dos: Option<EmpiricalMeasure>,
) -> Result<(LedgerRow, StepSnapshot)> {
    let n = state.current.step + 1;
    state.budgets.check_smoothing(n, eps_n)?;
    if candidate.depth() != state.current.sampler.depth() + 1 {
        return Err(LabError::param("candidate", "must add exactly one layer"));
    }
    let layer = candidate.layers.last().expect("one layer was added");
    let dos = match dos {
        Some(d) => d,
        None => measure(candidate, &state.system, &state.params)?,
    };
    let snap = smooth(candidate.clone(), dos, n, eps_n, &state.grid, &state.params)?;
    let prev = &state.current;
    let budget = state.budgets.eps_n(n);
    let increment = layer.max_shift();
    let cumulative = state.ledger.total_increment() + increment;
    let band_floor = 2.0 * state.budgets.initial_smoothing();
    let min_len = snap.bands.min_length().unwrap_or(0.0);
    let cinf = cinf_dist(&prev.dos_curve, &snap.dos_curve, state.params.j)?;
    let le_floor = snap.le_curve.min_value();
    let le_bound = state
        .budgets
        .lyapunov_floor(n)
        .expect("L0 is fixed at init");
    let increment_ok = increment < budget;
    let bands_ok = min_len >= band_floor * (1.0 - 1e-12);
    let cinf_ok = cinf < budget;
    let lyapunov_ok = le_floor >= le_bound;
    let row = LedgerRow {
        step: n,
        smoothing: eps_n,
        budget,
        level: layer.tower.level,
        height: layer.tower.height,
        columns: layer.columns(),
        increment,
        cumulative_increment: cumulative,
        band_count: snap.bands.count(),
        min_band_length: min_len,
        band_floor,
        cinf_dist: cinf,
        le_floor,
        le_bound,
        covering_radius: prev.bands.covering_radius(&snap.dos),
        inherits_bands: snap.bands.each_contains_one_of(&prev.bands),
        increment_ok,
        bands_ok,
        cinf_ok,
        lyapunov_ok,
        pass: increment_ok && bands_ok && cinf_ok && lyapunov_ok,
        attempts: 1,
    };
    Ok((row, snap))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub step: usize,
    pub attempts: usize,
    /// The attempt with the fewest failed conditions.
    pub best: Option<LedgerRow>,
}

impl std::fmt::Display for StepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {} failed after {} attempts",
            self.step, self.attempts
        )?;
        if let Some(b) = &self.best {
            write!(
                f,
                "; best attempt (k={}, K'={}, ε={:.3e}) failed {}",
                b.level,
                b.columns,
                b.smoothing,
                b.failed_conditions().join(", ")
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub ledger: ConstructionLedger,
    /// Accepted steps `0..=n`.
    pub snapshots: Vec<StepSnapshot>,
    pub seed_trials: Vec<SeedTrial>,
    pub failure: Option<StepFailure>,
}

impl RunOutcome {
    pub fn final_snapshot(&self) -> &StepSnapshot {
        self.snapshots
            .last()
            .expect("the seed step is always present")
    }
}

fn better(a: &LedgerRow, b: &LedgerRow) -> bool {
    let (fa, fb) = (a.failed_conditions().len(), b.failed_conditions().len());
    fa < fb || (fa == fb && a.cinf_dist < b.cinf_dist)
}

/// Tries tower levels (inner) and column counts (outer) at a smoothing
/// size, halving it while the C∞ condition is among the failures. Each
/// candidate's DOS is computed once and reused across halvings.
fn advance(
    state: &mut ConstructionState,
) -> Result<std::result::Result<StepSnapshot, StepFailure>> {
    let n = state.current.step + 1;
    let p = state.params.clone();
    let k0 = first_level(&state.system, p.min_height).ok_or_else(|| {
        LabError::param(
            "system.alpha",
            "expansion too short for the minimum tower height",
        )
    })?;
    let mut candidates = Vec::new();
    let mut columns = p.columns_min;
    while columns <= p.columns_max {
        for k in k0..k0 + p.level_escalations {
            if let Ok(c) = apply_layer(state, k, columns) {
                candidates.push(c);
            }
        }
        columns *= 2;
    }
    let mut measured: Vec<Option<EmpiricalMeasure>> = vec![None; candidates.len()];
    let mut eps_n = state.budgets.trial_smoothing(n);
    let mut attempts = 0;
    let mut best: Option<LedgerRow> = None;
    for _ in 0..=p.halvings {
        let mut cinf_failed = false;
        for (candidate, dos) in candidates.iter().zip(measured.iter_mut()) {
            {
                attempts += 1;
                let nu = match dos {
                    Some(d) => d.clone(),
                    None => {
                        let d = measure(candidate, &state.system, &p)?;
                        *dos = Some(d.clone());
                        d
                    }
                };
                let (mut row, snap) = verify_with(state, candidate, eps_n, Some(nu))?;
                row.attempts = attempts;
                if row.pass {
                    state.budgets.smoothing.push(eps_n);
                    state.ledger.rows.push(row);
                    return Ok(Ok(snap));
                }
                cinf_failed |= !row.cinf_ok;
                if best.as_ref().is_none_or(|b| better(&row, b)) {
                    best = Some(row);
                }
            }
        }
        if !cinf_failed {
            break;
        }
        eps_n *= 0.5;
    }
    if let Some(b) = &best {
        state.ledger.rows.push(b.clone());
    }
    Ok(Err(StepFailure {
        step: n,
        attempts,
        best,
    }))
}

/// Runs `n_steps` construction steps from `ṽ`. Seeding failures are
/// errors; a step that exhausts the escalation caps ends the run with
/// partial results and [`RunOutcome::failure`] set.
pub fn run(
    v_tilde: &BaseSampler,
    eps: f64,
    n_steps: usize,
    system: &RotationSystem,
    params: &ConstructionParams,
) -> Result<RunOutcome> {
    let mut state = init(v_tilde, eps, system, params)?;
    let mut snapshots = vec![state.current.clone()];
    for _ in 0..n_steps {
        match advance(&mut state)? {
            Ok(snap) => {
                state.current = snap.clone();
                snapshots.push(snap);
            }
            Err(failure) => {
                return Ok(RunOutcome {
                    ledger: state.ledger,
                    snapshots,
                    seed_trials: state.seed_trials,
                    failure: Some(failure),
                })
            }
        }
    }
    Ok(RunOutcome {
        ledger: state.ledger,
        snapshots,
        seed_trials: state.seed_trials,
        failure: None,
    })
}

/// Sup over `grid` of `|N_{S_ε ν}(x) − N_mix(x)|`, where `mix` averages
/// `quantiles` translates of `ν` at the quantile shifts of `s_ε`.
pub fn direct_integral_gap(
    nu: &EmpiricalMeasure,
    eps: f64,
    quantiles: usize,
    grid: &EnergyGrid,
) -> Result<f64> {
    let shifts = shift_values(eps, quantiles)?;
    let probs = vec![1.0 / quantiles as f64; quantiles];
    let mix = nu.translated_mixture(&shifts, &probs)?;
    Ok(grid
        .points()
        .into_iter()
        .map(|x| (mollified_ids(nu, eps, x) - mix.ids(x)).abs())
        .fold(0.0, f64::max))
}

/// `sup |v − w|` sampled on `samples` equispaced circle points.
pub fn sampled_sup_distance<A: Sampler, B: Sampler>(a: &A, b: &B, samples: usize) -> f64 {
    (0..samples)
        .map(|i| {
            let x = i as f64 / samples as f64;
            (a.eval(x) - b.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}
