use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;
use spectral_lab::cocycle::{lyapunov_curve, omega_grid, uniformity_probe};
use spectral_lab::config::{EnergySpec, ResolvedSampler, RunConfig};
use spectral_lab::construction::run as run_construction;
use spectral_lab::dynamics::System;
use spectral_lab::io::{
    write_curve_csv, write_json, write_ledger_csv, write_measure_csv, write_table,
};
use spectral_lab::measures::{support_bands, BandSet, EnergyGrid};
use spectral_lab::operator::{empirical_dos, EmpiricalMeasure};
use spectral_lab::sampler::Sampler;
use spectral_lab::thouless::thouless_curve;
use spectral_lab::LabError;

use crate::Outcome;

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(create(&dir, "config.json")?, cfg)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(
        File::create(&p).with_context(|| format!("writing {}", p.display()))?,
    ))
}

struct Spectral {
    system: System,
    sampler: ResolvedSampler,
    nu: EmpiricalMeasure,
    bands: BandSet,
    grid: EnergyGrid,
}

fn spectral(cfg: &RunConfig) -> Result<Spectral> {
    let system = cfg.system.build()?;
    let sampler = cfg.sampler.resolve()?;
    let n = &cfg.numerics;
    let nu = empirical_dos(&sampler, &system, n.n, n.m, n.seed)?;
    let bands = support_bands(&nu, n.gap_tol, n.weight_tol)?;
    let grid = n.grid.resolve(sampler.sup_bound())?;
    Ok(Spectral {
        system,
        sampler,
        nu,
        bands,
        grid,
    })
}

pub fn dos(cfg: &RunConfig) -> Result<Outcome> {
    let s = spectral(cfg)?;
    let dir = out_dir(cfg)?;
    write_measure_csv(create(&dir, "dos.csv")?, &s.nu)?;
    let rows: Vec<Vec<f64>> = s
        .grid
        .points()
        .into_iter()
        .map(|e| vec![e, s.nu.ids(e)])
        .collect();
    write_table(create(&dir, "ids.csv")?, &["E", "N"], &rows)?;
    write_json(create(&dir, "bands.json")?, &s.bands)?;
    println!(
        "{} atoms, {} bands {:?}",
        s.nu.len(),
        s.bands.count(),
        s.bands.bands()
    );
    Ok(Outcome::Done)
}

pub fn lyapunov(cfg: &RunConfig) -> Result<Outcome> {
    let s = spectral(cfg)?;
    let n = &cfg.numerics;
    let energies = s.grid.points();
    let direct = lyapunov_curve(
        &s.sampler,
        &s.system,
        &energies,
        n.lyapunov_n,
        n.lyapunov_m,
        n.seed,
    )?;
    let th = thouless_curve(&s.nu, &s.grid)?;
    let dir = out_dir(cfg)?;
    let rows: Vec<Vec<f64>> = energies
        .iter()
        .zip(&direct)
        .map(|(e, l)| vec![*e, l.value, l.stderr])
        .collect();
    write_table(create(&dir, "le_direct.csv")?, &["E", "L", "stderr"], &rows)?;
    let rows: Vec<Vec<f64>> = energies
        .iter()
        .zip(th.values())
        .map(|(e, l)| vec![*e, *l])
        .collect();
    write_table(create(&dir, "le_thouless.csv")?, &["E", "L"], &rows)?;
    let mut sup_gap = 0.0f64;
    let mut at = None;
    let mut compared = 0;
    for (i, e) in energies.iter().enumerate() {
        if s.bands.edge_distance(*e) <= n.edge_exclusion {
            continue;
        }
        compared += 1;
        let gap = (direct[i].value - th.values()[i]).abs();
        if gap > sup_gap || at.is_none() {
            sup_gap = sup_gap.max(gap);
            at = Some(*e);
        }
    }
    let summary = json!({
        "sup_gap": sup_gap,
        "argmax_energy": at,
        "compared_points": compared,
        "excluded_points": energies.len() - compared,
        "edge_exclusion": n.edge_exclusion,
        "nudged_points": th.nudged.len(),
        "bands": s.bands,
    });
    write_json(create(&dir, "consistency.json")?, &summary)?;
    println!("sup gap {sup_gap} over {compared} energies");
    Ok(Outcome::Done)
}

pub fn construct(cfg: &RunConfig) -> Result<Outcome> {
    let system = cfg.system.rotation()?;
    let Some(target) = cfg.sampler.base() else {
        return Err(
            LabError::param("sampler.kind", "construction needs a closed-form target").into(),
        );
    };
    let c = &cfg.construction;
    let params = cfg.construction_params();
    let dir = out_dir(cfg)?;
    let out = match run_construction(&target, c.eps, c.n_steps, &system, &params) {
        Ok(out) => out,
        Err(e @ LabError::Seeding(_)) => {
            let diag = json!({ "status": "seeding-failed", "diagnostic": e.to_string() });
            write_json(create(&dir, "summary.json")?, &diag)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_ledger_csv(create(&dir, "ledger.csv")?, &out.ledger.rows)?;
    for snap in &out.snapshots {
        let k = snap.step;
        write_json(create(&dir, &format!("vn_step{k}.json"))?, &snap.sampler)?;
        write_curve_csv(create(&dir, &format!("dos_step{k}.csv"))?, &snap.dos_curve)?;
        write_curve_csv(create(&dir, &format!("le_step{k}.csv"))?, &snap.le_curve)?;
    }
    let last = out.final_snapshot();
    write_json(create(&dir, "bands_final.json")?, &last.bands)?;
    let passed = out.failure.is_none() && out.ledger.all_pass();
    let summary = json!({
        "status": if passed { "pass" } else { "capped" },
        "failure": out.failure.as_ref().map(|f| f.to_string()),
        "steps_accepted": out.snapshots.len() - 1,
        "l0": out.ledger.l0,
        "seed_delta": out.ledger.seed_delta,
        "seed_trials": out.seed_trials,
        "total_increment": out.ledger.total_increment(),
        "budget_safe": out.ledger.budget_safe(),
        "final_band_count": last.bands.count(),
        "final_le_floor": last.le_curve.min_value(),
        "telescoped_cinf": out.ledger.telescoped_cinf(),
    });
    write_json(create(&dir, "summary.json")?, &summary)?;
    for r in &out.ledger.rows {
        println!(
            "step {} k={} K'={} ε={:.4e} increment={:.4e} bands={} min_len={:.4} cinf={:.4e}/{:.4e} floor={:.4}/{:.4} {}",
            r.step,
            r.level,
            r.columns,
            r.smoothing,
            r.increment,
            r.band_count,
            r.min_band_length,
            r.cinf_dist,
            r.budget,
            r.le_floor,
            r.le_bound,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(f) = &out.failure {
        eprintln!("capped: {f}");
        return Ok(Outcome::Capped);
    }
    Ok(Outcome::Done)
}

/// Energy of minimal direct Lyapunov exponent among grid points in the
/// detected spectrum.
fn min_spectrum_energy(cfg: &RunConfig, s: &Spectral) -> Result<f64> {
    let inside: Vec<f64> = s
        .grid
        .points()
        .into_iter()
        .filter(|e| s.bands.contains(*e))
        .collect();
    if inside.is_empty() {
        bail!("no grid energy lies in the detected spectrum");
    }
    let n = &cfg.numerics;
    let l = lyapunov_curve(
        &s.sampler,
        &s.system,
        &inside,
        n.lyapunov_n,
        n.lyapunov_m,
        n.seed,
    )?;
    let (i, _) = l
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .expect("nonempty");
    Ok(inside[i])
}

pub fn walters(cfg: &RunConfig) -> Result<Outcome> {
    let w = &cfg.walters;
    let needs_spectrum = w.energies.iter().any(|e| matches!(e, EnergySpec::Named(_)));
    let (system, sampler) = (cfg.system.build()?, cfg.sampler.resolve()?);
    if system.as_rotation().is_none() {
        return Err(LabError::param("system.kind", "the probe needs a rotation").into());
    }
    let spec = if needs_spectrum {
        Some(spectral(cfg)?)
    } else {
        None
    };
    let mut energies = Vec::new();
    for e in &w.energies {
        let (label, value) = match e {
            EnergySpec::Value(x) => (x.to_string(), *x),
            EnergySpec::Named(name) => {
                let s = spec.as_ref().expect("computed above");
                match name.as_str() {
                    "min-spectrum" => (name.clone(), min_spectrum_energy(cfg, s)?),
                    _ => {
                        let (_, hi) = s.bands.hull().context("empty spectrum")?;
                        (name.clone(), hi + 1.0)
                    }
                }
            }
        };
        energies.push((label, value));
    }
    let grid = omega_grid(w.grid_size);
    let dir = out_dir(cfg)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (label, e) in &energies {
        let stats = uniformity_probe(&sampler, &system, *e, &w.n_list, &grid)?;
        for s in &stats {
            rows.push(vec![*e, s.n as f64, s.min, s.max, s.mean, s.l_hat, s.gap()]);
        }
        let last = stats.last().expect("n_list is nonempty");
        println!("E = {e} ({label}): gap({}) = {}", last.n, last.gap());
        summary.push(json!({
            "label": label,
            "energy": e,
            "n": last.n,
            "l_hat": last.l_hat,
            "min": last.min,
            "max": last.max,
            "gap": last.gap(),
            "gaps": stats.iter().map(|s| s.gap()).collect::<Vec<_>>(),
        }));
    }
    write_table(
        create(&dir, "probe.csv")?,
        &["energy", "n", "min", "max", "mean", "l_hat", "gap"],
        &rows,
    )?;
    write_json(
        create(&dir, "probe_summary.json")?,
        &json!({ "n_list": w.n_list, "grid_size": w.grid_size, "energies": summary }),
    )?;
    Ok(Outcome::Done)
}
