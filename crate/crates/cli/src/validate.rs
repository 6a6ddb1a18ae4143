use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde_json::Value;
use spectral_lab::config::{parse_composed, RunConfig};
use spectral_lab::io::{
    read_bands_json, read_curve_csv, read_ledger_csv, read_measure_csv, read_table,
};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn check_file(path: &Path, name: &str) -> Result<bool> {
    let text = || read(path);
    match name {
        "config.json" => {
            RunConfig::from_json(&text()?)?.validate()?;
        }
        "dos.csv" => {
            let nu = read_measure_csv(text()?.as_bytes())?;
            ensure!(
                (nu.total_mass() - 1.0).abs() < 1e-9,
                "mass {}",
                nu.total_mass()
            );
        }
        "ids.csv" => {
            let (_, rows) = read_table(text()?.as_bytes(), Some(&["E", "N"]))?;
            ensure!(
                rows.iter().all(|r| (-1e-12..=1.0 + 1e-12).contains(&r[1])),
                "IDS outside [0, 1]"
            );
            ensure!(
                rows.windows(2)
                    .all(|w| w[0][0] < w[1][0] && w[0][1] <= w[1][1]),
                "IDS not monotone"
            );
        }
        "bands.json" | "bands_final.json" => {
            read_bands_json(&text()?)?;
        }
        "le_direct.csv" => {
            read_table(text()?.as_bytes(), Some(&["E", "L", "stderr"]))?;
        }
        "le_thouless.csv" => {
            read_table(text()?.as_bytes(), Some(&["E", "L"]))?;
        }
        "consistency.json" => {
            ensure!(json(path)?["sup_gap"].is_number(), "missing sup_gap");
        }
        "ledger.csv" => {
            let rows = read_ledger_csv(text()?.as_bytes())?;
            ensure!(
                !rows.is_empty() && rows[0].step == 0,
                "ledger must start at step 0"
            );
        }
        "probe.csv" => {
            read_table(
                text()?.as_bytes(),
                Some(&["energy", "n", "min", "max", "mean", "l_hat", "gap"]),
            )?;
        }
        "probe_summary.json" => {
            ensure!(json(path)?["energies"].is_array(), "missing energies");
        }
        "summary.json" => {
            ensure!(json(path)?["status"].is_string(), "missing status");
        }
        n if n.starts_with("vn_step") && n.ends_with(".json") => {
            parse_composed(&text()?)?;
        }
        n if (n.starts_with("dos_step") || n.starts_with("le_step")) && n.ends_with(".csv") => {
            read_curve_csv(text()?.as_bytes())?;
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Parses and checks every recognized output in `dir`.
pub fn validate_dir(dir: &Path) -> Result<()> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    let mut checked = 0;
    for name in &names {
        let path = dir.join(name);
        if check_file(&path, name).with_context(|| format!("invalid {name}"))? {
            println!("ok {name}");
            checked += 1;
        }
    }
    if checked == 0 {
        bail!("no recognized outputs in {}", dir.display());
    }
    Ok(())
}
