//! Figure-ready CSV files derived from a results directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::selectors::TaskId;

use super::config::parse_permutation;
use super::runner::{aggregate, modal_curriculum, read_run_records, RunRecord, RunSummary};
use super::{csv_writer, HarnessError};

pub const REWARD_FILE: &str = "fig_reward_vs_steps.csv";
pub const ACTIVE_FILE: &str = "fig_active_comparison.csv";
pub const BARS_FILE: &str = "fig_curriculum_bars.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Selectors whose choices define the modal curriculum. Active-RMGS is left
/// out because it may skip tasks and its curricula are then not full length.
pub const CHOOSING_SELECTORS: [&str; 3] = ["rmgs", "ltms", "active_ltms"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotManifest {
    pub written: Vec<PathBuf>,
    /// File name and reason for each file that was not produced.
    pub omitted: Vec<(String, String)>,
}

fn load_runs(dir: &Path) -> Result<BTreeMap<String, Vec<RunRecord>>, HarnessError> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if name.starts_with("runs_") && name.ends_with(".csv") {
            let records = read_run_records(&p)?;
            if let Some(first) = records.first() {
                out.insert(first.selector.clone(), records);
            }
        }
    }
    Ok(out)
}

/// Curricula per selector from `summary.csv`.
pub fn read_summary_curricula(path: &Path) -> Result<Vec<RunSummary>, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Domain(format!("{}: missing column {name}", path.display())))
    };
    let (sel, cur) = (col("selector")?, col("curriculum")?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let curriculum = parse_permutation(row.get(cur).unwrap_or_default()).map_err(HarnessError::Domain)?;
        out.push(RunSummary {
            selector: row.get(sel).unwrap_or_default().to_string(),
            run_id: 0,
            seed: 0,
            curriculum,
            preprocess_steps: 0,
            selection_steps: 0,
            training_steps: 0,
            target_steps: 0,
            time_to_threshold: None,
            total_reward: 0.0,
            reward_complete: false,
            budget_exhausted: false,
            measured_pairs: 0,
            predicted_pairs: 0,
        });
    }
    Ok(out)
}

/// Writes the per-figure files into `dir` and returns what was produced.
pub fn emit_plot_data(dir: &Path) -> Result<PlotManifest, HarnessError> {
    let mut manifest = PlotManifest::default();
    let runs = load_runs(dir)?;

    if runs.is_empty() {
        manifest.omitted.push((REWARD_FILE.into(), "no runs_*.csv files".into()));
    } else {
        let path = dir.join(REWARD_FILE);
        let mut w = csv_writer(&path)?;
        w.write_record(["selector", "step", "mean_cumulative_reward", "std_cumulative_reward"])?;
        for (sel, recs) in &runs {
            for p in aggregate(recs) {
                w.write_record([sel.clone(), p.step.to_string(), p.mean.to_string(), p.std.to_string()])?;
            }
        }
        w.flush().map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        manifest.written.push(path);
    }

    let pairs: Vec<(&str, &str)> = [("rmgs", "active_rmgs"), ("ltms", "active_ltms")]
        .into_iter()
        .filter(|(a, b)| runs.contains_key(*a) && runs.contains_key(*b))
        .collect();
    if pairs.is_empty() {
        manifest
            .omitted
            .push((ACTIVE_FILE.into(), "no selector with both standard and active runs".into()));
    } else {
        let path = dir.join(ACTIVE_FILE);
        let mut w = csv_writer(&path)?;
        w.write_record(["family", "variant", "step", "mean_cumulative_reward", "std_cumulative_reward"])?;
        for (family, active) in pairs {
            for (variant, sel) in [("standard", family), ("active", active)] {
                for p in aggregate(&runs[sel]) {
                    w.write_record([
                        family.to_string(),
                        variant.to_string(),
                        p.step.to_string(),
                        p.mean.to_string(),
                        p.std.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        manifest.written.push(path);
    }

    let enumeration = dir.join("enumeration.csv");
    if !enumeration.is_file() {
        manifest.omitted.push((BARS_FILE.into(), "no enumeration.csv".into()));
    } else {
        let summary = dir.join("summary.csv");
        let modal: Option<Vec<TaskId>> = if summary.is_file() {
            let s = read_summary_curricula(&summary)?;
            modal_curriculum(s.iter().filter(|s| CHOOSING_SELECTORS.contains(&s.selector.as_str())))
        } else {
            None
        };
        let modal = modal.map(|m| super::config::format_permutation(&m));
        let path = dir.join(BARS_FILE);
        let mut rdr = csv::Reader::from_path(&enumeration)?;
        let mut w = csv_writer(&path)?;
        w.write_record([
            "curriculum_index",
            "permutation",
            "mean_steps_to_convergence",
            "std",
            "is_baseline",
            "is_modal",
        ])?;
        for row in rdr.records() {
            let row = row?;
            let get = |i| row.get(i).unwrap_or_default().to_string();
            let baseline = get(0) == "baseline";
            let is_modal = !baseline && modal.as_deref() == Some(row.get(1).unwrap_or_default());
            w.write_record([get(0), get(1), get(2), get(3), baseline.to_string(), is_modal.to_string()])?;
        }
        w.flush().map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        manifest.written.push(path);
    }

    let mut text = String::new();
    for p in &manifest.written {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        text.push_str(&format!("written {name}\n"));
    }
    for (name, why) in &manifest.omitted {
        text.push_str(&format!("omitted {name}: {why}\n"));
    }
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, text).map_err(|e| HarnessError::Io { path: mpath, source: e })?;
    Ok(manifest)
}
