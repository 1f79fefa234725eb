mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use activesim::harness::config::{format_permutation, parse_permutation};
use activesim::harness::runner::SUMMARY_HEADER;
use activesim::harness::{
    emit_plot_data, enumerate_curricula, monte_carlo, permutations, write_enumeration, write_outputs,
    ExperimentConfig, SelectorKind,
};
use common::unrank_permutation;
use proptest::prelude::*;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small_maze(out: &Path, runs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&config_path("maze.toml")).unwrap();
    cfg.runs = runs;
    cfg.output = out.to_path_buf();
    cfg
}

#[test]
fn permutations_match_factorial_unranking() {
    for k in 0..=6 {
        let perms = permutations(k);
        let count: usize = (1..=k).product();
        assert_eq!(perms.len(), count);
        for (rank, p) in perms.iter().enumerate() {
            assert_eq!(*p, unrank_permutation(k, rank), "k={k} rank={rank}");
        }
    }
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["maze.toml", "gridworld.toml", "cartpole.toml"] {
        let cfg = ExperimentConfig::load(&config_path(name)).unwrap();
        let text = cfg.to_toml().unwrap();
        let again = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(again.to_toml().unwrap(), text, "{name}");
        assert_eq!(cfg.source_count(), 4, "{name}");
    }
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn aggregate_and_summary_recount_from_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_maze(dir.path(), 5);
    let report = monte_carlo(&cfg, Some(2)).unwrap();
    assert!(report.failures.is_empty());
    write_outputs(&cfg, &report, dir.path()).unwrap();

    // Per selector and run: (cumulative_steps, cumulative_reward) series and
    // the step at which the target converged.
    let mut curves: BTreeMap<String, BTreeMap<usize, Vec<(u64, f64)>>> = BTreeMap::new();
    let mut converged_at: BTreeMap<(String, usize), u64> = BTreeMap::new();
    for kind in &cfg.selectors {
        let (h, rows) = read_table(&dir.path().join(format!("runs_{kind}.csv")));
        let (run, steps, cum, phase, conv) = (
            column(&h, "run_id"),
            column(&h, "cumulative_steps"),
            column(&h, "cumulative_reward"),
            column(&h, "phase"),
            column(&h, "converged"),
        );
        for r in rows {
            let id: usize = r[run].parse().unwrap();
            let s: u64 = r[steps].parse().unwrap();
            curves
                .entry(kind.to_string())
                .or_default()
                .entry(id)
                .or_default()
                .push((s, r[cum].parse().unwrap()));
            if r[phase] == "target" && r[conv] == "true" {
                converged_at.insert((kind.to_string(), id), s);
            }
        }
    }

    let (h, rows) = read_table(&dir.path().join("aggregate.csv"));
    let (sel, step, mean, std) = (
        column(&h, "selector"),
        column(&h, "step"),
        column(&h, "mean_cumulative_reward"),
        column(&h, "std_cumulative_reward"),
    );
    assert!(!rows.is_empty());
    for r in &rows {
        let at: u64 = r[step].parse().unwrap();
        let values: Vec<f64> = curves[&r[sel]]
            .values()
            .map(|c| c.iter().take_while(|(s, _)| *s <= at).last().map_or(0.0, |p| p.1))
            .collect();
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((r[mean].parse::<f64>().unwrap() - m).abs() < 1e-9);
        assert!((r[std].parse::<f64>().unwrap() - sd).abs() < 1e-9);
    }

    let (h, rows) = read_table(&dir.path().join("summary.csv"));
    assert_eq!(h, SUMMARY_HEADER);
    let (sel, run, ttt, total) = (
        column(&h, "selector"),
        column(&h, "run_id"),
        column(&h, "time_to_threshold"),
        column(&h, "total_steps"),
    );
    assert_eq!(rows.len(), 5 * cfg.selectors.len());
    for r in rows {
        let key = (r[sel].clone(), r[run].parse::<usize>().unwrap());
        match converged_at.get(&key) {
            Some(&s) => {
                assert_eq!(r[ttt], s.to_string());
                assert_eq!(r[total], s.to_string());
            }
            None => assert_eq!(r[ttt], "NA"),
        }
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn same_seed_gives_identical_files_for_any_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, jobs) in [(&a, 1), (&b, 3)] {
        let cfg = small_maze(dir.path(), 4);
        write_outputs(&cfg, &monte_carlo(&cfg, Some(jobs)).unwrap(), dir.path()).unwrap();
        emit_plot_data(dir.path()).unwrap();
    }
    let (x, y) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert!(x.len() > 5);
    assert_eq!(x, y);
    for bytes in x.values() {
        assert!(!bytes.contains(&b'\r'));
    }
}

#[test]
fn enumeration_lists_every_curriculum_and_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_maze(dir.path(), 2);
    let e = enumerate_curricula(&cfg, None).unwrap();
    assert_eq!(e.curricula().count(), 24);
    assert!(e.baseline().is_some());
    let path = dir.path().join("enumeration.csv");
    write_enumeration(&e, &path).unwrap();
    let (h, rows) = read_table(&path);
    assert_eq!(h, ["curriculum_index", "permutation", "mean_steps_to_convergence", "std"]);
    assert_eq!(rows.len(), 25);
    for (i, r) in rows.iter().take(24).enumerate() {
        assert_eq!(r[0], i.to_string());
        assert_eq!(r[1], format_permutation(&unrank_permutation(4, i)));
    }
    assert_eq!(rows[24][..2], ["baseline".to_string(), "none".to_string()]);
}

#[test]
fn enumeration_refuses_too_many_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_maze(dir.path(), 1);
    cfg.enumerate_cap = 3;
    assert!(enumerate_curricula(&cfg, None).is_err());
}

#[test]
fn plot_data_reports_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = emit_plot_data(dir.path()).unwrap();
    assert!(m.written.is_empty());
    assert_eq!(m.omitted.len(), 3);
    assert!(dir.path().join("manifest.txt").is_file());
}

#[test]
fn fixed_selector_names_parse() {
    let kinds: Vec<SelectorKind> = ["baseline", "rmgs", "fixed:3-1-0-2"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(kinds[2], SelectorKind::Fixed(vec![3, 1, 0, 2]));
}

proptest! {
    #[test]
    fn permutation_text_round_trips(p in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
        prop_assert_eq!(parse_permutation(&format_permutation(&p)).unwrap(), p);
    }
}
