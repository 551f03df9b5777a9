use std::fs;
use std::path::Path;
use std::process::Command;

use pairstate::physconfig::{RunConfig, WindowParams};
use pairstate_cli::{preset, run_once, run_sweep, SweepAxis, SweepSpec};

fn tiny() -> RunConfig {
    let mut c = preset("fig2").unwrap().config;
    c.numerics.n_cut = 1;
    c.numerics.steps_per_cycle = 64;
    c.numerics.n_sector_max = 3;
    c.window = WindowParams { ramp_cycles: 1, plateau_cycles: 0 };
    c
}

fn plateau_spec(dir: &Path, values: &[f64]) -> SweepSpec {
    SweepSpec {
        base: tiny(),
        sweep_axis: SweepAxis::PlateauCycles,
        values: values.to_vec(),
        outputs: dir.to_path_buf(),
        emit: Default::default(),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairstate"))
}

#[test]
fn zero_field_row_is_vacuum() {
    let row = run_once(&tiny().field_free()).unwrap().row;
    assert_eq!(row.vacuum_probability, 1.0);
    assert_eq!(row.c_n[0], 1.0);
    assert!(row.c_n[1..].iter().all(|&c| c == 0.0));
    assert!(row.top_pairs.is_empty());
    assert!(row.error.is_none());
}

#[test]
fn sweeps_are_bit_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let values = [0.0, 1.0, 3.0];
    run_sweep(&plateau_spec(a.path(), &values)).unwrap();
    run_sweep(&plateau_spec(b.path(), &values)).unwrap();
    assert_eq!(fs::read(a.path().join("sweep.csv")).unwrap(), fs::read(b.path().join("sweep.csv")).unwrap());
}

#[test]
fn composed_point_matches_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_sweep(&plateau_spec(dir.path(), &[2.0])).unwrap();
    let mut c = tiny();
    c.window.plateau_cycles = 2;
    let direct = run_once(&c).unwrap().row;
    let swept = &result.rows[0];
    assert_eq!(swept.config_hash, direct.config_hash);
    for (a, b) in swept.c_n.iter().zip(&direct.c_n) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn rerun_reuses_cached_points() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_sweep(&plateau_spec(dir.path(), &[0.0, 1.0])).unwrap();
    assert_eq!((first.computed, first.reused), (2, 0));
    let csv = fs::read(&first.csv_path).unwrap();
    let second = run_sweep(&plateau_spec(dir.path(), &[0.0, 1.0, 2.0])).unwrap();
    assert_eq!((second.computed, second.reused), (1, 2));
    let third = run_sweep(&plateau_spec(dir.path(), &[0.0, 1.0])).unwrap();
    assert_eq!((third.computed, third.reused), (0, 2));
    assert_eq!(fs::read(&third.csv_path).unwrap(), csv);
}

#[test]
fn failed_point_is_recorded_and_retried() {
    let dir = tempfile::tempdir().unwrap();
    // Unpruned enumeration up to eight pairs on 18×18 ω exceeds the budget.
    let mut base = tiny();
    base.numerics.n_cut = 4;
    base.numerics.steps_per_cycle = 16;
    base.numerics.prune_threshold = 0.0;
    base.numerics.n_sector_max = 8;
    let spec = SweepSpec { base, sweep_axis: SweepAxis::PlateauCycles, values: vec![0.0], outputs: dir.path().into(), emit: Default::default() };
    let first = run_sweep(&spec).unwrap();
    assert_eq!(first.failures(), 1);
    assert!(first.rows[0].error.as_deref().unwrap().contains("budget"));
    assert!(fs::read_to_string(&first.csv_path).unwrap().lines().count() == 2);
    let second = run_sweep(&spec).unwrap();
    assert_eq!((second.computed, second.reused), (1, 0));
}

#[test]
fn emitted_extras_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = plateau_spec(dir.path(), &[1.0]);
    spec.emit.sectors = true;
    spec.emit.pairs = true;
    spec.emit.gdump = true;
    run_sweep(&spec).unwrap();
    let hash = spec.point_config(1.0).hash_hex();
    for suffix in ["_sectors.csv", "_states.csv", "_g.bin"] {
        assert!(dir.path().join("points").join(format!("{hash}{suffix}")).exists(), "{suffix}");
    }
}

#[test]
fn alpha_sweep_runs_each_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = preset("fig4").unwrap().config;
    base.numerics = tiny().numerics;
    base.window = tiny().window;
    let values = vec![0.0, std::f64::consts::FRAC_PI_8, std::f64::consts::FRAC_PI_4];
    let spec = SweepSpec { base, sweep_axis: SweepAxis::AlphaPlus, values, outputs: dir.path().into(), emit: Default::default() };
    let result = run_sweep(&spec).unwrap();
    assert_eq!(result.failures(), 0);
    let hashes: std::collections::BTreeSet<_> = result.rows.iter().map(|r| r.config_hash.clone()).collect();
    assert_eq!(hashes.len(), 3);
}

#[test]
fn emitted_preset_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["preset", "--name", "fig4", "--emit-config"]).output().unwrap();
    assert!(out.status.success());
    let config = RunConfig::from_json_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(config, preset("fig4").unwrap().config);

    let mut small = config;
    small.numerics = tiny().numerics;
    small.window = tiny().window;
    let path = dir.path().join("small.json");
    fs::write(&path, small.to_json_pretty()).unwrap();
    let out = bin().arg("--output-dir").arg(dir.path().join("out")).args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(row["config_hash"], small.hash_hex());
    for name in ["run.json", "sectors.csv", "states.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny();
    c.numerics.n_cut = 0;
    let path = dir.path().join("bad.json");
    fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_cut"));

    fs::write(&path, "{ not json").unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_check_passes_on_small_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.json");
    fs::write(&path, tiny().to_json_pretty()).unwrap();
    let out = bin().args(["oracle-check", "--max-pairs", "1", "--config"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let check: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(check["amplitudes_compared"], 36);
}

#[test]
fn dump_commands_print_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.json");
    fs::write(&path, tiny().to_json_pretty()).unwrap();
    let basis = bin().args(["dump-basis", "--config"]).arg(&path).output().unwrap();
    assert!(basis.status.success());
    assert_eq!(String::from_utf8_lossy(&basis.stdout).lines().count(), 1 + 12);
    let field = bin().args(["dump-field", "--samples-per-cycle", "8", "--config"]).arg(&path).output().unwrap();
    assert!(field.status.success());
    let text = String::from_utf8_lossy(&field.stdout);
    assert_eq!(text.lines().count(), 1 + 2 * 8 + 1);
    assert!(text.starts_with("t_cycles,envelope"));
}
