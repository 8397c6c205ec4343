use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use nsf_core::harness::{
    parse_config, preset, run_scenario, run_sweep, CheckStatus, Mutant, RunConfig, RunStatus, SummaryReport,
    OUTPUT_ROOT_ENV,
};

const TAGS: [&str; 6] = ["KINETIC", "ENTROPY", "CORRECTED_TOTAL", "L1_BOUND", "MIN_PRINCIPLE", "ATTAINMENT"];

fn short(name: &str) -> RunConfig {
    let mut cfg = preset(name).unwrap();
    cfg.controls.t_end = 0.2;
    cfg.controls.dt = 0.01;
    cfg
}

fn run(cfg: &RunConfig, root: &Path) -> SummaryReport {
    run_scenario(cfg, root).unwrap().summary
}

fn nsf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsf"))
}

#[test]
fn steady_start_passes_and_skips_fits() {
    let root = tempfile::tempdir().unwrap();
    let s = run(&preset("steady-fixed-point").unwrap(), root.path());
    assert_eq!(s.status, RunStatus::Pass);
    for tag in TAGS {
        assert!(s.audit(tag).unwrap().pass, "{tag}");
    }
    assert_eq!(s.fits.len(), 2);
    assert!(s.fits.iter().all(|f| f.status == CheckStatus::Skipped));
    let gap = s.attainment.unwrap();
    assert!(gap.velocity <= 1e-11 && gap.temperature <= 1e-11);
}

#[test]
fn newtonian_decay_reports_each_audit_once() {
    let root = tempfile::tempdir().unwrap();
    let s = run(&short("heated-transient"), root.path());
    assert_eq!(s.status, RunStatus::Pass, "{s:#?}");
    for tag in TAGS {
        assert_eq!(s.audits.iter().filter(|a| a.name == tag).count(), 1, "{tag}");
        assert!(s.audit(tag).unwrap().pass, "{tag}");
    }
    assert_eq!(s.provenance.config_sha256.len(), 64);
}

#[test]
fn disabled_audits_are_absent() {
    let root = tempfile::tempdir().unwrap();
    let s = run(&preset("stokes-oracle").unwrap(), root.path());
    assert!(s.audit("ENTROPY").is_none() && s.audit("CORRECTED_TOTAL").is_none());
    assert_eq!(s.audits.len(), 4);
    assert_eq!(s.status, RunStatus::Pass);
}

#[test]
fn every_output_file_is_referenced_relatively() {
    let root = tempfile::tempdir().unwrap();
    let out = run_scenario(&short("powerlaw-p2.1"), root.path()).unwrap();
    let on_disk: BTreeSet<String> = fs::read_dir(&out.dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "summary.json")
        .collect();
    let listed: BTreeSet<String> = out.summary.files.iter().cloned().collect();
    assert_eq!(on_disk, listed);
    assert!(listed.iter().all(|f| !Path::new(f).is_absolute()));
    for a in &out.summary.audits {
        assert!(listed.contains(a.file.as_ref().unwrap()));
    }
    let text = fs::read_to_string(out.dir.join("energy.csv")).unwrap();
    assert!(text.starts_with("t,value\n"));
    let fields = out.summary.files.iter().find(|f| f.starts_with("fields_")).unwrap();
    let text = fs::read_to_string(out.dir.join(fields)).unwrap();
    assert!(text.starts_with("x,y,v1,v2,theta\n"));
    assert_eq!(text.lines().count(), 1 + 21 * 21);
}

#[test]
fn mutants_fail_their_targets() {
    let root = tempfile::tempdir().unwrap();
    let mut cases = Vec::new();
    for (tag, mutant) in [
        ("overwrite", Mutant::TemperatureOverwrite { from_fraction: 1.0 / 3.0, shift: 0.8 }),
        ("inject", Mutant::EnergyInjection { from_fraction: 0.1, factor: 3.0 }),
        ("cold", Mutant::ColdStart { shift: 2.5 }),
    ] {
        let mut cfg = short("heated-transient");
        cfg.output_dir = Some(tag.into());
        cfg.mutant = Some(mutant);
        cases.push(cfg);
    }
    let s: Vec<SummaryReport> = run_sweep(&cases, root.path(), 3)
        .into_iter()
        .map(|r| r.unwrap().summary)
        .collect();
    assert!(s.iter().all(|s| s.status == RunStatus::AuditFailure));
    assert!(!s[0].audit("ENTROPY").unwrap().pass);
    assert!(!s[1].audit("KINETIC").unwrap().pass);
    assert_eq!(s[1].check("energy_non_increasing").unwrap().status, CheckStatus::Fail);
    let mp = s[2].audit("MIN_PRINCIPLE").unwrap();
    assert!(!mp.pass);
    assert_eq!(mp.worst_time, Some(0.0));
}

#[test]
fn solver_abort_keeps_partial_outputs() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = short("heated-transient");
    cfg.controls.newton_max_iter = 1;
    cfg.controls.newton_tol = 1e-300;
    cfg.controls.max_halvings = 0;
    let out = run_scenario(&cfg, root.path()).unwrap();
    assert_eq!(out.summary.status, RunStatus::SolverAbort);
    assert_eq!(out.summary.exit_code(), 3);
    assert!(out.summary.abort.is_some());
    assert!(out.dir.join("summary.json").is_file());
    assert!(out.dir.join("energy.csv").is_file());
}

#[test]
fn sweep_rejects_shared_output_directory() {
    let root = tempfile::tempdir().unwrap();
    let cfg = short("steady-fixed-point");
    let results = run_sweep(&[cfg.clone(), cfg], root.path(), 2);
    assert!(results.iter().all(|r| r.is_err()));
}

#[test]
fn cli_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let ok = nsf()
        .args(["run", "steady-fixed-point"])
        .env(OUTPUT_ROOT_ENV, root.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(root.path().join("steady-fixed-point/summary.json").is_file());
    let json: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(json["status"], "pass");

    let bad = root.path().join("bad.toml");
    fs::write(&bad, "[fluid]\np = 1.3\n").unwrap();
    let out = nsf().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("8/5"));

    let mutant = root.path().join("mutant.toml");
    let mut text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/presets/steady-fixed-point.toml")).unwrap();
    text.push_str("\n[mutant]\nkind = \"cold-start\"\nshift = 2.5\n");
    fs::write(&mutant, text).unwrap();
    let out = nsf().arg("run").arg(&mutant).arg("--output-root").arg(root.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_validators() {
    let dir = tempfile::tempdir().unwrap();
    let zaba = dir.path().join("zaba.toml");
    fs::write(&zaba, "[fluid]\nkappa = { family = \"constant\", value = 1.0 }\n[lyapunov]\nalpha = 0.6\nbeta = 1.0\n").unwrap();
    let out = nsf().arg("check-zaba").arg(&zaba).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["pass"], true);

    let corr = dir.path().join("corr.toml");
    fs::write(&corr, "theta_bounds = [1.0, 3.0]\n[correction]\nfamily = \"prototype\"\nalpha = 0.5\n").unwrap();
    let out = nsf().arg("validate-correction").arg(&corr).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    let out = nsf().args(["validate-constitutive", "powerlaw-p1.8"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    let out = nsf().args(["steady", "powerlaw-p1.8"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["weak_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn cli_fit_decay_recovers_rate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("decay.csv");
    let mut text = String::from("t,value\n");
    for k in 0..=40 {
        let t = 0.05 * k as f64;
        text.push_str(&format!("{t},{}\n", (-3.0 * t).exp()));
    }
    fs::write(&csv, text).unwrap();
    let out = nsf().arg("fit-decay").arg(&csv).args(["--window", "0,2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["mu_fit"].as_f64().unwrap() - 3.0).abs() < 1e-10);
}

#[test]
fn json_config_runs() {
    let root = tempfile::tempdir().unwrap();
    let cfg = parse_config(r#"{"name": "json-run", "controls": {"dt": 0.02, "t_end": 0.2}}"#).unwrap();
    let s = run(&cfg, root.path());
    assert_eq!(s.status, RunStatus::Pass);
}
