use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use halpern::iteration::{halpern_orbit, read_trace_csv};
use halpern::numeric::{nat, rat};
use halpern::verify::{check_asymptotic_regularity, first_regularity_violation};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_halpern"));
    c.env_remove("HALPERN_BUDGET");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (status.code().unwrap(), String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

fn residual_column(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
}

const IDENTITY: &str = "\
[instance ident]
space = hilbert 3
operator = identity 3
schedule = natural-shifted
u = 1, 2, 3
x0 = -1, 0, 4
steps = 200
";

const ROTATION: &str = "\
[experiment]
path_length = 50

[instance rot]
space = hilbert 2
operator = rotation pi/3
schedule = natural-shifted
u = 1, 0
x0 = 0, 1
fixed_point = 0, 0
steps = 10000
";

#[test]
fn iterate_identity_has_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ident.conf", IDENTITY);
    let (code, _, err) = run(bin().arg("iterate").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let trace = std::fs::read_to_string(dir.path().join("ident.trace.csv")).unwrap();
    assert!(trace.starts_with("n,alpha,x_0,x_1,x_2,residual\n"));
    let res = residual_column(&trace);
    assert_eq!(res.len(), 201);
    assert!(res.iter().all(|r| *r == 0.0));
    let path = std::fs::read_to_string(dir.path().join("ident.path.csv")).unwrap();
    assert!(path.starts_with("m,t,z_0,z_1,z_2,residual\n"));
}

#[test]
fn iterate_rotation_tail_is_positive_and_decaying() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rot.conf", ROTATION);
    let (code, _, err) = run(bin().arg("iterate").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let res = residual_column(&std::fs::read_to_string(dir.path().join("rot.trace.csv")).unwrap());
    assert_eq!(res.len(), 10_001);
    let tail = &res[5000..];
    assert!(tail.iter().all(|r| *r > 0.0));
    // The residual oscillates with the rotation; its envelope decays like 1/n.
    let peaks: Vec<f64> = res[1000..].chunks(1000).map(|c| c.iter().copied().fold(0.0, f64::max)).collect();
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
    assert!(peaks[peaks.len() - 1] < peaks[0] / 5.0);
}

#[test]
fn iterate_reports_missing_key_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = IDENTITY.replace("schedule = natural-shifted\n", "");
    let cfg = write_config(dir.path(), "bad.conf", &body);
    let (code, _, err) = run(bin().arg("iterate").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 2);
    assert!(err.contains("missing key 'schedule'"), "{err}");
}

#[test]
fn iterate_reports_iteration_cap_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = ROTATION.replace("path_length = 50", "path_length = 50\ntol = 1e-300");
    let cfg = write_config(dir.path(), "tight.conf", &body);
    let (code, _, err) = run(bin().arg("iterate").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 3, "{err}");
}

#[test]
fn rates_subcommand() {
    let (code, out, _) = run(bin().args(["rates", "--which", "psi-closed", "--M", "1", "--eps", "1"]));
    assert_eq!((code, out.as_str()), (0, "Exact 36\n"));
    let (code, out, _) = run(bin().args(["rates", "--which", "K", "--M", "1", "--eps", "1/2", "--g", "affine 1 1"]));
    assert_eq!((code, out.as_str()), (0, "Exact 4\n"));
    let (code, out, _) = run(bin().args(["rates", "--which", "sigma", "--M", "2", "--eps", "1/2", "--g", "id"]));
    assert_eq!(code, 0);
    assert!(out.starts_with("BudgetExceeded lower="), "{out}");
    let (code, _, _) =
        run(bin().args(["rates", "--which", "sigma", "--M", "2", "--eps", "1/2", "--modulus", "empirical"]));
    assert_eq!(code, 4);
    let (code, _, _) = run(bin().args(["rates", "--which", "psi", "--M", "1"]));
    assert_eq!(code, 2);
    let (code, _, _) = run(bin().args(["rates", "--which", "psi", "--M", "1", "--eps", "0"]));
    assert_eq!(code, 2);
}

#[test]
fn budget_env_var_overrides_default() {
    let args = ["rates", "--which", "K", "--M", "1", "--eps", "1/8", "--g", "affine 1 1"];
    let (_, out, _) = run(bin().args(args));
    assert_eq!(out, "Exact 64\n");
    let (code, out, _) = run(bin().args(args).env("HALPERN_BUDGET", "10"));
    assert_eq!(code, 0);
    let lower: u64 = out.strip_prefix("BudgetExceeded lower=").unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(lower < 64, "{out}");
    let (code, _, _) = run(bin().args(args).env("HALPERN_BUDGET", "lots"));
    assert_eq!(code, 2);
}

#[test]
fn verify_catalog_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("catalog.conf");
    let (code, out, err) = run(bin().arg("verify").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 0, "{out}{err}");
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    let (code, _, _) = run(bin().arg("verify").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 0);
    assert_eq!(first, std::fs::read(dir.path().join("report.json")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let rows = report.as_array().unwrap();
    for check in ["m-bound", "nonexpansive", "asymptotic-regularity", "resolvent-metastability", "orbit-bound"] {
        assert_eq!(rows.iter().filter(|r| r["check"] == check && r["outcome"] == "pass").count() % 8, 0, "{check}");
        assert!(rows.iter().any(|r| r["check"] == check));
    }
    for r in rows {
        let keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["bound", "check", "elapsed_ms", "instance", "outcome", "parameters", "witness"]);
        assert!(r["elapsed_ms"].is_null());
    }
}

#[test]
fn verify_timings_flag_records_elapsed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ident.conf", IDENTITY);
    let (code, _, _) = run(bin().arg("verify").arg(&cfg).arg("--out").arg(dir.path()).arg("--timings"));
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().all(|r| r["elapsed_ms"].is_number()));
}

#[test]
fn verify_undersized_m_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("undersized-m.conf");
    let (code, out, _) = run(bin().arg("verify").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 5);
    assert!(out.contains("m-bound"), "{out}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let failed: Vec<_> = report.as_array().unwrap().iter().filter(|r| r["outcome"] == "fail").collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["check"], "m-bound");
    assert!(failed[0]["parameters"]["error"].as_str().unwrap().contains("M-bound"));
}

#[test]
fn verify_constant_counterfunctions_on_negation_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("negation-const-g.conf");
    let (code, _, _) = run(bin().arg("verify").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 5);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let failed: Vec<_> = report.as_array().unwrap().iter().filter(|r| r["outcome"] == "fail").collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|r| r["check"] == "resolvent-metastability"));
}

#[test]
fn verify_empty_config_writes_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.conf", "[experiment]\nseed = 3\n");
    let (code, _, _) = run(bin().arg("verify").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("report.json")).unwrap().trim(), "[]");
}

#[test]
fn verify_bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", "[experiment]\ncolour = blue\n");
    let (code, _, err) = run(bin().arg("verify").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(code, 2);
    assert!(err.contains("colour"));
    let (code, _, _) = run(bin().arg("verify").arg(dir.path().join("absent.conf")));
    assert_eq!(code, 2);
}

#[test]
fn iterate_output_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "rot.conf", ROTATION);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(bin().arg("iterate").arg(&cfg_path).arg("--out").arg(&a)).0, 0);
    assert_eq!(run(bin().arg("iterate").arg(&cfg_path).arg("--out").arg(&b)).0, 0);
    for f in ["rot.trace.csv", "rot.path.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let cfg = halpern::cli::config::read_config(&cfg_path).unwrap();
    let inst = &cfg.instances[0];
    let original = halpern_orbit(&inst.op, &inst.space, &inst.schedule, &inst.u, &inst.x0, 10_000).unwrap();
    let reread = read_trace_csv(std::fs::File::open(a.join("rot.trace.csv")).unwrap(), "natural-shifted").unwrap();
    assert_eq!(reread.residuals, original.residuals);
    for (eps, rate) in [(rat(1, 2), 10u64), (rat(1, 8), 100), (rat(1, 64), 1000), (rat(1, 1000), 5000)] {
        let rate = nat(rate);
        assert_eq!(
            check_asymptotic_regularity(&reread, &eps, &rate).unwrap(),
            check_asymptotic_regularity(&original, &eps, &rate).unwrap()
        );
        assert_eq!(
            first_regularity_violation(&reread, &eps, &rate, Some(500)).unwrap(),
            first_regularity_violation(&original, &eps, &rate, Some(500)).unwrap()
        );
    }
}

#[test]
fn help_exits_0() {
    assert_eq!(run(bin().arg("--help")).0, 0);
    assert_eq!(run(bin().arg("frobnicate")).0, 2);
}
