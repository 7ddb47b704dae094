use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 11
trials = 200

[sweep]
lambda_ap = [1e-3, 1e-2]
lambda_ue = [1e-2]
lambda_active = { min = 1e-7, max = 1e-5, points = 2 }
activity_draws = 2
los_draws = 300

[geometry]
min_expected_aps = 200
max_expected_aps = 200
"#;

fn cov3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cov3d")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_enumerates_without_running() {
    let o = cov3d(&["acceptance", "--list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let ids: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(ids, ["P1", "A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9"]);
}

#[test]
fn tampered_los_constant_fails_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tampered.toml", "[channel]\nk_los_db = 60.0\n");
    let o = cov3d(&["--config", &cfg, "acceptance", "--only", "P1"]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.starts_with("FAIL P1"), "{text}");
    assert!(text.contains("nlos_loss_above_los_loss"), "{text}");

    let o = cov3d(&["acceptance", "--only", "P1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn invalid_configuration_exits_with_one_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [
        ("[sweep]\nlambda_ue = []\n", "sweep.lambda_ue"),
        ("[channel]\nalpha_nlos = 2.5\n", "channel.alpha_nlos"),
        ("[geometry]\nbogus = 1\n", "bogus"),
    ] {
        let cfg = write_config(dir.path(), "bad.toml", text);
        let o = cov3d(&["--config", &cfg, "fig1"]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{err}");
    }
    let o = cov3d(&["--trials", "5", "fig3"]);
    assert_eq!(o.status.code(), Some(1));
    let o = cov3d(&["acceptance", "--only", "A99"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_files_carry_metadata_and_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    for (cmd, header, rows) in [
        ("fig1", "lambda_ap,lambda_ue,q_analytic,q_sim,ci,draws", 2),
        ("fig2", "lambda_active,n,p_analytic,p_sim,ci,draws", 6),
        ("fig3", "lambda_ap,lambda_ue,theta_db,cov_lower,cov_upper,cov_sim,ci,trials,seed,status", 2),
    ] {
        let out = dir.path().join(format!("{cmd}.csv"));
        let o = cov3d(&["--config", &cfg, "--out", out.to_str().unwrap(), cmd]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# tool=cov3d version="), "{}", lines[0]);
        assert!(lines[0].contains(&format!("command={cmd} seed=11 config_sha256=")));
        assert_eq!(lines[1], header);
        assert_eq!(lines.len(), 2 + rows, "{text}");
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let run = |threads: &str| {
        let o = cov3d(&["--config", &cfg, "--threads", threads, "fig3"]);
        assert!(o.status.success());
        o.stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn seed_flag_overrides_config() {
    let o = cov3d(&["--seed", "99", "bounds", "--lambda-ap", "1e-4", "--lambda-ue", "1e-2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("seed=99"));
}

#[test]
fn bounds_and_laplace_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "unit.toml", "[channel]\nnakagami_shape = 1\n");
    let o = cov3d(&["--config", &cfg, "bounds", "--lambda-ap", "1e-3", "--lambda-ue", "1e-2", "--theta-db", "-5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let fields: Vec<f64> = text.lines().nth(2).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields[2], -5.0);
    assert!((fields[3] - fields[4]).abs() <= 1e-9);

    let o = cov3d(&["laplace", "--s", "0", "--r", "10", "--lambda-active", "1e-4"]);
    assert!(o.status.success());
    let row = stdout(&o).lines().nth(2).unwrap().to_string();
    assert_eq!(row.split(',').nth(3), Some("1"));

    let o = cov3d(&["laplace", "--s", "-1", "--r", "10", "--lambda-active", "1e-4"]);
    assert_eq!(o.status.code(), Some(1));
}
