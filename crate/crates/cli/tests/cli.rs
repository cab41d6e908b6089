//! End-to-end tests of the `bctl` binary: exit codes, file formats,
//! determinism, plan replay.

use std::path::Path;
use std::process::Output;

use tempfile::TempDir;

fn bctl(args: &[&str], out_dir: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_bctl"))
        .args(args)
        .env("BCTL_OUT", out_dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn body_after_header(text: &str) -> String {
    text.lines().skip(1).collect::<Vec<_>>().join("\n")
}

#[test]
fn validate_passes_for_legendre_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ok.toml",
        r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "1 + cos(pi*x)"

            [problem.f]
            kind = "model"
            theta = 2.0

            [task]
            kind = "validate"
        "#,
    );
    let out = bctl(&["validate", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(tmp.path().join("assumptions.txt")).unwrap();
    assert!(report.contains("xi_in_Lq pass"));
    assert!(report.contains("degeneracy = strong"));
}

#[test]
fn validate_flags_nondegenerate_coefficient_with_exit_2() {
    let tmp = TempDir::new().unwrap();
    // a = (1-x²)²: xi_a fails the L^{q} requirement for theta = 2.
    let cfg = write_config(
        tmp.path(),
        "steep.toml",
        r#"
            [problem]
            n_cells = 64
            a = "power:2"
            u0 = "1"

            [problem.f]
            kind = "model"
            theta = 2.0

            [task]
            kind = "validate"
        "#,
    );
    let out = bctl(&["validate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2), "soft failure expected");
    let report = std::fs::read_to_string(tmp.path().join("assumptions.txt")).unwrap();
    assert!(report.contains("xi_in_Lq FAIL"));
}

#[test]
fn malformed_config_exits_1_with_field_diagnostic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "broken.toml",
        r#"
            [problem]
            a = "legendre"
            u0 = "1"

            [task]
            kind = "evolve"
            horizon = 1.0
        "#,
    );
    let out = bctl(&["evolve", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n_cells"), "diagnostic was: {err}");
}

const EVOLVE_CONFIG: &str = r#"
    [problem]
    n_cells = 64
    a = "legendre"
    u0 = "2.5"

    [task]
    kind = "evolve"
    horizon = 1.0

    [sweep]
    seed = 7
"#;

#[test]
fn evolve_constant_state_stays_constant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", EVOLVE_CONFIG);
    let out = bctl(&["evolve", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# bctl"));
    assert!(lines.next().unwrap().starts_with("t,x0"));
    for row in lines {
        for v in row.split(',').skip(1) {
            let v: f64 = v.parse().unwrap();
            assert!((v - 2.5).abs() <= 1e-11, "drifted to {v}");
        }
    }
    assert!(tmp.path().join("norms.txt").exists());
}

#[test]
fn reruns_are_byte_identical_after_header() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "run.toml",
        r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "1 + cos(pi*x)"

            [problem.f]
            kind = "model"
            theta = 2.0

            [control]
            breakpoints = [0.0, 0.3, 1.0]
            profiles = ["-0.5", "0.25*x"]

            [task]
            kind = "evolve"
            horizon = 1.0
        "#,
    );
    let out1 = bctl(&["evolve", &cfg], tmp.path());
    assert!(out1.status.success());
    let first = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let out2 = bctl(&["evolve", &cfg], tmp.path());
    assert!(out2.status.success());
    let second = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(body_after_header(&first), body_after_header(&second));
}

#[test]
fn eigen_csv_leads_with_legendre_eigenvalues() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "eigen.toml",
        r#"
            [problem]
            n_cells = 512
            a = "legendre"
            u0 = "1"

            [task]
            kind = "eigen"
            modes = 6
        "#,
    );
    let out = bctl(&["eigen", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("eigen.csv")).unwrap();
    let expected = [0.0, 2.0, 6.0, 12.0, 20.0, 30.0];
    for (row, expect) in csv.lines().skip(2).zip(expected) {
        let lambda: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(
            (lambda - expect).abs() <= 1e-3 * expect.max(1e-2),
            "lambda {lambda} vs {expect}"
        );
    }
    assert_eq!(csv.lines().count(), 2 + 6);
}

#[test]
fn synthesize_writes_replayable_plan() {
    let tmp = TempDir::new().unwrap();
    // Identity-like task on a small grid with a generous tolerance.
    let cfg = write_config(
        tmp.path(),
        "synth.toml",
        r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "2 + 0.5*cos(pi*x)"

            [problem.f]
            kind = "model"
            theta = 2.0

            [task]
            kind = "synthesize"
            target = "2 + 0.5*cos(pi*x)"
            eps_rel = 0.3
        "#,
    );
    let out = bctl(&["synthesize", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plan_path = tmp.path().join("plan.txt");
    let (scalars, control) = bctl_cli::plan_io::read_plan(&plan_path).unwrap();
    assert_eq!(control.n_segments(), 3);
    assert!(scalars.achieved_error <= scalars.eps);

    // Replay the emitted control through the evolve task.
    let replay = write_config(
        tmp.path(),
        "replay.toml",
        &format!(
            r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "2 + 0.5*cos(pi*x)"

            [problem.f]
            kind = "model"
            theta = 2.0

            [control]
            plan = "{}"

            [task]
            kind = "evolve"
            horizon = {}
        "#,
            plan_path.display(),
            scalars.horizon
        ),
    );
    let out = bctl(&["evolve", &replay], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let vals: Vec<f64> = last.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    // Final state of the replay approximates the target within eps (plus
    // slack for the replay running at the base step policy).
    let grid = bctl_core::Grid::new(64).unwrap();
    let target = bctl_core::Field::from_fn(grid, |x| 2.0 + 0.5 * (std::f64::consts::PI * x).cos());
    let final_state = bctl_core::Field::new(grid, vals).unwrap();
    let err = final_state.sub(&target).norm_l2();
    assert!(err <= 1.5 * scalars.eps, "replay error {err} vs eps {}", scalars.eps);
}

#[test]
fn spectral_and_picard_modes_run_through_the_cli() {
    let tmp = TempDir::new().unwrap();
    let spectral = write_config(
        tmp.path(),
        "spectral.toml",
        r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "1 + cos(pi*x)"

            [solver]
            mode = "spectral"

            [task]
            kind = "evolve"
            horizon = 0.5
        "#,
    );
    let out = bctl(&["evolve", &spectral], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Spectral mode refuses a nonzero reaction.
    let bad = write_config(
        tmp.path(),
        "bad.toml",
        r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "1"

            [problem.f]
            kind = "model"
            theta = 2.0

            [solver]
            mode = "spectral"

            [task]
            kind = "evolve"
            horizon = 0.5
        "#,
    );
    let out = bctl(&["evolve", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(1));

    let picard = write_config(
        tmp.path(),
        "picard.toml",
        r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "1 + cos(pi*x)"

            [problem.f]
            kind = "model"
            theta = 2.0

            [solver]
            mode = "picard"
            dt = 1e-3

            [task]
            kind = "evolve"
            horizon = 0.05
        "#,
    );
    let out = bctl(&["evolve", &picard], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8_lossy(&out.stdout);
    assert!(log.contains("contraction ratio"), "stdout: {log}");
}

#[test]
fn unreachable_tolerance_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "hard.toml",
        r#"
            [problem]
            n_cells = 64
            a = "legendre"
            u0 = "1 + cos(pi*x)"

            [problem.f]
            kind = "model"
            theta = 2.0

            [task]
            kind = "synthesize"
            target = "2 + x^2"
            eps = 1e-9
            j_max = 2
        "#,
    );
    let out = bctl(&["synthesize", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not achieved"), "stderr: {err}");
}

#[test]
fn unknown_suite_is_hard_error() {
    let tmp = TempDir::new().unwrap();
    let out = bctl(&["verify", "nonsense"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_sample_configs_stay_valid() {
    let tmp = TempDir::new().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for (cmd, file) in [
        ("validate", "configs/validate.toml"),
        ("evolve", "configs/evolve.toml"),
        ("eigen", "configs/eigen.toml"),
        ("synthesize", "configs/synthesize.toml"),
    ] {
        let path = root.join(file);
        let out = bctl(&[cmd, path.to_str().unwrap()], tmp.path());
        assert!(
            out.status.success(),
            "{cmd} {file}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn parallel_sweeps_match_serial_results() {
    let tmp = TempDir::new().unwrap();
    let strip = |s: &str| {
        s.lines()
            .skip(1)
            .filter(|l| !l.starts_with("runtime_seconds") && !l.starts_with("overall"))
            .map(|l| l.replace("jobs=2", "jobs=1"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let out = bctl(&["verify", "stability", "--jobs", "1"], tmp.path());
    assert!(out.status.success());
    let serial = std::fs::read_to_string(tmp.path().join("stability.txt")).unwrap();
    let out = bctl(&["verify", "stability", "--jobs", "2"], tmp.path());
    assert!(out.status.success());
    let parallel = std::fs::read_to_string(tmp.path().join("stability.txt")).unwrap();
    assert_eq!(strip(&serial), strip(&parallel));
}

#[test]
fn verify_report_written_and_deterministic() {
    let tmp = TempDir::new().unwrap();
    let out = bctl(&["verify", "embeddings", "--seed", "42"], tmp.path());
    assert!(out.status.success());
    let first = std::fs::read_to_string(tmp.path().join("embeddings.txt")).unwrap();
    let out = bctl(&["verify", "embeddings", "--seed", "42"], tmp.path());
    assert!(out.status.success());
    let second = std::fs::read_to_string(tmp.path().join("embeddings.txt")).unwrap();
    // Bodies other than the runtime line are identical.
    let strip = |s: &str| {
        s.lines()
            .skip(1)
            .filter(|l| !l.starts_with("runtime_seconds") && !l.starts_with("overall"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&first), strip(&second));
}
