use std::path::Path;
use std::process::{Command, Output};

use genpgd::Generator;

fn genpgd(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genpgd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: [&str; 8] = ["--set", "latent_dim=4", "--set", "hidden=[16]", "--set", "output_dim=16", "--set", "m=24"];

#[test]
fn gen_writes_reproducible_weights() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let line = stdout(&genpgd(&["gen", "--seed", "7"], &a));
    assert!(line.starts_with("k=20 n=784 d=2 "), "{line}");
    stdout(&genpgd(&["gen", "--seed", "7"], &b));
    let bytes = std::fs::read(a.join("generator.bin")).unwrap();
    assert_eq!(bytes, std::fs::read(b.join("generator.bin")).unwrap());
    let g = Generator::load_weights(a.join("generator.bin")).unwrap();
    let mut again = Vec::new();
    g.write_to(&mut again).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn solve_from_weight_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen_dir = dir.path().join("gen");
    stdout(&genpgd(&["gen", "--set", "latent_dim=4", "--set", "hidden=[16]", "--set", "output_dim=25"], &gen_dir));
    let weights = gen_dir.join("generator.bin");
    let set = format!("weights_file=\"{}\"", weights.display());
    let out = dir.path().join("solve");
    let line = stdout(&genpgd(&["solve", "--set", &set, "--set", "m=20"], &out));
    assert!(line.contains("solver=pgd"), "{line}");
    assert!(out.join("x_hat.pgm").exists());
    let pgm = std::fs::read(out.join("x_hat.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n5 5\n255\n"));
}

#[test]
fn solve_is_byte_identical_and_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--seed", "4"];
    args.extend(SMALL);
    // m = 4kd for k = 4, d = 2.
    args.extend(["--set", "m=32", "--set", "step_rule=window", "--set", "inner_rate=0.05"]);
    let l1 = stdout(&genpgd(&args, &dir.path().join("1")));
    let l2 = stdout(&genpgd(&args, &dir.path().join("2")));
    assert_eq!(l1, l2);
    let t1 = std::fs::read(dir.path().join("1/trace.csv")).unwrap();
    assert_eq!(t1, std::fs::read(dir.path().join("2/trace.csv")).unwrap());
    let text = String::from_utf8(t1).unwrap();
    assert!(text.starts_with("t,F,per_pixel_error,sign_invariant_error,proj_residual,phase_flips\n"));
    assert_eq!(text.lines().count(), 17);
    let err: f64 = line_value(&l1, "per_pixel_error");
    assert!(err < 1e-4, "{l1}");
}

fn line_value(line: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        .parse()
        .unwrap()
}

#[test]
fn single_cell_sweep_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--seed", "2"];
    args.extend(SMALL);
    let solve = stdout(&genpgd(&args, &dir.path().join("solve")));
    args[0] = "sweep";
    stdout(&genpgd(&args, &dir.path().join("sweep")));
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep/results.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "2");
    assert_eq!(&rows[1][0], "median");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), line_value(&solve, "per_pixel_error"));
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), line_value(&solve, "objective"));
    let timings = std::fs::read_to_string(dir.path().join("sweep/timings.csv")).unwrap();
    assert!(timings.starts_with("seed,m,solver,wall_time_s\n"));
}

#[test]
fn sweep_rows_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--workers", "3", "--set", "m_list=[12, 24]", "--set", "seeds=[5, 1]", "--set", "solvers=[\"pgd\", \"csgm\"]", "--set", "latent_steps=50"];
    args.extend(SMALL);
    stdout(&genpgd(&args, dir.path()));
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let keys: Vec<String> = text.lines().skip(1).map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(
        keys,
        [
            "5,12,pgd", "5,12,csgm", "1,12,pgd", "1,12,csgm", "5,24,pgd", "5,24,csgm", "1,24,pgd", "1,24,csgm",
            "median,12,pgd", "median,12,csgm", "median,24,pgd", "median,24,csgm"
        ]
    );
}

#[test]
fn diagnose_isometry() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "diagnose", "--set", "generator=\"identity\"", "--set", "latent_dim=9", "--set", "output_dim=9", "--set", "m=9",
        "--set", "matrix=\"orthonormal\"", "--set", "srec_pairs=50",
    ];
    let report = stdout(&genpgd(&args, dir.path()));
    let value = |k: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{k} = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("gamma_hat") - 1.0).abs() < 1e-10);
    assert!((value("rho_hat") - 1.0).abs() < 1e-10);
    assert!(dir.path().join("diagnostics.csv").exists());
}

#[test]
fn config_errors_exit_nonzero_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "problem = \"linear\"\nm = 10\nstep_size = -0.5\n").unwrap();
    let o = genpgd(&["solve", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:3"), "{err}");
    assert!(!dir.path().join("out").exists());

    std::fs::write(&cfg, "m = 10\nmeasurements = 3\n").unwrap();
    let o = genpgd(&["solve", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve"];
    args.extend(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_genpgd"))
        .args(&args)
        .env("GENPGD_OUT", dir.path().join("env"))
        .output()
        .unwrap();
    stdout(&o);
    assert!(dir.path().join("env/trace.csv").exists());
}

#[test]
fn every_problem_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (problem, solver) in [
        ("sinusoid", "eps_pgd"),
        ("sigmoid", "eps_pgd"),
        ("phase", "phase_pgd"),
        ("phase", "dpr"),
        ("mismatch", "myopic"),
        ("linear", "csgm"),
    ] {
        let p = format!("problem=\"{problem}\"");
        let s = format!("solver=\"{solver}\"");
        let mut args = vec!["solve", "--set", &p, "--set", &s, "--set", "latent_steps=100", "--set", "init_samples=5"];
        args.extend(SMALL);
        let line = stdout(&genpgd(&args, &dir.path().join(format!("{problem}-{solver}"))));
        assert!(line.contains(&format!("solver={solver}")), "{line}");
    }
    let o = genpgd(&["solve", "--set", "problem=\"phase\"", "--set", "solver=\"pgd\""], &dir.path().join("x"));
    assert!(!o.status.success());
}
