use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use randcoef::io::{read_density_csv, DensityTable};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_randcoef"));
    c.env_remove("RC_DENSITY_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small linear random-coefficient sample with bounded coefficients.
fn write_sample(path: &Path, n: usize) {
    let mut s = String::from("y,x1\n");
    for i in 0..n {
        let u = (i as f64 * 0.618_033_988_75).fract();
        let v = (i as f64 * 0.414_213_562_37).fract();
        let w = (i as f64 * 0.732_050_807_57).fract();
        let x = 3.0 * u - 1.5;
        let y = (2.0 * v - 1.0) + (1.0 + (2.0 * w - 1.0)) * x;
        s.push_str(&format!("{y},{x}\n"));
    }
    fs::write(path, s).unwrap();
}

fn read_table(path: &Path) -> DensityTable {
    read_density_csv(fs::File::open(path).unwrap()).unwrap()
}

#[test]
fn pswf_dump_prints_eigenvalues() {
    let o = run(&["pswf", "dump", "--c", "1", "--orders", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,rho,abs_mu,mu_re,mu_im,psi_0,psi_1");
    assert_eq!(lines.len(), 4);
    let rho0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((rho0 - 0.572_581_5).abs() < 1e-6, "ρ₀(1) = {rho0}");
}

#[test]
fn svd_dump_both_weights() {
    for w in ["indicator", "cosh"] {
        let o = run(&[
            "svd", "dump", "--weight", w, "--R", "1", "--c", "2", "--orders", "3",
        ]);
        assert_eq!(code(&o), 0, "{w}: {}", stderr(&o));
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.starts_with("m,sigma,rho,g_1,norm_residual"));
        assert_eq!(text.lines().count(), 4);
    }
    let bad = run(&["svd", "dump", "--weight", "gauss", "--R", "1", "--c", "2"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn estimate_writes_long_format_density() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let out = dir.path().join("f.csv");
    let sel = dir.path().join("sel.csv");
    write_sample(&data, 600);
    let o = run(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--weight",
        "indicator",
        "--R",
        "2",
        "--x0",
        "1.5",
        "--adaptive",
        "--dump-selection",
        sel.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = read_table(&out);
    assert_eq!(t.p, 1);
    assert!(!t.rows.is_empty());
    assert!(t.rows.iter().all(|r| r[2] >= 0.0 && r[2].is_finite()));
    let raw = fs::read_to_string(&out).unwrap();
    assert!(raw.starts_with("a,b1,density\n"));
    let cell = raw.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(
        cell.split('e')
            .next()
            .unwrap()
            .replace(['-', '.'], "")
            .len(),
        17
    );
    let s = fs::read_to_string(&sel).unwrap();
    assert!(s.starts_with("stage,t,n,bias,penalty,selected"));
    assert_eq!(
        s.lines()
            .filter(|l| l.starts_with("T,") && l.ends_with(",1"))
            .count(),
        1
    );
}

#[test]
fn estimate_fixed_tuning_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let out = dir.path().join("f.csv");
    let cfg = dir.path().join("run.cfg");
    write_sample(&data, 400);
    // file says n_cut = 0; the flag overrides it
    fs::write(
        &cfg,
        "# fixed tuning\nweight = indicator\nr = 2\nx0 = 1.5\nn_cut = 0\n",
    )
    .unwrap();
    let o = run(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--n-cut",
        "1",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!read_table(&out).rows.is_empty());
    let printed = run(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--n-cut",
        "1",
        "--print-config",
    ]);
    assert_eq!(code(&printed), 0);
    let text = String::from_utf8(printed.stdout).unwrap();
    assert!(
        text.lines().any(|l| l.replace(' ', "") == "n_cut=1"),
        "{text}"
    );
    assert!(
        text.lines()
            .any(|l| l.replace(' ', "") == "weight=indicator"),
        "{text}"
    );
}

#[test]
fn config_errors_exit_2_with_line_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "weight = indicator\nbogus = 3\n").unwrap();
    let o = run(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--print-config",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = run(&["estimate", "--set", "eps=-1", "--print-config"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("out of range"), "{}", stderr(&o));

    let dir2 = tempfile::tempdir().unwrap();
    let data = dir2.path().join("d.csv");
    write_sample(&data, 50);
    let out = dir2.path().join("f.csv");
    let o = run(&[
        "estimate",
        "--weight",
        "indicator",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "missing r: {}", stderr(&o));
    assert_eq!(
        code(&run(&["simulate", "--case", "3", "--out", "x.csv"])),
        2
    );
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let out = dir.path().join("f.csv");
    fs::write(&data, "y,z\n1,2\n").unwrap();
    let args = [
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--weight",
        "indicator",
        "--R",
        "2",
        "--x0",
        "1",
    ];
    let o = run(&args);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    fs::write(&data, "y,x1\n1,abc\n").unwrap();
    assert_eq!(code(&run(&args)), 3);
    fs::remove_file(&data).unwrap();
    assert_eq!(code(&run(&args)), 3);
}

#[test]
fn simulate_report_and_density_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mise.csv");
    let grids = dir.path().join("grids");
    let o = run(&[
        "simulate",
        "--case",
        "1",
        "--n",
        "300",
        "--reps",
        "3",
        "--mode",
        "adaptive",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
        "--emit-density",
        grids.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rep,mise,n_hat_min,n_hat_max,t_hat");
    assert_eq!(lines.len(), 1 + 3 + 2);
    assert!(lines[4].starts_with("mean,") && lines[5].starts_with("se,"));
    for f in ["mean.csv", "q05.csv", "q50.csv", "q95.csv", "truth.csv"] {
        assert!(!read_table(&grids.join(f)).rows.is_empty(), "{f}");
    }

    // same seed, different thread budget through the environment
    let again = dir.path().join("again.csv");
    let o = bin()
        .env("RC_DENSITY_THREADS", "2")
        .args([
            "simulate", "--case", "1", "--n", "300", "--reps", "3", "--seed", "5", "--out",
        ])
        .arg(&again)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&again).unwrap(), text);
}

#[test]
fn thread_budget_env_is_validated() {
    let o = bin()
        .env("RC_DENSITY_THREADS", "zero")
        .args(["pswf", "dump", "--c", "1", "--orders", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("RC_DENSITY_THREADS"));
}

#[test]
fn calibrate_reports_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.csv");
    let o = run(&[
        "calibrate",
        "--n",
        "300",
        "--reps",
        "2",
        "--kappas",
        "0.01,1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(stderr(&o).contains("best kappa_sigma"));
}
