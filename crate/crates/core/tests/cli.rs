use std::fs;
use std::path::Path;
use std::process::Command;

use kac_relax::cli::run;
use kac_relax::config::parse_config;
use kac_relax::wild::CfSolution;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kac-relax"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn exit_code(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    status.status.code().unwrap()
}

/// Numeric column `name` of a report, skipping the version line.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# kac-relax v1"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|c| *c == name).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

#[test]
fn solve_writes_round_trippable_cf() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "solve.toml",
        "subcommand = \"solve\"\ntimes = [0.5, 1]\n[datum]\nfamily = \"gaussian_mixture\"\nweights = [0.5, 0.5]\nsigmas = [0.6, 1.2]\n[solver]\nn_points = 1024\n",
    );
    let out = dir.path().join("out");
    assert_eq!(exit_code("solve", &cfg, &out, &["--svg"]), 0);
    let text = fs::read_to_string(out.join("cf_t0.5.csv")).unwrap();
    let sol = CfSolution::from_csv(&text).unwrap();
    assert_eq!(sol.t, 0.5);
    assert_eq!(sol.cf.n_points(), 1024);
    assert_eq!(sol.to_csv(), text);
    let m2 = column(&out.join("solve_summary.csv"), "m2");
    let expected = 0.5 * 0.36 + 0.5 * 1.44;
    assert!(m2.iter().all(|m| (m - expected).abs() < 1e-3), "{m2:?}");
    assert!((m2[0] - m2[1]).abs() < 1e-4, "{m2:?}");
    assert!(out.join("density_t1.csv").exists());
    assert!(fs::read_to_string(out.join("density.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn gaussian_is_already_relaxed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "relax.toml",
        "subcommand = \"relax-rate\"\ntimes = [1, 2, 4]\n[datum]\nfamily = \"gaussian\"\nsigma = 1.0\n",
    );
    let out = dir.path().join("out");
    assert_eq!(exit_code("relax-rate", &cfg, &out, &[]), 0);
    let d = column(&out.join("relax_rate.csv"), "l1_distance");
    assert_eq!(d.len(), 3);
    assert!(d.iter().all(|&x| x <= 1e-6), "{d:?}");
}

#[test]
fn custom_grid_resolves_relative_to_config() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("# standard normal\nv,f\n");
    for i in 0..=400 {
        let v = -8.0 + 0.04 * i as f64;
        csv.push_str(&format!("{v},{}\n", (-v * v / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()));
    }
    fs::write(dir.path().join("normal.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.toml",
        "subcommand = \"solve\"\ntimes = [1]\n[datum]\nfamily = \"custom_grid\"\ngrid_path = \"normal.csv\"\n[solver]\nn_points = 512\n",
    );
    let out = dir.path().join("out");
    assert_eq!(exit_code("solve", &cfg, &out, &[]), 0);
    let m2 = column(&out.join("solve_summary.csv"), "m2");
    assert!((m2[0] - 1.0).abs() < 5e-3, "{m2:?}");
}

#[test]
fn moment_check_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "mc.toml",
        "subcommand = \"moment-check\"\ntimes = [1, 2]\ntrials = 2000\nseed = 11\n[analysis]\nmax_n = 4\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(exit_code("moment-check", &cfg, &a, &["--dump-samples"]), 0);
    assert_eq!(exit_code("moment-check", &cfg, &b, &["--dump-samples"]), 0);
    assert_eq!(exit_code("moment-check", &cfg, &c, &["--dump-samples", "--seed", "12"]), 0);
    for name in ["moment_check.csv", "moment_check_conditional.csv", "samples_t1.csv", "samples_t2.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name}");
        assert_ne!(x, fs::read(c.join(name)).unwrap(), "{name}");
    }
    let trials = column(&a.join("samples_t2.csv"), "trial");
    assert_eq!(trials.len(), 2000);
}

#[test]
fn library_runner_matches_binary_outputs() {
    let dir = TempDir::new().unwrap();
    let text = "subcommand = \"counterexample\"\ntimes = [2, 3, 4]\n[datum]\nfamily = \"power_law\"\nbeta = 3.5\n[solver]\nn_points = 1024\n";
    let cfg_path = write_config(dir.path(), "ce.toml", text);
    let bin_out = dir.path().join("bin");
    assert_eq!(exit_code("counterexample", &cfg_path, &bin_out, &[]), 0);
    let mut config = parse_config(text).unwrap();
    config.out_dir = dir.path().join("lib");
    let outcome = run(&config, dir.path()).unwrap();
    assert_eq!(outcome.files.len(), 2);
    for f in &outcome.files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(bin_out.join(name)).unwrap());
    }
    let rate = column(&bin_out.join("counterexample_fit.csv"), "fitted_rate");
    assert!(rate[0] > 0.0 && rate[0] < 0.25, "{rate:?}");
}

#[test]
fn bounds_audit_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "audit.toml",
        "subcommand = \"bounds-audit\"\n[datum]\nfamily = \"uniform\"\nhalfwidth = 1.7320508075688772\n",
    );
    let out = dir.path().join("out");
    assert_eq!(exit_code("bounds-audit", &cfg, &out, &[]), 0);
    let text = fs::read_to_string(out.join("bounds_audit.csv")).unwrap();
    assert!(!text.contains(",false"));
    assert!(out.join("constant.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let unknown = write_config(dir.path(), "unknown.toml", "subcommand = \"solve\"\ncolour = 3\n");
    assert_eq!(exit_code("solve", &unknown, &out, &[]), 2);
    let order = write_config(
        dir.path(),
        "order.toml",
        "subcommand = \"solve\"\ntimes = [2, 1]\n[datum]\nfamily = \"gaussian\"\nsigma = 1\n",
    );
    assert_eq!(exit_code("solve", &order, &out, &[]), 2);
    let gauss = write_config(
        dir.path(),
        "gauss.toml",
        "subcommand = \"solve\"\ntimes = [1]\n[datum]\nfamily = \"gaussian\"\nsigma = 1\n",
    );
    assert_eq!(exit_code("relax-rate", &gauss, &out, &[]), 2);
    assert_eq!(exit_code("solve", &dir.path().join("missing.toml"), &out, &[]), 1);
    let box_relax = write_config(
        dir.path(),
        "box.toml",
        "subcommand = \"relax-rate\"\ntimes = [2, 3]\n[datum]\nfamily = \"uniform\"\nhalfwidth = 1.7320508075688772\n[solver]\nn_points = 1024\n",
    );
    assert_eq!(exit_code("relax-rate", &box_relax, &out, &[]), 3);
    let capped = write_config(
        dir.path(),
        "capped.toml",
        "subcommand = \"solve\"\ntimes = [1]\n[datum]\nfamily = \"gaussian\"\nsigma = 1\n[solver]\nn_points = 256\nmax_terms = 3\n",
    );
    assert_eq!(exit_code("solve", &capped, &out, &[]), 4);
}
