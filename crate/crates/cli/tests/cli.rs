use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flate2::write::GzEncoder;
use flate2::Compression;
use tempfile::TempDir;

use stabopt::trace::read_trace_csv;

fn stabopt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stabopt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn assert_header_comment(path: &Path) {
    let line = first_line(path);
    let parts: Vec<&str> = line.split(' ').collect();
    assert_eq!(parts.len(), 4, "{line}");
    assert_eq!(&parts[..3], ["#", "stabopt", env!("CARGO_PKG_VERSION")]);
    assert_eq!(parts[3].len(), 16);
}

#[test]
fn toy_single_sgd_step() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "toy.toml",
        "[problem]\nkind = \"toy1d\"\n[optimizer]\nepochs = 1\n",
    );
    let out = stabopt(
        dir.path(),
        &[
            "run", "--config", "toy.toml", "--method", "sgd", "--alpha", "0.5", "--out", "t.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = summary.split_whitespace().collect();
    assert_eq!(fields[0], "sgd");
    assert_eq!(fields[2], "0");
    assert_eq!(fields[4], "false");

    let trace = read_trace_csv(
        fs::File::open(dir.path().join("t.csv"))
            .map(std::io::BufReader::new)
            .unwrap(),
    )
    .unwrap();
    assert_eq!(trace.records.len(), 1);
    let g = -1.0 / (1.0 + 3f64.exp().recip());
    assert!((g + 0.952_574_1).abs() < 1e-7);
    assert!((trace.records[0].delta - 0.25 * g * g).abs() < 1e-15);
    assert_eq!(trace.meta("method"), Some("sgd"));
    assert_header_comment(&dir.path().join("t.csv"));
}

#[test]
fn sps_reaches_low_loss_at_large_alpha() {
    let dir = TempDir::new().unwrap();
    let out = stabopt(
        dir.path(),
        &["run", "--method", "sps", "--alpha", "100", "--out", "t.csv"],
    );
    assert!(out.status.success());
    let summary = String::from_utf8(out.stdout).unwrap();
    let loss: f64 = summary.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(loss <= 1e-2, "{summary}");
}

#[test]
fn spp_on_logreg_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "d.libsvm",
        "1 1:0.5 2:1\n2 1:-1\n1 2:0.25\n2 1:0.1 2:0.2\n",
    );
    write(
        dir.path(),
        "c.toml",
        "[problem]\nkind = \"logreg\"\nfile = \"d.libsvm\"\nbatch_size = 1\nholdout = 0.0\n",
    );
    let out = stabopt(
        dir.path(),
        &[
            "run", "--config", "c.toml", "--method", "spp", "--alpha", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NoProxAvailable"));
    let out = stabopt(
        dir.path(),
        &[
            "run", "--config", "c.toml", "--method", "sgd", "--alpha", "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "empty.toml", "[optimizer]\nalphas = []\n");
    assert_eq!(
        stabopt(dir.path(), &["sweep", "--config", "empty.toml"])
            .status
            .code(),
        Some(1)
    );
    write(dir.path(), "bad.toml", "[optimizer]\nunknown_key = 3\n");
    assert_eq!(
        stabopt(dir.path(), &["sweep", "--config", "bad.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        stabopt(dir.path(), &["sweep", "--bogus-flag"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        stabopt(dir.path(), &["run", "--config", "missing.toml"])
            .status
            .code(),
        Some(2)
    );
    let out = stabopt(
        dir.path(),
        &[
            "run",
            "--method",
            "sgd",
            "--alpha",
            "0.1",
            "--out",
            "no/such/dir/t.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    // more than one alpha for a single run
    assert_eq!(
        stabopt(dir.path(), &["run", "--method", "sgd"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(stabopt(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_writes_summary_and_traces() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "s.toml",
        "[optimizer]\nmethods = [\"sgd\", \"sps\"]\nalphas = [0.01, 100.0]\nseeds = [0, 1]\nepochs = 3\ntrace_dir = \"traces\"\n[bound]\nD = 1.0\n",
    );
    let out = stabopt(
        dir.path(),
        &[
            "sweep",
            "--config",
            "s.toml",
            "--workers",
            "2",
            "--out",
            "s.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path = dir.path().join("s.csv");
    assert_header_comment(&path);
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "method,alpha,mean_final_loss,frac_diverged,omega_avg,omega_last"
    );
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 4);
    let sgd_big = rows
        .iter()
        .find(|r| r[0] == "sgd" && r[1].starts_with("1.0000000000000000e2"))
        .unwrap();
    assert_eq!(sgd_big[2], "inf");
    assert_eq!(sgd_big[3].parse::<f64>().unwrap(), 1.0);
    assert_eq!(fs::read_dir(dir.path().join("traces")).unwrap().count(), 8);

    // bound over the written traces reproduces the sweep's omega values
    let out = stabopt(
        dir.path(),
        &["bound", "--traces", "traces", "--D", "1", "--out", "b.csv"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bpath = dir.path().join("b.csv");
    assert_header_comment(&bpath);
    assert_eq!(
        fs::read_to_string(&bpath).unwrap().lines().nth(1).unwrap(),
        "method,alpha,D,T,omega_avg,omega_last"
    );
    for b in csv_rows(&bpath) {
        let s = rows.iter().find(|r| r[0] == b[0] && r[1] == b[1]).unwrap();
        assert_eq!((&b[4], &b[5]), (&s[4], &s[5]), "{b:?}");
    }
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "s.toml",
        "[optimizer]\nalphas = [0.001, 0.1, 10.0]\nepochs = 2\n",
    );
    for (name, workers) in [("a.csv", "1"), ("b.csv", "3")] {
        assert!(stabopt(
            dir.path(),
            &[
                "sweep",
                "--config",
                "s.toml",
                "--workers",
                workers,
                "--out",
                name
            ]
        )
        .status
        .success());
    }
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

fn synthetic_trace(dir: &Path, name: &str, alpha: f64, delta: f64, steps: usize) {
    let mut text = format!(
        "# stabopt x y\n# method=sgd alpha={alpha}\n{}\n",
        stabopt::trace::TRACE_HEADER
    );
    for t in 1..=steps {
        text.push_str(&format!("{t},0,1.0,1.0,{alpha},{alpha},{delta},0.0\n"));
    }
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn bound_on_constant_traces() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("tr")).unwrap();
    let (alpha, delta, t) = (0.2, 0.3, 50);
    synthetic_trace(&dir.path().join("tr"), "a.csv", alpha, delta, t);
    synthetic_trace(&dir.path().join("tr"), "b.csv", alpha, delta, t + 7);
    write(
        dir.path(),
        "b.toml",
        "[bound]\nD_grid = [0.0, 1.0, 5.0]\ntraces = [\"tr\"]\n",
    );
    let out = stabopt(
        dir.path(),
        &["bound", "--config", "b.toml", "--out", "b.csv"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("b.csv"));
    assert_eq!(rows.len(), 3);
    let h: f64 = (1..t).map(|s| 1.0 / s as f64).sum();
    let mut last = f64::NEG_INFINITY;
    for r in &rows {
        let d: f64 = r[2].parse().unwrap();
        assert_eq!(r[3], t.to_string());
        let want = d * d / (2.0 * alpha * t as f64) + delta * (1.0 + h);
        let got: f64 = r[5].parse().unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        assert!(got > last);
        last = got;
    }
    // D = 0 leaves only the delta terms
    let zero: f64 = rows[0][5].parse().unwrap();
    assert!((zero - delta * (1.0 + h)).abs() <= 1e-12);
}

#[test]
fn bound_needs_d() {
    let dir = TempDir::new().unwrap();
    synthetic_trace(dir.path(), "a.csv", 0.1, 0.1, 3);
    assert_eq!(
        stabopt(dir.path(), &["bound", "--traces", "a.csv"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn figdata_kinds() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "f.toml",
        "[figdata]\nalpha_min = 1e-2\nalpha_max = 1e6\n",
    );
    let out = stabopt(
        dir.path(),
        &[
            "figdata", "--config", "f.toml", "--kind", "fig1", "--out", "f1.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("f1.csv"));
    assert_header_comment(&dir.path().join("f1.csv"));
    let series = |m: &str| -> Vec<(f64, f64, f64)> {
        rows.iter()
            .filter(|r| r[0] == m)
            .map(|r| {
                (
                    r[1].parse().unwrap(),
                    r[2].parse().unwrap(),
                    r[3].parse().unwrap(),
                )
            })
            .collect()
    };
    let sgd = series("sgd");
    let (a0, l0, d0) = sgd[sgd.len() - 2];
    let (a1, l1, d1) = sgd[sgd.len() - 1];
    assert!(l1 > l0 && l1 > 1e4, "sgd next loss should blow up");
    assert!(
        (d1 / d0 - a1 / a0).abs() < 1e-9,
        "sgd delta is linear in alpha"
    );
    let spp = series("spp");
    let plateau = stabopt::problems::toy::toy_loss(-3.0) - (1.0 + (-2f64).exp()).ln();
    // at large alpha the prox sits on the kink y = 2, five units from x = -3
    let (a_top, _, d_top) = *spp.last().unwrap();
    assert!((d_top - (plateau - 25.0 / (2.0 * a_top))).abs() < 1e-9);
    assert!((plateau - 2.921_659).abs() < 1e-6);

    let out = stabopt(
        dir.path(),
        &[
            "figdata",
            "--config",
            "f.toml",
            "--kind",
            "nu_illustration",
            "--out",
            "nu.csv",
        ],
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("nu.csv"));
    // nu = 0: the variance term does not depend on alpha
    let h: f64 = (1..1000).map(|s| 1.0 / s as f64).sum();
    for r in rows.iter().filter(|r| r[0].parse::<f64>().unwrap() == 0.0) {
        let a: f64 = r[1].parse().unwrap();
        let v: f64 = r[2].parse().unwrap();
        assert!((v - 1.0 / (2.0 * a * 1000.0) - (1.0 + h)).abs() < 1e-12);
    }

    let out = stabopt(
        dir.path(),
        &[
            "figdata",
            "--config",
            "f.toml",
            "--kind",
            "delta_vs_alpha",
            "--out",
            "d.csv",
        ],
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("d.csv"));
    assert!(rows.iter().all(|r| r[0] != "spp"));
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() >= 0.0));
    assert_eq!(
        stabopt(dir.path(), &["figdata", "--kind", "fig9"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn datagen_round_trip() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "g.toml",
        "[problem]\nn = 20\nd = 4\nnoise = true\ndata_seed = 5\nbatch_size = 4\n",
    );
    assert!(stabopt(
        dir.path(),
        &["datagen", "--config", "g.toml", "--out", "g.txt"]
    )
    .status
    .success());
    let text = fs::read_to_string(dir.path().join("g.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "20 4");
    assert_eq!(lines.len(), 22);
    assert_eq!(lines[21].split_whitespace().count(), 20);

    // generated and file-backed problems agree
    write(
        dir.path(),
        "f.toml",
        "[problem]\nfile = \"g.txt\"\nbatch_size = 4\n[optimizer]\nseeds = [3]\n",
    );
    let from_file = stabopt(
        dir.path(),
        &[
            "run", "--config", "f.toml", "--method", "sps", "--alpha", "1", "--out", "a.csv",
        ],
    );
    let generated = stabopt(
        dir.path(),
        &[
            "run", "--config", "g.toml", "--method", "sps", "--alpha", "1", "--seed", "3", "--out",
            "b.csv",
        ],
    );
    assert!(from_file.status.success() && generated.status.success());
    assert_eq!(from_file.stdout, generated.stdout);
}

#[test]
fn gzip_libsvm_input() {
    let dir = TempDir::new().unwrap();
    let plain = "1 1:0.5 3:1\n2 2:-1\n3 1:0.25 2:0.5\n1 3:0.1\n2 1:1 2:1 3:1\n3 2:0.3\n";
    write(dir.path(), "d.libsvm", plain);
    let mut enc = GzEncoder::new(
        fs::File::create(dir.path().join("d.libsvm.gz")).unwrap(),
        Compression::default(),
    );
    enc.write_all(plain.as_bytes()).unwrap();
    enc.finish().unwrap();
    let cfg = |file: &str| {
        format!("[problem]\nkind = \"logreg\"\nfile = \"{file}\"\nbatch_size = 2\nholdout = 0.0\n")
    };
    write(dir.path(), "p.toml", &cfg("d.libsvm"));
    write(dir.path(), "z.toml", &cfg("d.libsvm.gz"));
    let a = stabopt(
        dir.path(),
        &[
            "run", "--config", "p.toml", "--method", "ngn", "--alpha", "1", "--out", "a.csv",
        ],
    );
    let b = stabopt(
        dir.path(),
        &[
            "run", "--config", "z.toml", "--method", "ngn", "--alpha", "1", "--out", "b.csv",
        ],
    );
    assert!(
        a.status.success() && b.status.success(),
        "{}",
        String::from_utf8_lossy(&b.stderr)
    );
    assert_eq!(a.stdout, b.stdout);

    write(dir.path(), "bad.libsvm", "1 2:1 1:1\n");
    write(dir.path(), "bad.toml", &cfg("bad.libsvm"));
    assert_eq!(
        stabopt(
            dir.path(),
            &["run", "--config", "bad.toml", "--method", "sgd", "--alpha", "1"]
        )
        .status
        .code(),
        Some(2)
    );
}
