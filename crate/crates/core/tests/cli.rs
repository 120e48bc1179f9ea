use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wasscc::config::parse_config;
use wasscc::csv::parse_numeric;
use wasscc::joint::ProductionInstance;
use wasscc::model::AmbiguitySpec;

const BIN: &str = env!("CARGO_BIN_EXE_wasscc");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn wasscc(cmd: &str, config: &Path, out: &Path, sets: &[&str]) -> Output {
    let mut c = Command::new(BIN);
    c.arg(cmd).arg("-c").arg(config).arg("-o").arg(out);
    for s in sets {
        c.arg("--set").arg(s);
    }
    c.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn watershed_grid_emits_fig1_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ws.csv");
    let o = wasscc("watershed", &configs().join("watershed.conf"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse_numeric(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(header, ["epsi", "delta"]);
    assert_eq!(rows.len(), 50);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
    let meta = fs::read_to_string(dir.path().join("ws.csv.meta")).unwrap();
    assert!(meta.contains("command = watershed"));
    assert!(meta.contains("grid.points = 50"));
}

#[test]
fn coeff_rows_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = wasscc(
        "coeff",
        &configs().join("coeff.conf"),
        &out,
        &["ambiguity.mode=optimistic", "ambiguity.delta=0.01"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse_numeric(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(header, ["epsi", "delta", "c", "argopt_eps_prime"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[1] == 0.01 && r[3] > r[0]));
    let meta = fs::read_to_string(dir.path().join("c.csv.meta")).unwrap();
    assert!(meta.contains("mode = optimistic"));
}

#[test]
fn nominal_portfolio_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("portfolio.conf");
    let alloc = dir.path().join("alloc.csv");
    let o = wasscc(
        "portfolio",
        &cfg,
        &alloc,
        &["ambiguity.delta=0", "ambiguity.mode=pessimistic"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse_numeric(&fs::read_to_string(&alloc).unwrap()).unwrap();
    assert_eq!(header[0], "F");
    assert_eq!(header.len(), 11);
    assert!((rows[0].iter().sum::<f64>() - 1.0).abs() < 1e-7);
    let meta = fs::read_to_string(dir.path().join("alloc.csv.meta")).unwrap();
    assert!(meta.contains("kkt_ok = true"), "{meta}");

    let x: Vec<String> = rows[0].iter().map(|v| v.to_string()).collect();
    let cert = dir.path().join("cert.csv");
    let set_x = format!("certify.x={}", x.join(","));
    let o = wasscc(
        "certify",
        &configs().join("certify.conf"),
        &cert,
        &[&set_x, "ambiguity.delta=0.005", "certify.n_samples=20000"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&cert).unwrap();
    assert!(text.starts_with("statistic,std_error,n_samples,verdict,seed\n"));
    assert!(text.lines().nth(1).unwrap().contains(",pass,950"));
}

#[test]
fn optimistic_portfolio_holds_stocks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = wasscc("portfolio", &configs().join("portfolio.conf"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = parse_numeric(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(rows[0][0] < 1e-6);
    assert!(rows[0][8..].iter().sum::<f64>() > 0.3);
}

#[test]
fn domain_violation_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.conf",
        "[ambiguity]\neps = 1.5\ndelta = 0.1\nfoo = 2\n",
    );
    let o = wasscc("coeff", &cfg, &dir.path().join("x.csv"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("line 2: `ambiguity.eps`"), "{e}");
    assert!(e.contains("line 4: `ambiguity.foo`"), "{e}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn bad_override_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wasscc(
        "watershed",
        &configs().join("watershed.conf"),
        &dir.path().join("w.csv"),
        &["grid.points=0"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("override: `grid.points`"));
    let o = Command::new(BIN).arg("watershed").output().unwrap();
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn missing_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wasscc("coeff", &dir.path().join("nope.conf"), &dir.path().join("x.csv"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasibility_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("production.conf");
    let o = wasscc("solve-pp", &cfg, &dir.path().join("pp.csv"), &["ambiguity.delta=1e6"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // Certifying the empty plan against a positive radius must fail.
    let cfg = configs().join("production.conf");
    let o = wasscc(
        "certify",
        &cfg,
        &dir.path().join("c.csv"),
        &[
            "certify.target=production",
            "certify.x=0,0,0,0,0,0,0,0,0,0",
            "certify.n_samples=5000",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(text.contains(",fail,"));
}

#[test]
fn outputs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("certify.conf");
    let sets = ["certify.x=0.5,0,0,0,0,0.1,0.1,0.1,0.1,0.05,0.05", "certify.n_samples=30000"];
    let run = |name: &str, threads: Option<&str>| {
        let out = dir.path().join(name);
        let mut c = Command::new(BIN);
        c.args(["certify", "-c"]).arg(&cfg).arg("-o").arg(&out);
        for s in sets {
            c.arg("--set").arg(s);
        }
        match threads {
            Some(t) => c.env("WASSCC_THREADS", t),
            None => c.env_remove("WASSCC_THREADS"),
        };
        let o = c.output().unwrap();
        assert!(o.status.code() != Some(1), "{}", stderr(&o));
        fs::read(&out).unwrap()
    };
    let a = run("a.csv", None);
    let b = run("b.csv", None);
    let c = run("c.csv", Some("1"));
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(
        fs::read(dir.path().join("a.csv.meta")).unwrap(),
        fs::read(dir.path().join("b.csv.meta")).unwrap()
    );

    let mut c = Command::new(BIN);
    c.args(["watershed", "-c"])
        .arg(configs().join("watershed.conf"))
        .arg("-o")
        .arg(dir.path().join("w.csv"))
        .env("WASSCC_THREADS", "zero");
    assert_eq!(c.output().unwrap().status.code(), Some(1));
}

#[test]
fn envelope_and_min_cost() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("production.conf");
    let out = dir.path().join("env.csv");
    let o = wasscc("envelope", &cfg, &out, &["grid.points=6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse_numeric(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(header, ["budget", "radius"]);
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1]));

    let out = dir.path().join("pp.csv");
    let o = wasscc("solve-pp", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse_numeric(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(header.len(), 12);
    assert!(rows[0][1] >= 10.0);
}

#[test]
fn production_instance_round_trips_through_the_grammar() {
    let amb = AmbiguitySpec::new(1.0, 0.1).unwrap();
    let inst = ProductionInstance::random(7283, 10, 5, 200.0, amb).unwrap();
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    let mut text = String::from("[ambiguity]\neps = 0.1\ndelta = 1\n\n[production]\nt = [\n");
    for r in 0..inst.m() {
        let row: Vec<f64> = inst.t.row(r).iter().copied().collect();
        text += &format!("  {}\n", join(&row));
    }
    text += "]\n";
    text += &format!("cost = {}\n", join(inst.cost.as_slice()));
    text += &format!("mean = {}\n", join(inst.mean.as_slice()));
    text += &format!("std = {}\n", join(inst.std.as_slice()));
    text += "upper = 200\n";
    let parsed = parse_config(&text).unwrap().production().unwrap();
    assert_eq!(parsed, inst);
}
