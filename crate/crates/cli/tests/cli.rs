use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rne_cli::{emit_plot_data, CliError, ExperimentConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rne(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rne"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RNE_SEED")
        .output()
        .unwrap()
}

fn header_hash(text: &str) -> &str {
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# config_hash="), "{first}");
    assert!(first.ends_with(" format_version=1"));
    &first["# config_hash=".len().."# config_hash=".len() + 64]
}

#[test]
fn pliss_example_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.txt");
    fs::write(&input, "2\n2\n0\n2\n").unwrap();
    let cfg = configs().join("doubling.ini");
    let out = rne(
        &["--config", cfg.to_str().unwrap(), "pliss", "--input", input.to_str().unwrap(), "--A", "2", "--c1", "1", "--c2", "1.5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1\n2\n4\n");
    let file = fs::read_to_string(dir.path().join("pliss.txt")).unwrap();
    header_hash(&file);
    assert!(file.ends_with("1\n2\n4\n"));
}

#[test]
fn pliss_hypotheses_unmet_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.txt");
    fs::write(&input, "0\n2\n2\n").unwrap();
    let cfg = configs().join("doubling.ini");
    let args = ["--config", cfg.to_str().unwrap(), "pliss", "--input", input.to_str().unwrap(), "--A", "2", "--c1", "1", "--c2", "1.5"];
    assert_eq!(rne(&args, dir.path()).status.code(), Some(2));
    let mut waived = args.to_vec();
    waived.push("--waive");
    let out = rne(&waived, dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "2\n3\n");
}

#[test]
fn unsorted_lambdas_exit_1_with_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, "[map]\ndim = 2\nlambdas = 4, 2\n").unwrap();
    let out = rne(&["--config", cfg.to_str().unwrap(), "check"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("lambdas") && err.contains("line 3"), "{err}");
}

#[test]
fn unknown_key_and_locale_decimal_rejected() {
    for (text, key, line) in [
        ("[run]\nn = 10\nthreads = 4\n", "threads", 3),
        ("[map]\ndelta1 = 0,1\n", "delta1", 2),
        ("[noise]\nlaw = gaussian\n", "law", 2),
    ] {
        match ExperimentConfig::parse(text) {
            Err(rne_core::Error::Config { line: l, key: k, .. }) => assert_eq!((l, k.as_str()), (line, key)),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn missing_config_file_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = rne(&["--config", "/nonexistent/x.ini", "check"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_on_linear_passes_and_reference_reports_h3() {
    let dir = tempfile::tempdir().unwrap();
    let lin = configs().join("linear24.ini");
    let out = rne(&["--config", lin.to_str().unwrap(), "check"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = fs::read_to_string(dir.path().join("check.records")).unwrap();
    assert!(rec.contains("H1,pass") && rec.contains("H2,pass") && rec.contains("H3,pass"));

    let refc = configs().join("reference.ini");
    let out = rne(&["--config", refc.to_str().unwrap(), "check"], dir.path());
    // the oscillation clause m2 - m1 < beta is out of reach for this spec
    assert_eq!(out.status.code(), Some(2));
    let rec = fs::read_to_string(dir.path().join("check.records")).unwrap();
    assert!(rec.contains("H1,pass") && rec.contains("H2,pass") && rec.contains("H3,fail"));
}

#[test]
fn seed_override_changes_hash() {
    let cfg = configs().join("doubling.ini");
    let a = rne_cli::load_config(&cfg, None).unwrap();
    let b = rne_cli::load_config(&cfg, Some(99)).unwrap();
    assert_eq!(b.noise.seed, 99);
    assert_ne!(a.hash(), b.hash());
    let mut c = a.clone();
    c.run.output_dir = PathBuf::from("elsewhere");
    assert_eq!(a.hash(), c.hash());
}

#[test]
fn env_seed_reaches_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("doubling.ini");
    let run = |seed: Option<&str>, sub: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_rne"));
        c.args(["--config", cfg.to_str().unwrap(), "--out"]).arg(dir.path().join(sub)).arg("orbit");
        match seed {
            Some(s) => c.env("RNE_SEED", s),
            None => c.env_remove("RNE_SEED"),
        };
        assert!(c.output().unwrap().status.success());
        fs::read_to_string(dir.path().join(sub).join("orbit.csv")).unwrap()
    };
    let a = run(None, "a");
    let b = run(Some("12345"), "b");
    assert_ne!(header_hash(&a), header_hash(&b));
    assert_ne!(a.lines().nth(2), b.lines().nth(2));
    let bad = Command::new(env!("CARGO_BIN_EXE_rne"))
        .args(["--config", cfg.to_str().unwrap(), "orbit"])
        .env("RNE_SEED", "-3")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn plot_data_from_pressure_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("pressure.csv"),
        "# config_hash=abc format_version=1\nfiber,n,eps,value\n0,4,0.4,0.7\n0,4,0.3,0.71\n0,4,0.2,0.8\n1,4,0.4,0.5\n",
    )
    .unwrap();
    let files = emit_plot_data(dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(&files[0]).unwrap();
    assert!(text.starts_with("# config_hash=abc format_version=1\nseries,x,y\n"));
    let series: std::collections::BTreeSet<&str> = text.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(series.len(), 3);
    assert!(text.contains("eps=0.4,4,0.6\n"));
}

#[test]
fn plot_data_on_empty_dir_lists_inputs() {
    let dir = tempfile::tempdir().unwrap();
    match emit_plot_data(dir.path()) {
        Err(CliError::MissingInputs { files, .. }) => {
            assert!(files.contains("pressure.csv") && files.contains("hyptimes_density.csv") && files.contains("equilibrium.csv"))
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn doubling_pipeline_plateaus_at_log2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("doubling.ini");
    let out = rne(&["--config", cfg.to_str().unwrap(), "pressure"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    emit_plot_data(dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("plot_pressure.csv")).unwrap();
    for line in text.lines().skip(2) {
        let y: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((y - 2f64.ln()).abs() < 1e-12, "{line}");
    }
}
