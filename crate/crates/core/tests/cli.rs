use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rowcol");
const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

fn run(sub: &str, config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args([sub, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("ROWCOL_JOBS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

fn assert_deterministic(sub: &str) {
    let cfg = Path::new(CONFIGS).join(format!("{sub}.json"));
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(sub, &cfg, a.path());
    let rb = run(sub, &cfg, b.path());
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(rb.status.code(), Some(0));
    assert_eq!(ra.stdout, rb.stdout, "{sub}: stdout differs");
    let (oa, ob) = (outputs(a.path()), outputs(b.path()));
    assert!(!oa.is_empty());
    assert_eq!(oa, ob, "{sub}: output files differ");
}

#[test]
fn sandwich_is_deterministic() {
    assert_deterministic("sandwich");
}

#[test]
fn khintchine_is_deterministic() {
    assert_deterministic("khintchine");
}

#[test]
fn decompose_is_deterministic() {
    assert_deterministic("decompose");
}

#[test]
fn layercake_is_deterministic() {
    assert_deterministic("layercake");
}

#[test]
fn freeprob_is_deterministic() {
    assert_deterministic("freeprob");
}

#[test]
fn ktcurve_is_deterministic() {
    assert_deterministic("ktcurve");
}

#[test]
fn weaktype_is_deterministic() {
    assert_deterministic("weaktype");
}

#[test]
fn bad_configs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("empty.json", ""),
        ("malformed.json", "{\"kind\": \"layercake\", \"seed\": 1,"),
        ("unknown_field.json", "{\"kind\": \"layercake\", \"seed\": 1, \"count\": 2, \"colour\": 3}"),
        ("no_seed.json", "{\"kind\": \"layercake\", \"count\": 2}"),
    ];
    for (name, body) in cases {
        let cfg = write_config(dir.path(), name, body);
        let r = run("layercake", &cfg, dir.path());
        assert_eq!(r.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!r.stderr.is_empty());
    }
    // a valid config for another subcommand
    let r = run("sandwich", &Path::new(CONFIGS).join("layercake.json"), dir.path());
    assert_eq!(r.status.code(), Some(2));
    let missing = run("layercake", &dir.path().join("absent.json"), dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", "{\n  \"kind\": \"layercake\",\n  \"seed\": \"one\"\n}");
    let r = run("layercake", &cfg, dir.path());
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn zero_input_gives_trivial_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let zero = "{\"rows\": 2, \"cols\": 2, \"re\": [0, 0, 0, 0], \"im\": [0, 0, 0, 0]}";
    fs::write(dir.path().join("zero.json"), format!("[{zero}, {zero}]")).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        "{\"kind\": \"decompose\", \"method\": \"schur\", \"p0\": 1, \"instances\": {\"file\": \"zero.json\"}}",
    );
    let out = dir.path().join("out");
    let r = run("decompose", &cfg, &out);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let certs: serde_json::Value = serde_json::from_slice(&fs::read(out.join("certificates.json")).unwrap()).unwrap();
    let first = &certs.as_array().unwrap()[0];
    assert!(first["seed"].is_null());
    assert_eq!(first["certificate"]["epsilon"].as_f64(), Some(0.0));
    for b in first["certificate"]["bounds"].as_array().unwrap() {
        assert_eq!(b["measured"].as_f64(), Some(0.0), "{b}");
    }
}

#[test]
fn identical_functionals_have_unit_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"kind": "khintchine", "seed": 9, "left": "sign_average", "right": "sign_average",
            "count": 4, "n_max": 2, "len_max": 3, "exponents": [{"p": 2, "q": 1}]}"#,
    );
    let r = run("khintchine", &cfg, dir.path());
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("khintchine.csv")).unwrap();
    let col = rd.headers().unwrap().iter().position(|h| h == "ratio").unwrap();
    let mut n = 0;
    for rec in rd.records() {
        assert_eq!(rec.unwrap()[col].parse::<f64>().unwrap(), 1.0);
        n += 1;
    }
    assert_eq!(n, 4);
}

#[test]
fn seed_override_changes_randomized_output() {
    let cfg = Path::new(CONFIGS).join("layercake.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("layercake", &cfg, a.path()).status.code(), Some(0));
    let r = Command::new(BIN)
        .args(["layercake", "--seed", "99", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0));
    assert_ne!(outputs(a.path()), outputs(b.path()));
}

#[test]
fn invalid_exponents_are_rejected_when_loading() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"kind": "khintchine", "seed": 1, "left": "sign_average", "right": "mixed_lorentz",
            "count": 2, "exponents": [{"p": 2, "q": 0.5}]}"#,
    );
    let r = run("khintchine", &cfg, dir.path());
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("q = 0.5"));
}
