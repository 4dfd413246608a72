use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mcusum_cli::report::fmt_g;
use mcusum_cli::{ExperimentConfig, Overrides};

const BIN: &str = env!("CARGO_BIN_EXE_mcusum");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn mcusum(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("MCUSUM_WORKERS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_TABLE: &str = r#"
seed = 3

[model]
kind = "independent_gaussian"
thetas = [1.0, 1.0, 1.0]

[table1]
delay_runs = 200
arl_runs = 50
arl_horizon = 100000

[[table1.rows]]
label = "S^A"
affected = 2
threshold = 4.0
detector = { rule = "oracle", affected = [1, 2] }

[[table1.rows]]
affected = 2
threshold = 5.0
detector = { rule = "shat", pi = 0.5 }
"#;

#[test]
fn every_shipped_config_round_trips() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        n += 1;
    }
    assert_eq!(n, 4);
}

#[test]
fn overrides_replace_seed_runs_and_output() {
    let mut cfg = ExperimentConfig::parse(SMALL_TABLE).unwrap();
    cfg.apply(&Overrides { seed: Some(9), runs: Some(7), out: Some("elsewhere".into()) });
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
    let t = cfg.table1.unwrap();
    assert_eq!((t.delay_runs, t.arl_runs), (7, 7));
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("malformed.toml", "seed = [".to_string()),
        ("unknown.toml", format!("{SMALL_TABLE}\nunexpected = 1\n")),
        ("mismatch.toml", SMALL_TABLE.replace("affected = [1, 2]", "affected = [1, 3]")),
        ("bad_theta.toml", SMALL_TABLE.replace("thetas = [1.0, 1.0, 1.0]", "thetas = [1.0, 0.0, 1.0]")),
        ("no_section.toml", "seed = 1\n[model]\nkind = \"independent_gaussian\"\nthetas = [1.0]\n".to_string()),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, &text);
        let out = mcusum(&["table1"], &cfg, &dir.path().join("out"));
        assert_eq!(out.status.code(), Some(1), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = Command::new(BIN).arg("table1").output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
seed = 1

[model]
kind = "independent_gaussian"
thetas = [1.0, 1.0]

[calibrate]
gamma = 1000.0
runs = 50
horizon = 5

[[calibrate.detectors]]
detector = { rule = "oracle", affected = [1] }
"#;
    let cfg = write(dir.path(), "short.toml", text);
    let out = mcusum(&["calibrate"], &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn constants_for_unit_shift() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mcusum(&["constants"], &configs_dir().join("constants.toml"), &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("constants.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let unit = rows.records().map(Result::unwrap).find(|r| r[col("theta")].parse::<f64>().unwrap() == 1.0).unwrap();
    let get = |name: &str| unit[col(name)].parse::<f64>().unwrap();
    assert!((get("rho") - 0.717937).abs() < 1e-6);
    assert!((get("beta") + 0.532063).abs() < 1e-6);
    assert!((get("delta") - 0.56037).abs() < 1e-6);
    assert!(out_dir.join("designs.csv").exists());
}

#[test]
fn table_output_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", SMALL_TABLE);
    let mut outputs = Vec::new();
    for w in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{w}"));
        let out = mcusum(&["table1", "--workers", w], &cfg, &out_dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(out_dir.join("table1.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    assert!(text.starts_with("rule,affected,b,arl,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn six_significant_digits() {
    assert_eq!(fmt_g(10.586172788080074), "10.5862");
    assert_eq!(fmt_g(100090.0), "100090");
    assert_eq!(fmt_g(1e7), "1e+07");
    assert_eq!(fmt_g(0.000123456789), "0.000123457");
    assert_eq!(fmt_g(-2.5e-7), "-2.5e-07");
    assert_eq!(fmt_g(0.0), "0");
    assert_eq!(fmt_g(f64::NAN), "nan");
}
