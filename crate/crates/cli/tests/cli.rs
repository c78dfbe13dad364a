use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn relfk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relfk")).current_dir(dir).env_remove("RELFK_OUT_DIR").args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ESTIMATE: &str = r#"
kind = "estimate"

[experiment]
t = 0.5
mass = 2.0
mode = "spin"
n_samples = 5000

[experiment.fields.magnetic_field]
kind = "gaussian_bump"
amplitude = [0.8, 0.6, 0.4]
center = [0.0, 0.0, 0.0]
width = 0.5
cutoff = 1.0

[experiment.fields.potential]
kind = "harmonic"
omega = 1.0

[estimate]
quantity = "matrix_element"
f = { profile = { kind = "gaussian", center = [0.0, 0.0, 0.0], width = 1.0 } }
g = { profile = { kind = "gaussian", center = [0.5, 0.0, 0.0], width = 0.8 }, sector = "up" }
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn validate_with_defaults_passes() {
    let tmp = TempDir::new().unwrap();
    let o = relfk(tmp.path(), &["validate", "--out", "v"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("v/checks.csv")).unwrap();
    assert!(table.lines().count() > 30);
    assert!(table.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(tmp.path().join("v/manifest.json").exists());
}

#[test]
fn failing_check_exits_one_and_names_it() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "strict.toml", "[validate]\nsamples = 2000\nks_limit = 1e-9\n");
    let o = relfk(tmp.path(), &["validate", "--config", &cfg, "--out", "v"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("subordinator_ks"), "{}", stderr(&o));
}

#[test]
fn missing_time_is_a_schema_error_naming_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[experiment]\nmass = 1.0\n");
    let o = relfk(tmp.path(), &["estimate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`t`"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_mismatched_kind_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "typo.toml", "[experiment]\nt = 1.0\nmas = 1.0\n");
    let o = relfk(tmp.path(), &["estimate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mas"));
    let cfg = write(tmp.path(), "kind.toml", "kind = \"decay\"\n[experiment]\nt = 1.0\n");
    assert_eq!(relfk(tmp.path(), &["estimate", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(tmp.path(), "neg.toml", "[experiment]\nt = -1.0\n");
    assert_eq!(relfk(tmp.path(), &["estimate", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(relfk(tmp.path(), &["estimate", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "neg.toml",
        "[experiment]\nt = 1.0\nmass = 0.1\nmode = \"spin\"\n[experiment.fields.magnetic_field]\nkind = \"constant\"\nvalue = [0.0, 0.0, 2.0]\n[lattice]\nn = 4\nside = 4.0\n",
    );
    let o = relfk(tmp.path(), &["oracle", "--config", &cfg, "--out", "o"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_files_for_any_worker_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "e.toml", ESTIMATE);
    let mut outputs = Vec::new();
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let o = relfk(tmp.path(), &["estimate", "--config", &cfg, "--seed", "7", "--samples", "6000", "--threads", threads, "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(tmp.path().join(out).join("estimate.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let other = relfk(tmp.path(), &["estimate", "--config", &cfg, "--seed", "8", "--samples", "6000", "--out", "d"]);
    assert!(other.status.success());
    assert_ne!(fs::read(tmp.path().join("d/estimate.csv")).unwrap(), outputs[0]);
}

#[test]
fn manifest_replays_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "e.toml", ESTIMATE);
    let first = relfk(tmp.path(), &["estimate", "--config", &cfg, "--seed", "3", "--out", "first", "--format", "json"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let replay = relfk(tmp.path(), &["estimate", "--from-manifest", "first/manifest.json", "--out", "replay"]);
    assert!(replay.status.success(), "{}", stderr(&replay));
    let a = fs::read(tmp.path().join("first/results.json")).unwrap();
    let b = fs::read(tmp.path().join("replay/results.json")).unwrap();
    assert_eq!(a, b);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("first/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["samples"], 5000);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(relfk(tmp.path(), &["decay", "--from-manifest", "first/manifest.json"]).status.code(), Some(2));
}

#[test]
fn output_goes_only_to_the_declared_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "e.toml", ESTIMATE);
    let o = Command::new(env!("CARGO_BIN_EXE_relfk"))
        .current_dir(tmp.path())
        .env("RELFK_OUT_DIR", "from-env")
        .args(["estimate", "--config", &cfg, "--samples", "2000"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let mut entries: Vec<String> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    entries.sort();
    assert_eq!(entries, ["e.toml", "from-env"]);
    let mut written: Vec<String> =
        fs::read_dir(tmp.path().join("from-env")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    written.sort();
    assert_eq!(written, ["estimate.csv", "manifest.json"]);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "e.toml", ESTIMATE);
    assert!(relfk(tmp.path(), &["estimate", "--config", &cfg, "--samples", "2000", "--out", "o"]).status.success());
    let text = fs::read_to_string(tmp.path().join("o/estimate.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let re = row[2];
    let mantissa = re.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17, "{re}");
}

#[test]
fn oracle_decay_martingale_and_diamagnetic_run() {
    let tmp = TempDir::new().unwrap();
    let harmonic = "[experiment]\nt = 0.5\nmass = 1.0\nmode = \"spinless\"\nn_samples = 4000\nseed = 2\n\
                    [experiment.fields.potential]\nkind = \"harmonic\"\nomega = 1.0\n";
    let cfg = write(tmp.path(), "o.toml", &format!("{harmonic}[lattice]\nn = 6\nside = 6.0\neigenvalues = 4\n"));
    let o = relfk(tmp.path(), &["oracle", "--config", &cfg, "--out", "oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("oracle/spectrum.csv")).unwrap().lines().count(), 5);

    let cfg = write(tmp.path(), "d.toml", &format!("{harmonic}[lattice]\nn = 10\nside = 8.0\n"));
    let o = relfk(tmp.path(), &["decay", "--config", &cfg, "--out", "decay"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["fits.csv", "profile.csv", "state.csv"] {
        assert!(tmp.path().join("decay").join(name).exists());
    }

    let cfg = write(
        tmp.path(),
        "m.toml",
        &format!("{harmonic}[lattice]\nn = 8\nside = 7.0\n[martingale]\nt_list = [0.0, 0.25]\npoints = [[1.0, 0.5, 0.0]]\nbudget = 0.05\nstop_radius = 0.5\n"),
    );
    let o = relfk(tmp.path(), &["martingale", "--config", &cfg, "--out", "mart"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scan = fs::read_to_string(tmp.path().join("mart/scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 3);
    assert!(tmp.path().join("mart/stopped.csv").exists());

    let cfg = write(
        tmp.path(),
        "dia.toml",
        "[experiment]\nt = 0.5\nmass = 2.0\nmode = \"spin\"\nn_samples = 4000\n\
         [experiment.fields.magnetic_field]\nkind = \"constant\"\nvalue = [0.3, 0.4, 0.5]\n[lattice]\nn = 4\nside = 4.0\n",
    );
    let o = relfk(tmp.path(), &["diamagnetic", "--config", &cfg, "--out", "dia", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("dia/results.json")).unwrap()).unwrap();
    assert_eq!(json["comparison"][0]["holds"], true);
    assert_eq!(json["comparison"][1]["check"], "lattice_ground_energy");
}
