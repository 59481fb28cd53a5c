use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn semc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semc"))
        .args(args)
        .current_dir(cwd)
        .env("SEMC_OUTPUT_DIR", cwd.join("default-root"))
        .output()
        .expect("spawn semc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn bimodal_semc_run_lands_near_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let out = semc(&["run", "--problem", "bimodal", "--sampler", "semc", "--T", "10000", "--seed", "7", "--out", "r"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("r/result.json"));
    assert_eq!(doc["schema_version"], 1);
    let f = doc["free_energy"].as_f64().unwrap();
    assert!((f - 9.022).abs() <= 0.3, "{f}");
    for name in ["samples_rung_final.csv", "histograms.csv", "diagnostics.csv", "config.toml"] {
        assert!(dir.path().join("r").join(name).is_file(), "{name}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&semc(&["run", "--config", "missing.toml"], p)), 2);
    assert_eq!(code(&semc(&["run"], p)), 2);
    assert_eq!(code(&semc(&["run", "--problem", "nonsense"], p)), 2);
    assert_eq!(code(&semc(&["run", "--problem", "bimodal", "--T", "101", "--S", "10"], p)), 2);
    assert_eq!(code(&semc(&["frobnicate"], p)), 2);
    std::fs::write(p.join("bad.toml"), "seed = \"x\"\n").unwrap();
    assert_eq!(code(&semc(&["run", "--config", "bad.toml"], p)), 2);

    // a spectral dataset directory without data: configuration error
    assert_eq!(code(&semc(&["run", "--problem", "spectral-k3", "--dataset", "nowhere"], p)), 2);

    // an out path that is an existing file cannot be created as a directory
    std::fs::write(p.join("blocker"), "").unwrap();
    assert_eq!(code(&semc(&["run", "--problem", "bimodal", "--T", "200", "--S", "10", "--out", "blocker"], p)), 1);
}

#[test]
fn same_command_twice_is_identical_except_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (problem, sampler) in [("bimodal", "semc"), ("exhaustive-desk", "waste-free-smc"), ("bimodal", "remc")] {
        let mut docs = Vec::new();
        for (i, threads) in ["1", "3"].iter().enumerate() {
            let o = format!("{problem}-{sampler}-{i}");
            let out = semc(&["run", "--problem", problem, "--sampler", sampler, "--T", "2000", "--L", "8", "--n", "20", "--seed", "11", "--threads", threads, "--out", &o], p);
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            let mut doc = json(&p.join(&o).join("result.json"));
            doc["wall_time"] = Value::Null;
            let samples = std::fs::read(p.join(&o).join("samples_rung_final.csv")).unwrap();
            docs.push((doc, samples));
        }
        assert_eq!(docs[0], docs[1], "{problem} {sampler}");
    }
}

#[test]
fn free_energy_round_trips_from_stored_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (problem, sampler) in [("bimodal", "semc"), ("exhaustive-desk", "smcs"), ("bimodal", "remc")] {
        let o = format!("{problem}-{sampler}");
        let out = semc(&["run", "--problem", problem, "--sampler", sampler, "--T", "3000", "--S", "30", "--L", "10", "--out", &o], p);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let doc = json(&p.join(&o).join("result.json"));
        let n = doc["data_size"].as_f64().unwrap();
        let rungs = doc["rungs"].as_array().unwrap();
        assert_eq!(floats(&doc["ladder"]["betas"]), rungs.iter().map(|r| r["beta"].as_f64().unwrap()).collect::<Vec<_>>());
        let mut f = 0.0;
        for pair in rungs.windows(2) {
            let gap = pair[1]["beta"].as_f64().unwrap() - pair[0]["beta"].as_f64().unwrap();
            f += n * gap * pair[0]["energy_min"].as_f64().unwrap() - pair[0]["log_mean_weight"].as_f64().unwrap();
        }
        let stored = doc["free_energy"].as_f64().unwrap();
        assert!((f - stored).abs() <= 1e-9, "{problem} {sampler}: {f} vs {stored}");
        assert!(rungs.last().unwrap()["log_mean_weight"].is_null());

        // the final-rung samples file holds every final-rung state with its energy
        let mut rdr = csv::Reader::from_path(p.join(&o).join("samples_rung_final.csv")).unwrap();
        let energies: Vec<f64> =
            rdr.records().map(|r| r.unwrap().iter().last().unwrap().parse::<f64>().unwrap()).collect();
        let last = rungs.last().unwrap();
        assert_eq!(energies.len() as u64, last["count"].as_u64().unwrap());
        let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = energies.iter().sum::<f64>() / energies.len() as f64;
        assert_eq!(min, last["energy_min"].as_f64().unwrap());
        assert!((mean - last["energy_mean"].as_f64().unwrap()).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

#[test]
fn reference_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = semc(&["reference", "--problem", "bimodal", "--out", "ref"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let reference = json(&p.join("ref/reference.json"));
    assert!((reference["free_energy"].as_f64().unwrap() - 9.022).abs() <= 1e-3);
    let masses = floats(&reference["histograms"][0]["masses"]);
    assert_eq!(masses.len(), 1000);
    let left: f64 = masses[..500].iter().sum();
    assert!((left - 0.867).abs() < 0.002, "{left}");

    assert_eq!(code(&semc(&["run", "--problem", "bimodal", "--T", "5000", "--trials", "2", "--out", "runs"], p)), 0);
    let out = semc(&["compare", "--reference", "ref", "runs", "--out", "cmp"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(p.join("cmp/comparison.txt")).unwrap();
    assert!(text.contains("semc-T5000-S50"), "{text}");
    let mut rdr = csv::Reader::from_path(p.join("cmp/comparison.csv")).unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(&row[1], "2");
    assert!(row[2].parse::<f64>().unwrap() < 0.3);

    // mixed bin widths
    assert_eq!(code(&semc(&["run", "--problem", "bimodal", "--T", "2000", "--bin-width", "0.002", "--out", "coarse"], p)), 0);
    assert_eq!(code(&semc(&["compare", "--reference", "ref", "coarse"], p)), 2);
    assert_eq!(code(&semc(&["compare", "--reference", "ref", "does-not-exist"], p)), 2);
}

#[test]
fn result_compared_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&semc(&["run", "--problem", "bimodal", "--T", "2000", "--out", "r"], p)), 0);
    let doc = json(&p.join("r/result.json"));
    let reference = serde_json::json!({
        "schema_version": 1,
        "problem": doc["problem"],
        "problem_label": doc["problem_label"],
        "method": "self",
        "free_energy": doc["free_energy"],
        "sampler": null,
        "seed": null,
        "histograms": doc["histograms"],
    });
    std::fs::write(p.join("self.json"), reference.to_string()).unwrap();
    let out = semc(&["compare", "--reference", "self.json", "r", "--out", "cmp"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(p.join("cmp/comparison.csv")).unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn datasets_are_persisted_and_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = semc(&["run", "--problem", "spectral-k3", "--T", "500", "--S", "10", "--data-seed", "4", "--out", "a"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let side = json(&p.join("a/data.json"));
    assert_eq!(side["spec"]["seed"], 4);
    let data_dir = p.join("a").to_string_lossy().into_owned();
    let out = semc(&["run", "--problem", "spectral-k3", "--T", "500", "--S", "10", "--dataset", &data_dir, "--out", "b"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(p.join("a/data.csv")).unwrap(), std::fs::read(p.join("b/data.csv")).unwrap());
    let (mut a, mut b) = (json(&p.join("a/result.json")), json(&p.join("b/result.json")));
    a["wall_time"] = Value::Null;
    b["wall_time"] = Value::Null;
    assert_eq!(a["free_energy"], b["free_energy"]);
    assert_eq!(a["histograms"], b["histograms"]);
}

#[test]
fn default_output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = semc(&["run", "--problem", "bimodal", "--T", "200", "--S", "10", "--seed", "3"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("default-root/bimodal-semc-T200-S10-seed3/result.json").is_file());
}

#[test]
fn example_config_runs_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/exhaustive-desk-smcs.toml");
    let cfg = cfg.to_string_lossy().into_owned();
    let out = semc(&["run", "--config", &cfg, "--T", "500", "--trials", "2", "--out", "x"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a = json(&dir.path().join("x/trial-00/result.json"));
    let b = json(&dir.path().join("x/trial-01/result.json"));
    assert_eq!((a["seed"].as_u64(), b["seed"].as_u64()), (Some(3), Some(4)));
    assert_eq!(a["sampler"]["t"], 500);
}
