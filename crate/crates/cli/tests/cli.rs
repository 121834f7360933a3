use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_nli-planner");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("NLI_PLANNER_THREADS", "1").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn generate_writes_one_file_per_system_deterministically() {
    let a = scratch("gen_a");
    let b = scratch("gen_b");
    for dir in [&a, &b] {
        ok(&["generate", "--category", "2", "--count", "3", "--seed", "11", "--n-spans", "4", "--out", dir.to_str().unwrap()]);
    }
    let fa = sorted_files(&a);
    let fb = sorted_files(&b);
    assert_eq!(fa.len(), 3);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        let v = json(x);
        assert_eq!(v["version"], 1);
        assert_eq!(v["spans"].as_array().unwrap().len(), 4);
    }
    let other = scratch("gen_c");
    ok(&["generate", "--category", "2", "--count", "1", "--seed", "12", "--n-spans", "4", "--out", other.to_str().unwrap()]);
    assert_ne!(fs::read(&sorted_files(&other)[0]).unwrap(), fs::read(&fa[0]).unwrap());
}

#[test]
fn category_five_cut_is_low_order() {
    let dir = scratch("gen_cat5");
    ok(&["generate", "--category", "5", "--count", "12", "--seed", "3", "--n-spans", "3", "--no-power-opt", "--out", dir.to_str().unwrap()]);
    for f in sorted_files(&dir) {
        let v = json(&f);
        let cut = v["cut_index"].as_u64().unwrap() as usize;
        let format = v["channels"][cut]["format"].as_str().unwrap();
        assert!(format == "PM-QPSK" || format == "PM-8QAM", "{}: {format}", f.display());
    }
}

#[test]
fn invalid_category_is_a_usage_error() {
    let dir = scratch("gen_bad");
    let out = run(&["generate", "--category", "6", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["evaluate", "--system", fixture("three_channel.json").to_str().unwrap(), "--variant", "CFM9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_nonlinearity_gives_zero_nli() {
    let dir = scratch("gamma0");
    let text = fs::read_to_string(fixture("three_channel.json")).unwrap();
    let inline = r#"{"alpha_db_per_km": 0.2, "beta2_ps2_per_km": -21.3, "beta3_ps3_per_km": 0.1452, "gamma_per_w_km": 0.0, "f_ref_thz": 193.8}"#;
    let text = text.replace("\"SMF\"", inline).replace("\"NZDSF1\"", inline);
    let sys = dir.join("system.json");
    fs::write(&sys, text).unwrap();
    let out = dir.join("result.json");
    let csv = dir.join("csv");
    for variant in ["CFM1", "CFM2", "CFM3", "CFM4"] {
        ok(&["evaluate", "--system", sys.to_str().unwrap(), "--variant", variant, "--out", out.to_str().unwrap(), "--csv-dir", csv.to_str().unwrap()]);
        let v = json(&out);
        assert_eq!(v["kind"], "evaluation");
        for ch in v["channels"].as_array().unwrap() {
            assert_eq!(ch["p_nli_w"].as_f64().unwrap(), 0.0);
            assert_eq!(ch["nli_psd_w_per_thz"].as_f64().unwrap(), 0.0);
        }
        assert!(v["cut"]["p_nli_w"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
        let table = fs::read_to_string(csv.join("channels.csv")).unwrap();
        for line in table.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[4].parse::<f64>().unwrap(), 0.0);
            assert_eq!(cols[5].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn identity_coefficients_reproduce_cfm1() {
    let dir = scratch("identity");
    let coeffs = nli_planner::cfm::ModelCoefficients::identity(nli_planner::cfm::ModelKind::Cfm2).unwrap();
    let file = serde_json::json!({"version": 1, "kind": "CFM2", "coefficients": coeffs});
    let cpath = dir.join("identity.json");
    fs::write(&cpath, serde_json::to_string(&file).unwrap()).unwrap();
    let sys = fixture("three_channel.json");
    let a = dir.join("cfm1.json");
    let b = dir.join("cfm2.json");
    ok(&["evaluate", "--system", sys.to_str().unwrap(), "--variant", "CFM1", "--out", a.to_str().unwrap()]);
    ok(&["evaluate", "--system", sys.to_str().unwrap(), "--coefficients", cpath.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let (va, vb) = (json(&a), json(&b));
    assert_eq!(va["channels"], vb["channels"]);
    assert_eq!(va["cut"]["per_span_snr_db"], vb["cut"]["per_span_snr_db"]);
    assert_eq!(va["reach"], vb["reach"]);
}

#[test]
fn fixture_evaluation_matches_pinned_output() {
    let out = ok(&["evaluate", "--system", fixture("three_channel.json").to_str().unwrap(), "--variant", "CFM4"]);
    let got: Value = serde_json::from_slice(&out.stdout).unwrap();
    let pinned = json(&fixture("three_channel.cfm4.expected.json"));
    assert_eq!(got["channels"].as_array().unwrap().len(), 3);
    assert_close(&got, &pinned, "");
}

fn assert_close(a: &Value, b: &Value, at: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{at}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{at}");
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                assert_close(p, q, &format!("{at}/{i}"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>(), "{at}");
            for (k, p) in x {
                assert_close(p, &y[k], &format!("{at}/{k}"));
            }
        }
        _ => assert_eq!(a, b, "{at}"),
    }
}

#[test]
fn schema_violation_reports_a_pointer() {
    let dir = scratch("schema");
    let text = fs::read_to_string(fixture("three_channel.json")).unwrap();
    let sys = dir.join("bad.json");
    fs::write(&sys, text.replacen("\"PM-16QAM\"", "\"PM-12QAM\"", 1)).unwrap();
    let out = run(&["evaluate", "--system", sys.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/channels/0/format"), "{err}");

    fs::write(&sys, text.replacen("\"nf_db\": 5.5", "\"nf_db\": 5.5, \"noise\": 1", 1)).unwrap();
    let out = run(&["evaluate", "--system", sys.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/spans/0"));
}

#[test]
fn newer_versions_are_rejected() {
    let dir = scratch("version");
    let text = fs::read_to_string(fixture("three_channel.json")).unwrap();
    let sys = dir.join("v2.json");
    fs::write(&sys, text.replace("\"version\": 1", "\"version\": 2")).unwrap();
    let out = run(&["evaluate", "--system", sys.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported version 2"));
}

fn small_campaign(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "version": 1,
        "generator": {"n_spans": 6, "band_width_thz": 1.0, "seed": 5},
        "categories": [1, 4],
        "cut_positions": ["lowest", "center"],
        "n_systems": 2,
        "variants": [{"kind": "CFM1"}, {"kind": "CFM3"}],
        "benchmark": {"type": "model", "variant": {"kind": "CFM1"}},
        "min_cut_dispersion_ps2_per_km": null
    });
    let path = dir.join("campaign.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn self_benchmark_campaign_has_zero_error() {
    let dir = scratch("campaign");
    let cfg = small_campaign(&dir);
    let out = dir.join("result.json");
    let csv = dir.join("csv");
    ok(&["campaign", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--csv-dir", csv.to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(v["kind"], "campaign");
    let stats = v["stats"].as_array().unwrap();
    let cfm1: Vec<&Value> = stats.iter().filter(|g| g["variant"] == "CFM1").collect();
    assert_eq!(cfm1.len(), 3);
    for g in cfm1 {
        for key in ["mean", "std_dev", "peak", "peak_to_peak"] {
            assert_eq!(g["stats"][key].as_f64().unwrap(), 0.0, "{key}");
        }
    }
    let stats_csv = fs::read_to_string(csv.join("stats.csv")).unwrap();
    assert!(stats_csv.starts_with("variant,cut_position,n,mean_db,std_db,peak_db,peak_to_peak_db,min_db,max_db\n"));
    assert!(stats_csv.contains("CFM1,all,"));
    let systems_csv = fs::read_to_string(csv.join("systems.csv")).unwrap();
    assert!(systems_csv.lines().next().unwrap().ends_with("delta_CFM1,delta_CFM3"));
    assert!(fs::read_to_string(csv.join("histogram.csv")).unwrap().starts_with("variant,cut_position,center_db,count\n"));

    let again = dir.join("again.json");
    ok(&["campaign", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());

    let other = dir.join("cfm3.json");
    ok(&["campaign", "--config", cfg.to_str().unwrap(), "--benchmark", "CFM3", "--out", other.to_str().unwrap()]);
    let v = json(&other);
    assert_eq!(v["benchmark"], "CFM3");
}

fn small_fit(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "version": 1,
        "generator": {"n_spans": 5, "band_width_thz": 1.0, "seed": 9},
        "categories": [1],
        "cut_positions": ["center"],
        "n_training": 3,
        "max_iters": 30,
        "restarts": 0,
        "min_cut_dispersion_ps2_per_km": null
    });
    let path = dir.join("fit.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn fit_against_own_table_reports_no_improvement() {
    let dir = scratch("fit_self");
    let cfg = small_fit(&dir);
    let out = dir.join("coefficients.json");
    ok(&["fit", "--config", cfg.to_str().unwrap(), "--variant", "CFM2", "--benchmark", "CFM2", "--out", out.to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(v["version"], 1);
    assert_eq!(v["kind"], "CFM2");
    assert_eq!(v["fit"]["improved"], false);
    assert_eq!(v["fit"]["final_cost"].as_f64().unwrap(), 0.0);
    let published = nli_planner::cfm::ModelCoefficients::published(nli_planner::cfm::ModelKind::Cfm2).unwrap();
    assert_eq!(v["coefficients"], serde_json::to_value(published).unwrap());
}

#[test]
fn fitted_coefficients_load_into_evaluate() {
    let dir = scratch("fit_eval");
    let cfg = small_fit(&dir);
    let out = dir.join("coefficients.json");
    ok(&["fit", "--config", cfg.to_str().unwrap(), "--variant", "CFM2", "--benchmark", "CFM4", "--out", out.to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(v["fit"]["benchmark"], "CFM4");
    assert!(v["fit"]["final_cost"].as_f64().unwrap() <= v["fit"]["initial_cost"].as_f64().unwrap());
    let res = dir.join("eval.json");
    ok(&["evaluate", "--system", fixture("three_channel.json").to_str().unwrap(), "--coefficients", out.to_str().unwrap(), "--out", res.to_str().unwrap()]);
    assert_eq!(json(&res)["channels"].as_array().unwrap().len(), 3);

    let out = run(&["fit", "--config", cfg.to_str().unwrap(), "--variant", "CFM1", "--out", dir.join("x.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_command_reports_psd_per_span() {
    let dir = scratch("oracle");
    let out = dir.join("oracle.json");
    let csv = dir.join("csv");
    ok(&["oracle", "--system", fixture("three_channel.json").to_str().unwrap(), "--spans", "2", "--f-eval", "193.8", "193.81", "--out", out.to_str().unwrap(), "--csv-dir", csv.to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(v["kind"], "oracle");
    let psd = v["nli_psd_w_per_thz"].as_array().unwrap();
    assert_eq!(psd.len(), 2);
    for row in psd {
        let row: Vec<f64> = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(row.len(), 2);
        assert!(row[0] > 0.0 && row[1] > row[0]);
    }
    let p = v["p_nli_w"].as_array().unwrap();
    let g0 = psd[0][1].as_f64().unwrap();
    assert!((p[1].as_f64().unwrap() - g0 * 0.064).abs() <= 1e-12 * g0);
    let table = fs::read_to_string(csv.join("oracle.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
}
