use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_saddlechol"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
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

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn factor_small_example() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.txt", "1 1\n4 2\n2 -1\n");
    let o = run(&["factor", "--input", k.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "2 2\n2 0\n1 1.4142135623730951\n");

    let out = dir.path().join("l.txt");
    let o = run(&["factor", "--input", k.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let l = saddlechol::Matrix::parse_text(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(l[(1, 1)], 2f64.sqrt());
}

#[test]
fn factor_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let nonsym = write(dir.path(), "ns.txt", "1 1\n4 2\n3 -1\n");
    let o = run(&["factor", "--input", nonsym.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("not symmetric"));

    let not_pd = write(dir.path(), "np.txt", "1 1\n-1 0\n0 -1\n");
    let o = run(&["factor", "--input", not_pd.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("pivot 1"));

    let garbage = write(dir.path(), "g.txt", "1 1\n4 x\n2 -1\n");
    assert_eq!(code(&run(&["factor", "--input", garbage.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["factor", "--input", "/nonexistent/k.txt"])), 1);

    let out = dir.path().join("never.txt");
    run(&["factor", "--input", not_pd.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!out.exists());
}

#[test]
fn bounds_zero_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.txt", "2 1\n4 1 1\n1 3 0\n1 0 -1\n");
    let dk = write(dir.path(), "dk.txt", "3 3\n0 0 0\n0 0 0\n0 0 0\n");
    let o = run(&[
        "bounds", "--k", k.to_str().unwrap(), "--dk", dk.to_str().unwrap(), "--with-actual", "--with-w-bound",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    for key in ["b_3_3", "b_3_4", "b_3_11_coeff", "b_3_12", "b_3_13", "b_3_14", "b_3_15", "b_3_17", "actual_dl_fro"] {
        assert_eq!(v[key].as_f64(), Some(0.0), "{key}");
    }
    assert_eq!(v["cond_3_1_ok"], true);
}

#[test]
fn bounds_condition_failure_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.txt", "1 1\n4 2\n2 -1\n");
    let dk = write(dir.path(), "dk.txt", "2 2\n0.8 0\n0 0.8\n");
    let out = dir.path().join("r.json");
    let o = run(&[
        "bounds", "--k", k.to_str().unwrap(), "--dk", dk.to_str().unwrap(), "--with-actual", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["cond_3_1_ok"], false);
    assert!(v["b_3_3"].is_null() && v["b_3_4"].is_null());
    assert!(v["b_3_11_coeff"].as_f64().unwrap() > 0.0);
}

#[test]
fn bounds_with_w_and_actual_dominate() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.txt", "2 1\n4 1 1\n1 3 0\n1 0 -1\n");
    let dk = write(dir.path(), "dk.txt", "3 3\n1e-4 2e-4 0\n2e-4 0 -1e-4\n0 -1e-4 3e-4\n");
    let o = run(&[
        "bounds", "--k", k.to_str().unwrap(), "--dk", dk.to_str().unwrap(), "--with-actual", "--with-w-bound",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let actual = v["actual_dl_fro"].as_f64().unwrap();
    assert!(actual > 0.0);
    for key in ["b_3_3", "b_3_4", "b_3_12", "b_3_13", "b_3_14", "b_3_15", "b_3_17"] {
        assert!(v[key].as_f64().unwrap() >= actual, "{key}");
    }
    assert!(v["b_3_11_coeff"].as_f64().unwrap() <= v["b_3_3"].as_f64().unwrap());
}

#[test]
fn bounds_rejects_bad_perturbations() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.txt", "1 1\n4 2\n2 -1\n");
    let asym = write(dir.path(), "a.txt", "2 2\n0 1e-3\n0 0\n");
    let wrong = write(dir.path(), "w.txt", "1 1\n0\n");
    for dk in [&asym, &wrong] {
        let o = run(&["bounds", "--k", k.to_str().unwrap(), "--dk", dk.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn verify_is_deterministic_and_clean() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let p = dir.path().join(name);
        let o = run(&["verify", "--m", "4", "--n", "3", "--trials", "50", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let summary = stderr(&o);
        assert!(summary.contains("trials=50") && summary.contains("violations=0"), "{summary}");
        outputs.push(std::fs::read_to_string(&p).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let mut lines = outputs[0].lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,m,n,seed,dk_fro,linv2,cond31,b33,b33_label,b34,b311,cond312,b312,b313,b314,cond316,b315,cond318,b317,b317_label,actual_f,actual_2,worst_ratio,violation"
    );
    assert_eq!(lines.count(), 200);

    let other = run(&["verify", "--m", "4", "--n", "3", "--trials", "50", "--seed", "8"]);
    assert_ne!(String::from_utf8(other.stdout).unwrap(), outputs[0]);
}

#[test]
fn verify_json_format() {
    let o = run(&["verify", "--trials", "2", "--dk-levels", "0.01", "--with-w-bound", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert_eq!(arr[1]["trial"], 1);
    assert!(arr[0]["b315"].as_f64().is_some());
    assert_eq!(arr[0]["violation"], false);
}

#[test]
fn flag_validation_exits_one() {
    for args in [
        &["verify", "--dk-levels", "0.5"][..],
        &["verify", "--trials", "0"],
        &["verify", "--m", "2", "--n", "3"],
        &["verify", "--format", "xml"],
        &["backward", "--eps-convention", "median"],
        &["sweep", "--kind", "remark99"],
        &["sweep", "--gammas", "0"],
        &["nonsense"],
    ] {
        let o = run(args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn help_lists_defaults() {
    let o = run(&["verify", "--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for needle in [
        "--trials <TRIALS>",
        "[default: 100]",
        "[default: 20240917]",
        "[default: 1e-8,1e-4,0.1,0.4]",
        "[default: csv]",
        "--with-w-bound",
        "--out",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
    let text = String::from_utf8(run(&["backward", "--help"]).stdout).unwrap();
    assert!(text.contains("[default: max-safe]") && text.contains("[default: 0.000001]"));
    let text = String::from_utf8(run(&["sweep", "--help"]).stdout).unwrap();
    assert!(text.contains("[default: remark33]") && text.contains("[default: 10,100,1000]"));
}

#[test]
fn sweep_remark33_reports_slope() {
    let o = run(&["sweep", "--kind", "remark33", "--gammas", "10,100,1000"]);
    assert_eq!(code(&o), 0);
    let summary = stderr(&o);
    let slope: f64 = summary
        .split_whitespace()
        .find_map(|t| t.strip_prefix("winv2_sq_slope="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((3.6..=4.4).contains(&slope), "{summary}");
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn sweep_remark32_json() {
    let o = run(&["sweep", "--kind", "remark32", "--gammas", "1,0.001", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!(v[1]["kappa_ratio"].as_f64().unwrap() >= 100.0);
    assert_eq!(v[1]["b33_label"], "col-equilibrate-L");
}

#[test]
fn backward_campaign_is_clean() {
    let o = run(&["backward", "--m", "3", "--n", "3", "--trials", "20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("envelope_violations=0"));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",false")));
}

#[test]
fn unwritable_output_exits_one() {
    let o = run(&["verify", "--trials", "1", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(code(&o), 1);
}
