use std::path::Path;
use std::process::{Command, Output};

fn oblmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oblmp"))
        .args(args)
        .env_remove("OBLMP_N_SIGNALS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is json")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Unit-vector dictionary, background along (1,1,0), and `f = (3,1,4)`.
fn trace_files(dir: &Path) -> (String, String, String) {
    (
        write(dir, "f.csv", "f\n3\n1\n4\n"),
        write(dir, "d.csv", "a0,a1,a2\n1,0,0\n0,1,0\n0,0,1\n"),
        write(dir, "b.csv", "b0\n1\n1\n0\n"),
    )
}

#[test]
fn separate_reproduces_the_three_dimensional_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (f, d, b) = trace_files(dir.path());
    let o = oblmp(&["separate", "--signal", &f, "--dict", &d, "--background", &b]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["selected_indices"], serde_json::json!([2, 0]));
    let c: Vec<f64> = serde_json::from_value(v["coeffs"].clone()).unwrap();
    assert!((c[0] - 4.0).abs() < 1e-12 && (c[1] - 2.0).abs() < 1e-12);
}

#[test]
fn background_only_signal_selects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (_, d, b) = trace_files(dir.path());
    let f = write(dir.path(), "g.csv", "f\n2.5\n2.5\n0\n");
    let out = dir.path().join("r.json");
    let o = oblmp(&[
        "separate", "--signal", &f, "--dict", &d, "--background", &b, "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["selected_indices"], serde_json::json!([]));
    let reason = v["stop_reason"].to_string().to_lowercase().replace('_', "");
    assert!(reason.contains("tolerancereached"), "{reason}");
}

#[test]
fn mismatched_rows_are_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, d, _) = trace_files(dir.path());
    let f = write(dir.path(), "g.csv", "f\n1\n2\n");
    let o = oblmp(&["separate", "--signal", &f, "--dict", &d]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));
}

#[test]
fn unparsable_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let (_, d, _) = trace_files(dir.path());
    let f = write(dir.path(), "g.csv", "f\n1\nabc\n4\n");
    let o = oblmp(&["separate", "--signal", &f, "--dict", &d]);
    assert_eq!(code(&o), 2);
    let missing = oblmp(&["separate", "--signal", "/nonexistent/f.csv", "--dict", &d]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn dictionary_without_atoms_exits_with_code_6() {
    let dir = tempfile::tempdir().unwrap();
    let (f, _, _) = trace_files(dir.path());
    let d = write(dir.path(), "e.csv", "x\n0\n0.5\n1\n");
    let o = oblmp(&["separate", "--signal", &f, "--dict", &d]);
    assert_eq!(code(&o), 6, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_code_1() {
    assert_eq!(code(&oblmp(&["separate"])), 1);
    assert_eq!(code(&oblmp(&["experiment", "--test", "3"])), 1);
    assert_eq!(code(&oblmp(&["verify", "--scale", "0"])), 1);
    assert_eq!(code(&oblmp(&["--help"])), 0);
}

fn table_shape(text: &str) -> (Vec<String>, usize, Vec<String>) {
    let meta: Vec<String> = text.lines().filter(|l| l.starts_with('#')).map(String::from).collect();
    let mut body = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = body.next().unwrap().split(',').map(String::from).collect();
    (header, body.count(), meta)
}

#[test]
fn dict_gen_writes_the_standard_families() {
    for (kind, atoms) in [("bspline", 65), ("background", 50), ("bspline2x", 69)] {
        let o = oblmp(&["dict-gen", "--kind", kind]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let (header, rows, meta) = table_shape(&String::from_utf8(o.stdout).unwrap());
        assert_eq!(header[0], "x");
        assert_eq!(header.len() - 1, atoms, "{kind}");
        assert_eq!(rows, 2049);
        assert!(meta.iter().any(|m| m == &format!("# columns={atoms}")), "{meta:?}");
    }
    let o = oblmp(&["dict-gen", "--kind", "bspline2x"]);
    let (_, _, meta) = table_shape(&String::from_utf8(o.stdout).unwrap());
    assert!(meta.iter().any(|m| m == "# support_scale=2"), "{meta:?}");
}

#[test]
fn verify_passes_and_detects_an_injected_fault() {
    let ok = oblmp(&["verify", "--seed", "3", "--scale", "0.1"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let again = oblmp(&["verify", "--seed", "3", "--scale", "0.1"]);
    assert_eq!(ok.stdout, again.stdout);

    let bad = oblmp(&["verify", "--seed", "3", "--scale", "0.1", "--inject-fault", "flip-dual-sign"]);
    assert_eq!(code(&bad), 4);
    let all = format!("{}{}", String::from_utf8_lossy(&bad.stdout), stderr(&bad));
    assert!(all.contains("biorthogonality"), "{all}");
    assert!(all.contains("seed"), "{all}");
}

#[test]
fn experiment_writes_report_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let plots = dir.path().join("plots");
    std::fs::create_dir(&plots).unwrap();
    let o = oblmp(&[
        "experiment", "--test", "1", "--n-signals", "3", "--seed", "5", "--plot-data",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["n_signals"], 3);
    assert_eq!(v["records"].as_array().unwrap().len(), 3);
    let mut files: Vec<_> = std::fs::read_dir(&plots).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 3);
    let (header, rows, _) = table_shape(&std::fs::read_to_string(&files[0]).unwrap());
    assert_eq!(header, ["x", "mixture", "truth", "oblmp", "baseline"]);
    assert_eq!(rows, 2049);
}

#[test]
fn environment_overrides_flags_defaults() {
    let o = Command::new(env!("CARGO_BIN_EXE_oblmp"))
        .args(["experiment", "--test", "1", "--no-baseline"])
        .env("OBLMP_N_SIGNALS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["n_signals"], 2);
}
