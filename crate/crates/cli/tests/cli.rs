mod support;

use std::path::Path;

use serde_json::Value;
use support::*;
use tempfile::tempdir;

fn report(dir: &Path) -> Value {
    read_json(&dir.join("report.json"))
}

#[test]
fn swap_router_on_coupling_graph_emits_only_swaps() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qaoa", 9, 1);
    let arch = lattice_arch(tmp.path(), 9);
    let out = tmp.path().join("pg");
    let run = compile(&circuit, &arch, "sabre-pg", 0, 2, &out);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r = report(&out);
    for kind in ["move", "split", "merge"] {
        assert_eq!(r["op_counts"][kind], 0);
    }
    assert_eq!(r["counters"]["apsp_computations"], 1);
    assert_eq!(replay(&out.join("artifact.json"), &circuit, &arch).code, 0);
}

#[test]
fn shuttle_router_on_coupling_graph_is_infeasible() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qft", 4, 0);
    let arch = lattice_arch(tmp.path(), 4);
    for router in ["shaw", "lightshaw"] {
        let run = compile(&circuit, &arch, router, 0, 2, &tmp.path().join(router));
        assert_eq!(run.code, 3, "{}", run.stderr);
        assert!(run.stderr.contains("infeasible: no multi-slot executable trap"), "{}", run.stderr);
    }
}

#[test]
fn shuttle_modes_write_identical_schedules() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qft", 16, 0);
    let (a, b) = (tmp.path().join("shaw"), tmp.path().join("light"));
    assert_eq!(compile(&circuit, "grid:2x2:5", "shaw", 4, 2, &a).code, 0);
    assert_eq!(compile(&circuit, "grid:2x2:5", "lightshaw", 4, 2, &b).code, 0);
    let bytes = |d: &Path| std::fs::read(d.join("artifact.json")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(diff(&a.join("artifact.json"), &b.join("artifact.json")).code, 0);
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(ra["op_counts"], rb["op_counts"]);
    assert_eq!(ra["operation_time_us"], rb["operation_time_us"]);
    assert_eq!(ra["circuit_sha256"], rb["circuit_sha256"]);
}

#[test]
fn swap_backends_diff_clean_on_qaoa_64() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qaoa", 64, 2);
    let arch = lattice_arch(tmp.path(), 64);
    let (a, b) = (tmp.path().join("cg"), tmp.path().join("pg"));
    assert_eq!(compile(&circuit, &arch, "sabre-cg", 3, 2, &a).code, 0);
    assert_eq!(compile(&circuit, &arch, "sabre-pg", 3, 2, &b).code, 0);
    assert_eq!(diff(&a.join("artifact.json"), &b.join("artifact.json")).code, 0);
    assert_eq!(
        report(&a)["counters"]["can_execute_calls"],
        report(&b)["counters"]["can_execute_calls"]
    );
}

#[test]
fn reports_are_deterministic_apart_from_wall_clock() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "tfim", 12, 0);
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = tmp.path().join(format!("run{i}"));
        assert_eq!(compile(&circuit, "grid:2x2:4", "lightshaw", 1, 2, &out).code, 0);
        let mut r = report(&out);
        r["wall_clock_s"] = Value::Null;
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
}

/// First movement op whose destination can be redirected onto an ion that has not moved yet.
fn corrupt(artifact: &mut Value) -> usize {
    let shuttle = &mut artifact["shuttle"];
    let initial: Vec<Value> = shuttle["initial_placement"]["positions"].as_array().unwrap().clone();
    let ops = shuttle["schedule"]["ops"].as_array_mut().unwrap();
    let mut moved = std::collections::BTreeSet::new();
    for (i, op) in ops.iter_mut().enumerate() {
        let ions: Vec<u64> = op["ions"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        if op["kind"] != "gate" {
            let still = (0..initial.len() as u64).find(|q| !moved.contains(q) && !ions.contains(q));
            if let (true, Some(q)) = (op["kind"] != "swap", still) {
                op["positions"][1] = initial[q as usize].clone();
                return i;
            }
        }
        moved.extend(ions);
    }
    panic!("no movement op to corrupt");
}

#[test]
fn replay_accepts_compiled_output_and_rejects_corruption() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qft", 8, 0);
    for router in ["shaw", "lightshaw"] {
        let out = tmp.path().join(router);
        assert_eq!(compile(&circuit, "grid:2x2:4", router, 0, 2, &out).code, 0);
        let artifact = out.join("artifact.json");
        assert_eq!(replay(&artifact, &circuit, "grid:2x2:4").code, 0);
        let mut value = read_json(&artifact);
        let index = corrupt(&mut value);
        let bad = out.join("corrupt.json");
        std::fs::write(&bad, serde_json::to_string(&value).unwrap()).unwrap();
        let run = replay(&bad, &circuit, "grid:2x2:4");
        assert_eq!(run.code, 1);
        assert!(run.stderr.contains(&format!("op {index}:")), "{}", run.stderr);
        assert_eq!(diff(&artifact, &bad).code, 1);
    }
}

#[test]
fn replay_rejects_the_wrong_architecture() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qft", 6, 0);
    let out = tmp.path().join("a");
    assert_eq!(compile(&circuit, "grid:2x2:4", "shaw", 0, 2, &out).code, 0);
    let run = replay(&out.join("artifact.json"), &circuit, "grid:2x2:5");
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("op 0:"), "{}", run.stderr);
}

#[test]
fn bad_inputs_exit_two() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qft", 4, 0);
    let out = tmp.path().join("x");
    for arch in ["grid:2x2", "ring:4", "grid:0x2:4", "coupling:@/nonexistent.json"] {
        let run = compile(&circuit, arch, "shaw", 0, 2, &out);
        assert_eq!(run.code, 2, "{arch}: {}", run.stderr);
        assert!(run.stderr.starts_with("error:"), "{}", run.stderr);
    }
    let broken = tmp.path().join("broken.qasm");
    std::fs::write(&broken, "OPENQASM 2.0;\nqreg q[2];\ncx q[0],q[7];\n").unwrap();
    assert_eq!(compile(&broken, "grid:2x2:4", "shaw", 0, 2, &out).code, 2);
    assert_eq!(compile(&circuit, "grid:2x2:4", "sabre-pg", 0, 2, &out).code, 2);
    assert_eq!(posgraph(["compile", "--router", "nope"]).code, 2);
    let durations = tmp.path().join("d.json");
    std::fs::write(&durations, r#"{"move":0,"split":1,"merge":1,"swap":1,"one_qudit_gate":1,"two_qudit_gate":1}"#).unwrap();
    let run = posgraph([
        "compile", "--circuit", circuit.to_str().unwrap(), "--arch", "grid:2x2:4", "--router", "shaw",
        "--durations", &format!("@{}", durations.display()), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 2, "{}", run.stderr);
}

#[test]
fn durations_file_sets_operation_time() {
    let tmp = tempdir().unwrap();
    let circuit = tmp.path().join("one.qasm");
    std::fs::write(&circuit, "OPENQASM 2.0;\nqreg q[2];\ncx q[0],q[1];\n").unwrap();
    let durations = tmp.path().join("d.json");
    let text = r#"{"move":1,"split":2,"merge":3,"swap":4,"one_qudit_gate":5,"two_qudit_gate":250}"#;
    std::fs::write(&durations, text).unwrap();
    check_schema("durations", &serde_json::from_str(text).unwrap()).unwrap();
    let out = tmp.path().join("o");
    let run = posgraph([
        "compile", "--circuit", circuit.to_str().unwrap(), "--arch", "grid:1x1:2", "--router", "lightshaw",
        "--durations", &format!("@{}", durations.display()), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(report(&out)["operation_time_us"], 250.0);
}

#[test]
fn emitted_json_matches_the_schemas() {
    let tmp = tempdir().unwrap();
    let circuit = gen(tmp.path(), "qaoa", 9, 0);
    let lattice = lattice_arch(tmp.path(), 9);
    for (router, arch) in [("sabre-cg", lattice.as_str()), ("sabre-pg", lattice.as_str()), ("shaw", "grid:2x2:4"), ("lightshaw", "grid:2x2:4")] {
        let out = tmp.path().join(router);
        assert_eq!(compile(&circuit, arch, router, 0, 2, &out).code, 0);
        check_schema("artifact", &read_json(&out.join("artifact.json"))).unwrap();
        check_schema("run_report", &report(&out)).unwrap();
    }
}

#[test]
fn gen_writes_parsable_qasm() {
    let run = posgraph(["gen", "--family", "tfxy", "--qudits", "5"]);
    assert_eq!(run.code, 0);
    let dag = posgraph::circuit::parse_qasm(&run.stdout).unwrap();
    assert_eq!(dag.num_qudits(), 5);
    assert_eq!(posgraph(["gen", "--family", "ghz", "--qudits", "5"]).code, 2);
}

#[test]
fn bench_marks_failures_and_fits_sizes() {
    let tmp = tempdir().unwrap();
    let manifest = tmp.path().join("manifest.json");
    let text = r#"{
        "circuits": [{"family": "qft", "qudits": 8}, {"qasm": "missing.qasm"}],
        "architectures": ["grid:2x2:4", "grid:2x3:4", "grid:1x1:2"],
        "routers": ["shaw", "lightshaw"],
        "seeds": [0],
        "repetitions": 2
    }"#;
    std::fs::write(&manifest, text).unwrap();
    check_schema("bench_manifest", &serde_json::from_str(text).unwrap()).unwrap();
    let out = tmp.path().join("bench");
    let run = posgraph(["bench", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let summary = read_json(&out.join("bench.json"));
    check_schema("bench_summary", &summary).unwrap();
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2 * 3 * 2);
    let failed = rows.iter().filter(|r| r["failures"] != 0).count();
    // The missing file fails everywhere; qft_8 does not fit on one two-slot trap.
    assert_eq!(failed, 2 * 3 + 2);
    for r in rows.iter().filter(|r| r["failures"] != 0) {
        assert!(r["status"].as_str().unwrap().starts_with("failed"));
    }
    let fits = summary["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 2);
    assert!(fits.iter().all(|f| f["sizes"] == 2));
    let runs: Vec<_> = std::fs::read_dir(out.join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 2 * 3 * 2 * 2);
    for entry in runs {
        let record = read_json(&entry.unwrap().path());
        check_schema("run_record", &record).unwrap();
        if let Some(r) = record.get("report") {
            check_schema("run_report", r).unwrap();
        }
    }
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    assert!(csv.starts_with("router,circuit,arch,total_capacity"));
}

#[test]
fn bench_with_one_run_omits_the_fit() {
    let tmp = tempdir().unwrap();
    let manifest = tmp.path().join("m.json");
    std::fs::write(
        &manifest,
        r#"{"circuits":[{"family":"qaoa","qudits":6,"seed":3}],"architectures":["grid:2x2:4"],"routers":["lightshaw"]}"#,
    )
    .unwrap();
    let out = tmp.path().join("b");
    assert_eq!(posgraph(["bench", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()]).code, 0);
    let summary = read_json(&out.join("bench.json"));
    assert_eq!(summary["rows"].as_array().unwrap().len(), 1);
    assert!(summary["fits"].as_array().unwrap().is_empty());
    assert_eq!(std::fs::read_to_string(out.join("fits.csv")).unwrap(), "");
}
