//! The `qwb` binary end to end, stages joined by pipes.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use qwb_core::jobdata::retrieve_bundle;
use qwb_core::machine::{builtin_registry, load_query, run_query};
use qwb_core::sim::Counts;
use qwb_service::pipeline::PipelineDoc;
use qwb_service::store::JobStore;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qwb(args: &[&str], stdin: &str) -> Output {
    qwb_env(args, stdin, None)
}

fn qwb_env(args: &[&str], stdin: &str, data_dir: Option<&Path>) -> Output {
    qwb_in(args, stdin, data_dir, None)
}

fn qwb_in(args: &[&str], stdin: &str, data_dir: Option<&Path>, cwd: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qwb"));
    if let Some(dir) = cwd {
        cmd.current_dir(dir);
    }
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    match data_dir {
        Some(d) => cmd.env("QWB_DATA_DIR", d),
        None => cmd.env_remove("QWB_DATA_DIR"),
    };
    let mut child = cmd.spawn().unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Output {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn ok(args: &[&str], stdin: &str) -> String {
    let out = qwb(args, stdin);
    assert_eq!(out.code, 0, "qwb {args:?}: {}", out.stderr);
    out.stdout
}

#[test]
fn shor_pipeline_exports_and_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("shor.qjob");
    let job = job.to_str().unwrap();

    let built = ok(&["build", "--problem", "shor", "--base", "7", "--mod", "15"], "");
    // Twelve qubits do not fit a five-qubit machine.
    let small = qwb(&["transpile", "--machine", "vigo-like", "--level", "1"], &built);
    assert_eq!(small.code, 1);
    assert!(small.stderr.contains("12 qubits"), "{}", small.stderr);
    let transpiled = ok(&["transpile", "--machine", "guadalupe-like", "--level", "1"], &built);
    let ran = ok(&["run", "--shots", "4096", "--seed", "3"], &transpiled);
    let written = ok(
        &[
            "export",
            "--out",
            job,
            "--job-id",
            "00000000-0000-0000-0000-000000000007",
            "--created-at",
            "2026-01-01T00:00:00Z",
        ],
        &ran,
    );
    assert_eq!(written.trim(), job);
    let default_out = qwb_in(&["export"], &ran, None, Some(dir.path()));
    assert_eq!(default_out.code, 0, "{}", default_out.stderr);
    let name = default_out.stdout.trim();
    assert!(name.ends_with(".qjob"), "{name}");
    assert!(dir.path().join(name).is_file());

    let bundle = retrieve_bundle(Path::new(job)).unwrap();
    let doc: PipelineDoc = serde_json::from_str(&ran).unwrap();
    assert_eq!(Some(&bundle.counts), doc.counts.as_ref());
    assert_eq!(bundle.machine_name, "guadalupe-like");

    assert_eq!(ok(&["decode", "factors", "--bundle", job], ""), "r=4 factors=3,5\n");
    // The pipeline document decodes the same way as the bundle.
    assert_eq!(ok(&["decode", "factors"], &ran), "r=4 factors=3,5\n");

    let rerun = ok(&["rerun", "--bundle", job, "--check"], "");
    let counts: Counts = serde_json::from_str(&rerun).unwrap();
    assert_eq!(counts, bundle.counts);
    let changed = qwb(&["rerun", "--bundle", job, "--seed", "99", "--check"], "");
    assert_eq!(changed.code, 1, "a different seed gives different counts");

    let data = tempfile::tempdir().unwrap();
    let imported = ok(&["import", job, "--data-dir", data.path().to_str().unwrap()], "");
    assert_eq!(imported.trim(), "00000000-0000-0000-0000-000000000007");
    let store = JobStore::open(data.path().join("jobs")).unwrap();
    assert_eq!(*store.get(bundle.job_id).unwrap(), bundle);
}

#[test]
fn calibrated_bell_pipeline_with_analysis() {
    let built = ok(&["build", "--problem", "bell"], "");
    let t = ok(&["transpile", "--machine", "vigo-like", "--level", "1", "--seed", "2"], &built);
    let ran = ok(&["run", "--shots", "2000", "--seed", "5", "--noise", "calibrated"], &t);
    let with_esp = ok(&["esp", "--attach"], &ran);
    let with_hea = ok(&["hea", "--attach", "--trials", "200"], &with_esp);
    let doc: PipelineDoc = serde_json::from_str(&with_hea).unwrap();
    let esp = doc.esp.as_ref().unwrap();
    assert!(esp.total > 0.5 && esp.total < 1.0, "{}", esp.total);
    assert_eq!(doc.hea.as_ref().unwrap().trials, 200);
    assert_eq!(doc.counts.as_ref().unwrap().shots(), 2000);

    let matched: serde_json::Value = serde_json::from_str(&ok(&["match"], &t)).unwrap();
    assert_eq!(matched["method"], "provenance");

    let table = ok(&["decode", "truthtable", "--inputs", "0", "--outputs", "1"], &ran);
    assert!(table.starts_with("input\toutput\tcount\n"), "{table}");
    let integer = ok(&["decode", "integer"], &ran);
    assert!(integer.lines().nth(1).unwrap().starts_with("0\t00\t"), "{integer}");

    let rows = ok(&["compare", "--machine", "vigo-like"], &built);
    assert_eq!(rows.lines().count(), 5, "{rows}");
    let qasm = ok(&["transpile", "--machine", "vigo-like", "--qasm"], &built);
    assert!(qasm.starts_with("OPENQASM 2.0;"));
    let verified = ok(&["verify"], &qasm);
    assert!(!verified.is_empty());
}

#[test]
fn image_decode_uses_the_problem_dimensions() {
    let built = ok(
        &["build", "--problem", "image", "--width", "2", "--height", "2", "--pixels", "1,2,3,4"],
        "",
    );
    let ran = ok(&["run", "--shots", "8000", "--seed", "1"], &built);
    let image = ok(&["decode", "image", "--json"], &ran);
    let v: serde_json::Value = serde_json::from_str(&image).unwrap();
    let pixels: Vec<f64> = serde_json::from_value(v["pixels"].clone()).unwrap();
    for (got, want) in pixels.iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert!((got - want).abs() < 0.3, "{pixels:?}");
    }
}

#[test]
fn machine_query_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("q.toml");
    let text = "format = \"qwb-query/1\"\nmachines = [\"vigo-like\", \"athens-like\"]\nproperties = [\"qubit.t1\", \"gate.cx.error\"]\naggregation = \"mean\"\n";
    std::fs::write(&file, text).unwrap();
    let expect = run_query(&load_query(text).unwrap(), &builtin_registry()).unwrap().to_tsv();
    assert_eq!(ok(&["machine", "query", "--file", file.to_str().unwrap()], ""), expect);

    let flags = ok(
        &["machine", "query", "--machines", "vigo-like,athens-like", "--select", "qubit.t1,gate.cx.error", "--agg", "mean"],
        "",
    );
    assert_eq!(flags, expect);

    let series = ok(&["machine", "series", "lima-like", "--selector", "qubit.t1"], "");
    assert!(series.starts_with("index\tat\tvalue\n"));
    let show: serde_json::Value = serde_json::from_str(&ok(&["machine", "show", "lima-like"], "")).unwrap();
    assert_eq!(show["summary"]["name"], "lima-like");
}

#[test]
fn data_dir_machines_are_loaded() {
    let data = tempfile::tempdir().unwrap();
    let machines = data.path().join("machines");
    std::fs::create_dir(&machines).unwrap();
    let mut record = builtin_registry().get("lima-like").unwrap().clone();
    record.name = "lab-5q".into();
    std::fs::write(machines.join("lab-5q.json"), record.to_json()).unwrap();

    let out = qwb_env(&["machine", "list"], "", Some(data.path()));
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.lines().any(|l| l.starts_with("lab-5q\t5\t")), "{}", out.stdout);
    let explicit = ok(&["machine", "list", "--machines-dir", machines.to_str().unwrap()], "");
    assert!(explicit.contains("lab-5q\t"));
}

#[test]
fn exit_codes_separate_user_and_internal_errors() {
    let bad_qasm = qwb(&["verify"], "OPENQASM 2.0;\nqreg q[1];\nbogus q[0];\n");
    assert_eq!(bad_qasm.code, 1);
    assert!(bad_qasm.stderr.starts_with("error: "), "{}", bad_qasm.stderr);
    assert_eq!(qwb(&["frobnicate"], "").code, 1);
    assert_eq!(qwb(&["transpile"], "").code, 1, "missing --machine");
    assert_eq!(qwb(&["machine", "show", "nowhere"], "").code, 1);
    assert_eq!(qwb(&["export"], &ok(&["build", "--problem", "bell"], "")).code, 1);
    assert_eq!(qwb(&["run"], "{\"format\": \"other/9\"}").code, 1);
    assert_eq!(qwb(&["--version"], "").code, 0);

    // An unwritable output path is an internal (I/O) failure.
    let built = ok(&["build", "--problem", "bell"], "");
    let t = ok(&["transpile", "--machine", "vigo-like"], &built);
    let ran = ok(&["run", "--shots", "10"], &t);
    let io = qwb(&["export", "--out", "/nonexistent-dir/sub/job.qjob"], &ran);
    assert_eq!(io.code, 2, "{}", io.stderr);
}
