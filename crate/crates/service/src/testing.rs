//! Fixture jobs shared by unit and integration tests.

use chrono::{DateTime, Utc};
use qwb_core::jobdata::{JobBundle, JobParts};
use qwb_core::machine::builtin_registry;
use qwb_core::problems::{build, ProblemSpec};
use qwb_core::sim::{run, RunConfig};
use qwb_core::transpile::{transpile, TranspileOptions};
use uuid::Uuid;

pub fn fixed_time() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2026-01-01T00:00:00Z").unwrap().with_timezone(&Utc)
}

/// Calibrated 1024-shot Bell job on `vigo-like` with job id `seed + 1`.
pub fn bell_bundle(seed: u64) -> JobBundle {
    let built = build(&ProblemSpec::bell()).unwrap();
    let snap = builtin_registry().get("vigo-like").unwrap().latest().unwrap().clone();
    let t = transpile(&built.circuit, &snap, &TranspileOptions::level(1, seed)).unwrap();
    let config = RunConfig::calibrated(1024, seed, snap.clone());
    let counts = run(&t.physical, &config).unwrap();
    JobBundle::from_parts(JobParts {
        job_id: Some(Uuid::from_u128(u128::from(seed) + 1)),
        created_at: Some(fixed_time()),
        problem: Some(&built),
        logical: &built.circuit,
        transpiled: &t,
        snapshot: &snap,
        run: &config,
        counts,
        esp: None,
        hea: None,
    })
    .unwrap()
}
