mod common;

use common::{random_circuit, CorpusOptions};
use proptest::prelude::*;
use qwb_core::analysis::{esp, from_provenance};
use qwb_core::circuit::Circuit;
use qwb_core::machine::testing::linear_snapshot;
use qwb_core::machine::CalibrationSnapshot;
use qwb_core::sim::{probabilities, run, RunConfig};
use qwb_core::transpile::{transpile, TranspileOptions};

fn snapshot() -> CalibrationSnapshot {
    linear_snapshot(5, 35.5, 320.0, 4e-4, 1.1e-2)
}

fn unmeasured(seed: u64) -> Circuit {
    random_circuit(
        seed,
        &CorpusOptions {
            measure: false,
            ..CorpusOptions::default()
        },
    )
}

fn physical(c: &Circuit, level: u8) -> Circuit {
    transpile(c, &snapshot(), &TranspileOptions::level(level, 1)).unwrap().physical
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn esp_is_multiplicative_over_concatenation(a in 0u64..10_000, b in 0u64..10_000) {
        let snap = snapshot();
        let mut pa = physical(&unmeasured(a), 0);
        pa.num_qubits = 5;
        let pb = physical(&random_circuit(b, &CorpusOptions::default()), 0);
        let joined = Circuit::concat(&pa, &pb);
        let whole = esp(&joined, &snap).unwrap().total;
        let parts = esp(&pa, &snap).unwrap().total_without_readout * esp(&pb, &snap).unwrap().total;
        prop_assert!((whole - parts).abs() <= 1e-12, "{whole} vs {parts}");
    }

    #[test]
    fn extra_gate_lowers_esp(seed in 0u64..10_000, q in 0usize..5) {
        let snap = snapshot();
        let p = physical(&unmeasured(seed), 1);
        let mut longer = p.clone();
        longer.num_qubits = 5;
        longer.sx(q);
        let before = esp(&p, &snap).unwrap().total;
        let after = esp(&longer, &snap).unwrap().total;
        prop_assert!(after < before);
        prop_assert!((after - before * (1.0 - 4e-4)).abs() <= 1e-12);
    }

    #[test]
    fn provenance_partitions_every_level(seed in 0u64..10_000, level in 0u8..=2) {
        let c = random_circuit(seed, &CorpusOptions::default());
        let r = transpile(&c, &snapshot(), &TranspileOptions::level(level, seed)).unwrap();
        let m = from_provenance(&c, &r.physical, &r.provenance).unwrap();
        prop_assert!(m.is_partition(r.physical.len()));
        prop_assert_eq!(r.provenance.len(), r.physical.len());
    }

    #[test]
    fn ideal_sampling_is_seeded_and_conserves_shots(seed in 0u64..10_000, shots in 1u64..3000) {
        let c = random_circuit(seed, &CorpusOptions::default());
        let a = run(&c, &RunConfig::ideal(shots, seed)).unwrap();
        prop_assert_eq!(a.shots(), shots);
        prop_assert_eq!(a, run(&c, &RunConfig::ideal(shots, seed)).unwrap());
    }

    #[test]
    fn calibrated_sampling_conserves_shots(seed in 0u64..10_000) {
        let c = physical(&random_circuit(seed, &CorpusOptions::default()), 1);
        let counts = run(&c, &RunConfig::calibrated(500, seed, snapshot())).unwrap();
        prop_assert_eq!(counts.shots(), 500);
    }

    #[test]
    fn probabilities_sum_to_one(seed in 0u64..10_000) {
        let p = probabilities(&unmeasured(seed)).unwrap();
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }
}
