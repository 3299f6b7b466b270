mod common;

use common::{corpus, fuzz_parser, random_circuit, CorpusOptions, FuzzSummary};
use proptest::prelude::*;
use qwb_core::circuit::Circuit;
use qwb_core::problems::{build, ProblemSpec};
use qwb_core::qasm::{emit_qasm, parse_qasm};

fn qasm_opts() -> CorpusOptions {
    CorpusOptions {
        max_qubits: 6,
        max_gates: 30,
        mcx: false,
        ..CorpusOptions::default()
    }
}

fn kit_circuits() -> Vec<Circuit> {
    let specs = [
        ProblemSpec::bell(),
        ProblemSpec::ghz(5),
        ProblemSpec::qft(4),
        ProblemSpec::shor(7, 15),
        ProblemSpec::shor(2, 15),
        ProblemSpec::shor(2, 5),
        ProblemSpec::truth_table(3, 2, ["00", "01", "11", "10", "10", "00", "01", "11"].map(String::from).to_vec()),
        ProblemSpec::image(4, 4, (0..16).map(|i| (i % 5) as f64).collect()),
    ];
    specs.iter().map(|s| build(s).unwrap().circuit).collect()
}

fn assert_round_trip(c: &Circuit) {
    let text = emit_qasm(c).unwrap();
    let back = parse_qasm(&text).unwrap();
    assert!(back.same_structure(c), "structure changed for {}", c.name);
    assert_eq!(emit_qasm(&back).unwrap(), text);
}

#[test]
fn corpus_and_kits_round_trip() {
    for c in corpus(300, 1_000, &qasm_opts()).iter().chain(&kit_circuits()) {
        assert_round_trip(c);
    }
}

proptest! {
    #[test]
    fn random_circuits_round_trip(seed in any::<u64>()) {
        let c = random_circuit(seed, &qasm_opts());
        let text = emit_qasm(&c).unwrap();
        let back = parse_qasm(&text).unwrap();
        prop_assert!(back.same_structure(&c));
        prop_assert_eq!(emit_qasm(&back).unwrap(), text);
    }
}

#[test]
fn parser_survives_byte_fuzz() {
    let seeds: Vec<String> = kit_circuits()
        .iter()
        .chain(&corpus(20, 77, &qasm_opts()))
        .map(|c| emit_qasm(c).unwrap())
        .collect();
    let FuzzSummary { ok, err, crashes } = fuzz_parser(&seeds, 10_000, 0xf022);
    assert!(crashes.is_empty(), "{} crashes, first: {:?}", crashes.len(), crashes.first());
    assert_eq!(ok + err, 10_000);
    assert!(err > 0 && ok > 0);
}
