//! Fabricated fixture machines shipped with the engine. Values sit in
//! realistic ranges but describe no real device.

use super::{MachineRecord, MachineRegistry};

/// `(name, machine file)` for every built-in fixture.
pub const BUILTIN_MACHINES: &[(&str, &str)] = &[
    ("athens-like", include_str!("../../fixtures/athens-like.json")),
    ("belem-like", include_str!("../../fixtures/belem-like.json")),
    ("bogota-like", include_str!("../../fixtures/bogota-like.json")),
    ("guadalupe-like", include_str!("../../fixtures/guadalupe-like.json")),
    ("lima-like", include_str!("../../fixtures/lima-like.json")),
    ("vigo-like", include_str!("../../fixtures/vigo-like.json")),
];

pub fn builtin_registry() -> MachineRegistry {
    let mut reg = MachineRegistry::new();
    for (name, text) in BUILTIN_MACHINES {
        let record = MachineRecord::from_json(text).unwrap_or_else(|e| panic!("fixture {name} is invalid: {e}"));
        reg.insert(record);
    }
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load_and_validate() {
        let reg = builtin_registry();
        assert_eq!(reg.len(), 6);
        for m in reg.iter() {
            assert_eq!(m.snapshots.len(), 3, "{}", m.name);
            m.validate().unwrap();
        }
        let five: Vec<_> = reg.iter().filter(|m| m.coupling.num_qubits() == 5).collect();
        assert_eq!(five.len(), 5);
    }

    #[test]
    fn vigo_is_t_shaped_and_bogota_linear() {
        let reg = builtin_registry();
        let vigo = reg.get("vigo-like").unwrap();
        assert_eq!(vigo.coupling.degree(1), 3);
        let bogota = reg.get("bogota-like").unwrap();
        assert!((0..5).all(|q| bogota.coupling.degree(q) <= 2));
    }

    #[test]
    fn belem_has_a_defaulted_t2() {
        let reg = builtin_registry();
        let q = &reg.get("belem-like").unwrap().snapshots[0].qubits[4];
        assert!(q.t2_defaulted);
        assert_eq!(q.t2, q.t1);
    }

    #[test]
    fn fixture_values_read_back_verbatim() {
        // gate.cx.error on edge (0,1), straight from the fixture text
        let raw: serde_json::Value = serde_json::from_str(BUILTIN_MACHINES[5].1).unwrap();
        let expected: Vec<f64> = raw["snapshots"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| {
                s["gates"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .find(|g| g["gate"] == "cx" && g["qubits"] == serde_json::json!([0, 1]))
                    .unwrap()["error"]
                    .as_f64()
                    .unwrap()
            })
            .collect();
        let reg = builtin_registry();
        let series = super::super::property_series(
            reg.get("vigo-like").unwrap(),
            "gate.cx.error".parse().unwrap(),
            &super::super::TimeRange::all(),
        );
        let edge = series
            .iter()
            .find(|s| s.index == super::super::PropIndex::Gate(vec![0, 1]))
            .unwrap();
        let got: Vec<f64> = edge.points.iter().map(|p| p.value).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn calibration_file_round_trip_is_lossless() {
        for (_, text) in BUILTIN_MACHINES {
            let m = MachineRecord::from_json(text).unwrap();
            assert_eq!(MachineRecord::from_json(&m.to_json()).unwrap(), m);
        }
    }
}
