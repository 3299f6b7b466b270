use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{MachineError, MachineRecord, MachineRegistry};
use crate::circuit::GateKind;

pub const QUERY_FORMAT: &str = "qwb-query/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QubitField {
    T1,
    T2,
    Frequency,
    ReadoutError,
    ReadoutDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateField {
    Error,
    Duration,
}

/// Property selector from the closed grammar
/// `qubit.{t1,t2,frequency,readout_error,readout_duration}` or
/// `gate.<gate>.{error,duration}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Selector {
    Qubit(QubitField),
    Gate(GateKind, GateField),
}

impl Selector {
    pub const GRAMMAR: &'static str = "qubit.{t1|t2|frequency|readout_error|readout_duration} | gate.<gate>.{error|duration}";
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Qubit(field) => {
                let name = match field {
                    QubitField::T1 => "t1",
                    QubitField::T2 => "t2",
                    QubitField::Frequency => "frequency",
                    QubitField::ReadoutError => "readout_error",
                    QubitField::ReadoutDuration => "readout_duration",
                };
                write!(f, "qubit.{name}")
            }
            Selector::Gate(kind, field) => {
                let name = match field {
                    GateField::Error => "error",
                    GateField::Duration => "duration",
                };
                write!(f, "gate.{kind}.{name}")
            }
        }
    }
}

impl FromStr for Selector {
    type Err = MachineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || MachineError::UnknownSelector {
            selector: s.to_string(),
            grammar: Selector::GRAMMAR.to_string(),
        };
        let parts: Vec<&str> = s.trim().split('.').collect();
        match parts.as_slice() {
            ["qubit", field] => Ok(Selector::Qubit(match *field {
                "t1" => QubitField::T1,
                "t2" => QubitField::T2,
                "frequency" => QubitField::Frequency,
                "readout_error" => QubitField::ReadoutError,
                "readout_duration" => QubitField::ReadoutDuration,
                _ => return Err(unknown()),
            })),
            ["gate", gate, field] => {
                let kind = GateKind::from_name(gate)
                    .filter(|k| k.is_unitary())
                    .ok_or_else(unknown)?;
                let field = match *field {
                    "error" => GateField::Error,
                    "duration" => GateField::Duration,
                    _ => return Err(unknown()),
                };
                Ok(Selector::Gate(kind, field))
            }
            _ => Err(unknown()),
        }
    }
}

impl TryFrom<String> for Selector {
    type Error = MachineError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Selector> for String {
    fn from(s: Selector) -> Self {
        s.to_string()
    }
}

/// Inclusive time window; open ends are unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<DateTime<Utc>>,
}

impl TimeRange {
    pub fn all() -> Self {
        TimeRange::default()
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.from.is_none_or(|f| t >= f) && self.to.is_none_or(|e| t <= e)
    }

    pub fn is_unbounded(&self) -> bool {
        self.from.is_none() && self.to.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropIndex {
    Qubit(usize),
    Gate(Vec<usize>),
}

impl fmt::Display for PropIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropIndex::Qubit(q) => write!(f, "q{q}"),
            PropIndex::Gate(qs) => {
                let parts: Vec<String> = qs.iter().map(|q| q.to_string()).collect();
                write!(f, "{}", parts.join("-"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub taken_at: DateTime<Utc>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub selector: Selector,
    pub index: PropIndex,
    pub points: Vec<SeriesPoint>,
}

/// One series per qubit (qubit selectors) or per calibrated operand tuple
/// (gate selectors), with one point per snapshot inside `range`.
pub fn property_series(machine: &MachineRecord, selector: Selector, range: &TimeRange) -> Vec<Series> {
    let indices: Vec<PropIndex> = match selector {
        Selector::Qubit(_) => (0..machine.coupling.num_qubits()).map(PropIndex::Qubit).collect(),
        Selector::Gate(kind, _) => {
            let mut idx: Vec<PropIndex> = machine
                .snapshots
                .iter()
                .flat_map(|s| s.gates.keys())
                .filter(|k| k.gate == kind.name())
                .map(|k| PropIndex::Gate(k.qubits.clone()))
                .collect();
            idx.sort();
            idx.dedup();
            idx
        }
    };
    indices
        .into_iter()
        .map(|index| {
            let points = machine
                .snapshots
                .iter()
                .filter(|s| range.contains(s.taken_at))
                .filter_map(|s| {
                    let value = match (&selector, &index) {
                        (Selector::Qubit(field), PropIndex::Qubit(q)) => {
                            let p = s.qubit(*q)?;
                            match field {
                                QubitField::T1 => p.t1,
                                QubitField::T2 => p.t2,
                                QubitField::Frequency => p.frequency,
                                QubitField::ReadoutError => p.readout_error,
                                QubitField::ReadoutDuration => p.readout_duration,
                            }
                        }
                        (Selector::Gate(kind, field), PropIndex::Gate(qs)) => {
                            let p = s.gate_props(kind.name(), qs)?;
                            match field {
                                GateField::Error => p.error,
                                GateField::Duration => p.duration,
                            }
                        }
                        _ => return None,
                    };
                    Some(SeriesPoint {
                        taken_at: s.taken_at,
                        value,
                    })
                })
                .collect();
            Series {
                selector,
                index,
                points,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    None,
    Min,
    Max,
    Mean,
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Aggregation::None),
            "min" => Ok(Aggregation::Min),
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            other => Err(format!("unknown aggregation `{other}` (none|min|max|mean)")),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::None => "none",
            Aggregation::Min => "min",
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
        })
    }
}

/// Declarative, machine-independent property extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyQuery {
    pub machines: Vec<String>,
    pub properties: Vec<Selector>,
    #[serde(default)]
    pub time_range: TimeRange,
    #[serde(default)]
    pub aggregation: Aggregation,
}

fn fmt_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

impl PropertyQuery {
    /// The same query re-targeted at other machines.
    pub fn for_machines(&self, machines: &[&str]) -> PropertyQuery {
        PropertyQuery {
            machines: machines.iter().map(|s| s.to_string()).collect(),
            ..self.clone()
        }
    }

    /// Equivalent one-line CLI invocation.
    pub fn cli_invocation(&self) -> String {
        let mut out = format!(
            "qwb machine query --machines {} --select {}",
            self.machines.join(","),
            self.properties
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        if let Some(f) = &self.time_range.from {
            out.push_str(&format!(" --from {}", fmt_time(f)));
        }
        if let Some(t) = &self.time_range.to {
            out.push_str(&format!(" --to {}", fmt_time(t)));
        }
        if self.aggregation != Aggregation::None {
            out.push_str(&format!(" --agg {}", self.aggregation));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub machine: String,
    pub selector: String,
    pub index: String,
    /// RFC-3339 timestamp, or the aggregation name for aggregated rows.
    pub at: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTable {
    pub rows: Vec<QueryRow>,
}

impl QueryTable {
    pub const COLUMNS: [&'static str; 5] = ["machine", "selector", "index", "at", "value"];

    /// Tab-separated rendering with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = Self::COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.machine, r.selector, r.index, r.at, r.value));
        }
        out
    }
}

/// Runs `query` against `machines`. Rows are ordered by machine and
/// selector (query order), then index, then time.
pub fn run_query(query: &PropertyQuery, machines: &MachineRegistry) -> Result<QueryTable, MachineError> {
    let mut rows = Vec::new();
    for name in &query.machines {
        let machine = machines.get(name)?;
        for &selector in &query.properties {
            for series in property_series(machine, selector, &query.time_range) {
                let base = |at: String, value: f64| QueryRow {
                    machine: machine.name.clone(),
                    selector: selector.to_string(),
                    index: series.index.to_string(),
                    at,
                    value,
                };
                if query.aggregation == Aggregation::None {
                    rows.extend(series.points.iter().map(|p| base(fmt_time(&p.taken_at), p.value)));
                    continue;
                }
                if series.points.is_empty() {
                    continue;
                }
                let values = series.points.iter().map(|p| p.value);
                let value = match query.aggregation {
                    Aggregation::Min => values.fold(f64::INFINITY, f64::min),
                    Aggregation::Max => values.fold(f64::NEG_INFINITY, f64::max),
                    Aggregation::Mean => values.sum::<f64>() / series.points.len() as f64,
                    Aggregation::None => unreachable!(),
                };
                rows.push(base(query.aggregation.to_string(), value));
            }
        }
    }
    Ok(QueryTable { rows })
}

#[derive(Serialize, Deserialize)]
struct QueryFile {
    format: String,
    machines: Vec<String>,
    properties: Vec<String>,
    #[serde(default)]
    aggregation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<DateTime<Utc>>,
}

/// Serializes a query to the TOML query-file format.
pub fn save_query(query: &PropertyQuery) -> String {
    let file = QueryFile {
        format: QUERY_FORMAT.into(),
        machines: query.machines.clone(),
        properties: query.properties.iter().map(|s| s.to_string()).collect(),
        aggregation: Some(query.aggregation.to_string()),
        from: query.time_range.from,
        to: query.time_range.to,
    };
    toml::to_string(&file).expect("query serializes")
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}

pub fn load_query(text: &str) -> Result<PropertyQuery, MachineError> {
    let file: QueryFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        MachineError::QueryParse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let locate = |needle: &str| line_col(text, text.find(needle).unwrap_or(0));
    if file.format != QUERY_FORMAT {
        let (line, column) = locate(&file.format);
        return Err(MachineError::QueryParse {
            line,
            column,
            message: format!("unsupported query format `{}` (expected `{QUERY_FORMAT}`)", file.format),
        });
    }
    let mut properties = Vec::with_capacity(file.properties.len());
    for p in &file.properties {
        let sel = p.parse::<Selector>().map_err(|e| {
            let (line, column) = locate(&format!("\"{p}\""));
            MachineError::QueryParse {
                line,
                column,
                message: e.to_string(),
            }
        })?;
        properties.push(sel);
    }
    let aggregation = match &file.aggregation {
        None => Aggregation::None,
        Some(a) => a.parse().map_err(|message| {
            let (line, column) = locate(a);
            MachineError::QueryParse { line, column, message }
        })?,
    };
    Ok(PropertyQuery {
        machines: file.machines,
        properties,
        time_range: TimeRange {
            from: file.from,
            to: file.to,
        },
        aggregation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{CalibrationSnapshot, CouplingMap, SyntheticProps};
    use chrono::TimeZone;

    fn machine(name: &str) -> MachineRecord {
        let base = CalibrationSnapshot::synthetic(name, CouplingMap::linear(2), SyntheticProps::default());
        let snapshots = (1..=3u32)
            .map(|d| {
                let mut s = base.clone();
                s.taken_at = Utc.with_ymd_and_hms(2021, 6, d, 0, 0, 0).unwrap();
                s.qubits[0].t1 = 100.0 + d as f64;
                s.qubits[1].t1 = 50.0 + d as f64;
                for (k, p) in s.gates.iter_mut() {
                    if k.gate == "cx" {
                        p.error = 0.01 * d as f64;
                    }
                }
                s
            })
            .collect();
        MachineRecord {
            name: name.into(),
            coupling: CouplingMap::linear(2),
            snapshots,
            pending_jobs: 0,
            online: true,
        }
    }

    #[test]
    fn selector_grammar() {
        for s in ["qubit.t1", "qubit.readout_error", "gate.cx.error", "gate.sx.duration"] {
            assert_eq!(s.parse::<Selector>().unwrap().to_string(), s);
        }
        for s in ["qubit.t3", "gate.measure.error", "gate.cx", "cx.error", ""] {
            assert!(s.parse::<Selector>().is_err(), "{s}");
        }
    }

    #[test]
    fn t1_series_one_point_per_snapshot() {
        let m = machine("a");
        let series = property_series(&m, "qubit.t1".parse().unwrap(), &TimeRange::all());
        assert_eq!(series.len(), 2);
        assert!(series.iter().all(|s| s.points.len() == 3));
        assert_eq!(series[0].points[2].value, 103.0);
    }

    #[test]
    fn empty_range_gives_empty_series() {
        let m = machine("a");
        let range = TimeRange {
            from: Some(Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap()),
            to: None,
        };
        let series = property_series(&m, "qubit.t1".parse().unwrap(), &range);
        assert!(series.iter().all(|s| s.points.is_empty()));
    }

    #[test]
    fn cx_series_per_orientation() {
        let m = machine("a");
        let series = property_series(&m, "gate.cx.error".parse().unwrap(), &TimeRange::all());
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].index, PropIndex::Gate(vec![0, 1]));
        let values: Vec<f64> = series[0].points.iter().map(|p| p.value).collect();
        assert_eq!(values, vec![0.01, 0.02, 0.03]);
    }

    #[test]
    fn mean_collapses_time() {
        let mut reg = MachineRegistry::new();
        reg.insert(machine("a"));
        reg.insert(machine("b"));
        let q = PropertyQuery {
            machines: vec!["a".into(), "b".into()],
            properties: vec!["qubit.t1".parse().unwrap()],
            time_range: TimeRange::all(),
            aggregation: Aggregation::Mean,
        };
        let t = run_query(&q, &reg).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[0].value, 102.0);
        assert_eq!(t.rows[0].at, "mean");
        assert_eq!(t.rows[3].machine, "b");
        let none = run_query(
            &PropertyQuery {
                aggregation: Aggregation::None,
                ..q.clone()
            },
            &reg,
        )
        .unwrap();
        assert_eq!(none.rows.len(), 12);
    }

    #[test]
    fn unknown_machine_is_named() {
        let reg = MachineRegistry::new();
        let q = PropertyQuery {
            machines: vec!["ghost".into()],
            properties: vec![],
            time_range: TimeRange::all(),
            aggregation: Aggregation::None,
        };
        assert_eq!(run_query(&q, &reg), Err(MachineError::UnknownMachine("ghost".into())));
    }

    #[test]
    fn query_file_round_trip() {
        let q = PropertyQuery {
            machines: vec!["a".into(), "b".into()],
            properties: vec!["qubit.t1".parse().unwrap(), "gate.cx.error".parse().unwrap()],
            time_range: TimeRange {
                from: Some(Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap()),
                to: None,
            },
            aggregation: Aggregation::Max,
        };
        assert_eq!(load_query(&save_query(&q)).unwrap(), q);
    }

    #[test]
    fn unknown_selector_rejected_with_location() {
        let text = "format = \"qwb-query/1\"\nmachines = [\"a\"]\nproperties = [\"qubit.t1\", \"qubit.bogus\"]\n";
        match load_query(text) {
            Err(MachineError::QueryParse { line, column, message }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 27);
                assert!(message.contains("qubit.bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_file_reports_location() {
        let err = load_query("format = \"qwb-query/1\"\nmachines = [\n").unwrap_err();
        assert!(matches!(err, MachineError::QueryParse { line: 2.., .. }), "{err:?}");
    }

    #[test]
    fn cli_invocation_grammar() {
        let q = PropertyQuery {
            machines: vec!["vigo-like".into(), "bogota-like".into()],
            properties: vec!["qubit.t1".parse().unwrap(), "qubit.t2".parse().unwrap()],
            time_range: TimeRange::all(),
            aggregation: Aggregation::Mean,
        };
        assert_eq!(
            q.cli_invocation(),
            "qwb machine query --machines vigo-like,bogota-like --select qubit.t1,qubit.t2 --agg mean"
        );
    }
}
