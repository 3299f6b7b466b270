//! Fidelity estimates and logical-to-physical gate matching.

mod esp;
mod matching;

pub use esp::{esp, esp_delta, EspDelta, EspError, EspReport};
pub use matching::{from_provenance, heuristic, match_gates, MatchError, MatchMap, MatchMethod};
