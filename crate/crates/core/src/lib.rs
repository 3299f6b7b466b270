//! Engine for a vendor-independent quantum circuit workbench.
//!
//! The modules follow the workflow: write a circuit ([`problems`],
//! [`circuit`], [`qasm`]), pick a machine ([`machine`]), compile it
//! ([`transpile`]), inspect fidelity ([`analysis`]), execute it ([`sim`]),
//! read the results ([`results`]) and share the job ([`jobdata`]).

pub mod analysis;
pub mod circuit;
pub mod docs;
pub mod jobdata;
pub mod machine;
pub mod problems;
pub mod qasm;
pub mod results;
pub mod sim;
pub mod transpile;
