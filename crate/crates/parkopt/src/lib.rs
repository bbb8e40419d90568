//! Equity-weighted park siting toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! * [`instance`] — problem data (parks, resident locations, populations,
//!   distances) and the scoring configuration, plus CSV/JSON ingestion.
//! * [`access`] — small data-preparation helpers: capacity from acreage,
//!   land-cost estimation, and deviation-from-range splitting.
//! * [`milp`] — an exact mixed-integer linear model of the siting problem,
//!   built as a solver-independent intermediate representation, together
//!   with an assignment evaluator that prices any concrete plan.
//! * [`solve`] — two independent exact back-ends (domain enumeration and
//!   IR-level enumeration), an MPS writer/parser, and an external-solver
//!   bridge.
//! * [`policy`] — planning analyses layered on the solver: budget sweeps,
//!   planning horizons, emphasis calibration, and threshold sensitivity.
//! * [`fixtures`] — a hand-checked miniature instance and a seeded random
//!   instance generator, shared by tests and benchmarks.

pub mod access;
pub mod fixtures;
pub mod instance;
pub mod milp;
pub mod policy;
pub mod solve;
