//! Experiment harness for `fedwire-core`: configuration files, seeded
//! trials, parameter sweeps, bound overlays and CSV output.
//!
//! ```no_run
//! use fedwire::{config::ExperimentConfig, trial::{run_trial, Setup}};
//!
//! let cfg = ExperimentConfig::default();
//! let setup = Setup::new(&cfg).unwrap();
//! let traces = run_trial(&setup, 7).unwrap();
//! println!("{}", fedwire::output::trace_to_string(&traces[0]));
//! ```

pub mod config;
pub mod output;
pub mod overlay;
pub mod sweep;
pub mod trial;

pub use config::{ExperimentConfig, Paradigm};
pub use trial::{run_trial, RoundTrace, Setup, SimError, TrialTrace};
