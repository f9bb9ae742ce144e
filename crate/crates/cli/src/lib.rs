//! Batch experiments: scene suites, attack runs, ablations, ADA scoring and
//! reports.

pub mod ablate;
pub mod ada;
pub mod manifest;
pub mod report;
pub mod run;
pub mod suite;

pub use ablate::{cmd_ablate, Axis};
pub use ada::{cmd_ada, AdaReport, AdaRow};
pub use manifest::{AdaSplit, Method, Overrides, RunManifest};
pub use report::{cmd_report, Summary};
pub use run::{cmd_attack, RunOutcome};
pub use suite::{cmd_gen_suite, read_scene_list, seed_range};
