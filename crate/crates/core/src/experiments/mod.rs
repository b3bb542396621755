//! Reference instance, control sequences and the convergence experiments.

pub mod canonical;
pub mod certify;
pub mod monte_carlo;
pub mod random;
pub mod sequence;
pub mod suite;
pub mod sweep;

pub use canonical::{canonical_balls, canonical_cost, canonical_family, canonical_target};
pub use certify::{certify, CertificateReport, EmbeddedCertificate};
pub use monte_carlo::{monte_carlo_average, McReport};
pub use sequence::{generate_sequence, ControlSequenceRule, SequenceRule};
pub use suite::{
    render_csv, render_json, to_csv, run_problem_suite, run_suite_with_model, ExperimentConfig, SequenceChoice, SuiteReport,
    SuiteRow, FINAL_TOLERANCE,
};
pub use sweep::{default_signed_alphas, render_sweep_csv, small_risk_sweep, SweepConfig, SweepRow};
