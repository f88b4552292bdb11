//! Configuration, verification checks, reports and the run pipeline.

pub mod checks;
pub mod config;
pub mod gns;
pub mod report;
pub mod run;

pub use checks::{
    adjoint_consistency_metric, check_approx_kernel_domination, check_chapman_kolmogorov, check_duality,
    check_feynman_kac, check_holder_chain, check_l2, check_mass, check_monotonicity, check_nash_bound,
    check_positivity, check_zeta, compute_zeta, m_matrix_certificate, CheckError, OracleRun,
};
pub use config::{CheckKind, ConfigError, OutputFormat, RunConfig};
pub use gns::{check_gns, default_tests, gns_terms, RadialTest};
pub use report::{BoundReport, CheckRecord, Status, Witness};
pub use run::{
    exit_code, run, run_kernel, run_oracle, run_validate, write_density_csv, write_kernel, write_report,
    HarnessError, Overrides, Session, Stage, EXIT_CHECK_FAIL, EXIT_CONFIG, EXIT_PASS, EXIT_RUNTIME,
};
