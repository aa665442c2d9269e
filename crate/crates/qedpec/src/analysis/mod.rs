//! Logical-infidelity analytics, the PEC overhead comparison and the H₂ VQE
//! experiment.

mod h2;
mod infidelity;
mod overhead;
mod spline;
mod vqe;

pub use h2::{analytic_minimum, h2_energy, table_s1, H2Coefficients, H2Expectations};
pub use infidelity::{closed_form_infidelity, infidelity_curve, logical_error_stats, InfidelityMode, LogicalErrorStats};
pub use overhead::{hybrid_data_channel, overhead_study, OverheadConfig, OverheadRow};
pub use spline::{golden_section_min, NaturalSpline};
pub use vqe::{
    compiled_vqe_circuit, default_theta_grid, ideal_expectation, pes_curve, reduced_noise, run_vqe_experiment, vqe_offdiagonal_bias,
    ExpectationRow, Mode, Observable, PesRow, VqeConfig, VqeResult,
};
