//! Viability analysis of the controlled Ross-Macdonald dengue model.
//!
//! * [`dynamics`]: the controlled vector field, equilibria and the
//!   componentwise comparison check.
//! * [`kernel`]: regime classification, the medium-regime frontier curve,
//!   membership and distance queries, regime diagrams.
//! * [`trajectory`]: simulation under constant, piecewise-constant and
//!   saturating viable feedback policies.
//! * [`estimation`]: incidence-to-prevalence conversion and box-constrained
//!   least-squares fitting of the epidemiological parameters.
//! * [`ode`] and [`interp`]: the numerical building blocks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod interp;
pub mod kernel;
pub mod ode;
pub mod report;
pub mod trajectory;

pub use dynamics::{
    check_dominance, derive_rates, endemic_equilibrium, is_viable_equilibrium, vector_field,
    EpiParams, ModelRates, State,
};
pub use error::{Error, Result};
pub use kernel::{
    boundary_curve, classify_regime, describe_kernel, distance_to_frontier, kernel_membership,
    m_bar, regime_diagram, BoundaryCurve, ConstraintBox, FrontierOptions, KernelDescription,
    MediumKernel, Regime, Thresholds,
};
pub use trajectory::{
    audit_viability, feedback_control, simulate, simulate_with_tol, ControlPolicy, Sample,
    Trajectory,
};
