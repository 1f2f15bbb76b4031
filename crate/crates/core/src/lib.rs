//! Spectral toolkit for the Madelung fields `(rho, s)` of a free particle:
//! uncertainty functionals, a dilatation group acting on them, a functional
//! Poisson bracket with a finite-difference oracle, and evolution in the
//! ordinary time `t` and the dual time `tau`.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! `*64` and `*32` aliases below fix the scalar.

pub mod bracket;
pub mod checks;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod gaussian_ode;
pub mod grid;
pub mod group;
pub mod oracle;
pub mod scalar;
pub mod state;
pub mod suite;

pub use checks::{Check, CheckKind, Relation};
pub use bracket::{
    generator_check, jacobi_check, poisson_bracket, poisson_bracket_oracle, BracketMethod,
    BracketResult, DerivativeTable, OracleTable,
};
pub use dynamics::{
    continuity_residual, evolve_t, evolve_tau, holomorphy_check, hydro_rhs, run_trajectory,
    uncertainty_rates, FlowKind, Trajectory, TrajectoryConfig, TrajectoryRecord,
};
pub use error::{QrelError, Result};
pub use gaussian_ode::{GaussianOde, GaussianOdeState};
pub use functionals::{
    variational_derivative, Component, Convention, FunctionalTag, Kinematics, Observables,
    UncertaintyPair,
};
pub use grid::{ComplexField, Field, Grid, RealField};
pub use group::{dilate, mix_hk, mix_times, product_law, transform_uncertainty, GroupParam};
pub use oracle::{fd_functional_derivative, oracle_sweep, oracle_sweep_tuned, Secant};
pub use scalar::Real;
pub use state::{
    from_wave, make_gaussian, to_wave, GaussianParams, HydroState, PhaseExtraction, WaveField,
    RHO_FLOOR,
};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type HydroState64 = HydroState<f64>;
pub type HydroState32 = HydroState<f32>;
pub type WaveField64 = WaveField<f64>;
pub type WaveField32 = WaveField<f32>;
