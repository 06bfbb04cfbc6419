//! Finite-element solver and adjoint-based optimizer for the optimal
//! control of a stationary discontinuous shear-thickening fluid.
//!
//! The flow model couples a Stokes-type viscous term with a nonsmooth
//! threshold stress activated where the strain-rate norm exceeds a yield
//! value. The crate provides:
//!
//! - the pointwise threshold calculus and its C¹ smoothing ([`tensor`]),
//! - 2D Taylor-Hood discretization and assembly ([`mesh`], [`fem`], [`disc`]),
//! - state solvers realizing the control-to-state map ([`state`]),
//! - the linearized equation for directional derivatives ([`sensitivity`]),
//! - adjoint-based optimization with smoothing continuation ([`adjoint`]),
//! - stationarity certification ([`stationarity`]),
//! - randomized verification of the tensor calculus ([`props`]).

pub mod adjoint;
pub mod disc;
pub mod error;
pub mod fem;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod props;
pub mod quadrature;
pub mod sensitivity;
pub mod state;
pub mod stationarity;
pub mod tensor;

pub use adjoint::{
    delta_path, optimize_regularized, reduced_gradient, solve_adjoint_regularized,
    ControlProblem, GradientMode, OptimizeConfig, PathResult, PathSchedule,
};
pub use disc::{Discretization, VelOperator};
pub use error::{Error, Result};
pub use fem::{DofMap, FeField, FieldRole, QuadTensorField};
pub use mesh::Mesh;
pub use sensitivity::{derivative_check, solve_linearized};
pub use state::{FlowState, SolveReport, SolverConfig, StateSolver};
pub use stationarity::{certify, CertifyOptions, StationarityReport};
pub use tensor::{FluidParams, RegParam, SymTensor};
