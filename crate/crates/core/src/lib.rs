//! Feynman-Kac Monte Carlo for the relativistic Pauli operator
//! `H + V = √(2h + m²) - m + V` with `h = ½(-i∇ - a)² - ½σ·b`, and a dense
//! lattice oracle for the same operator.
//!
//! Paths are `q_t = (B_{T_t}, θ_{T_t})`: Brownian motion run by the
//! relativistic subordinator `T_t`, and a spin flipped by a unit-rate Poisson
//! process in subordinated time.

// `!(x > 0.0)` is used deliberately so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod decay;
pub mod engine;
pub mod error;
pub mod field;
pub mod geom;
pub mod lattice;
pub mod levy;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod testfn;

pub use action::{action_potential, action_spin, action_vector, fk_weight, ActionParts, FkWeight, Mode, PathBundle, SpinAction};
pub use decay::{fit_decay, martingale_scan, rate_bounds, stopped_bound, DecayFit, MartingaleScan, RateBounds, StopRule, StoppedBound};
pub use engine::{
    apply_semigroup, characteristic_exact, characteristic_mc, diamagnetic_check, exp_moment, ground_state_energy, matrix_element,
    DiamagneticCheck, Discretization, Dynamics, Estimate, ExpMoment, ExperimentSpec, GroundEnergy, Start,
};
pub use error::{Error, Result};
pub use field::{truncate_field, FieldConfig, MagneticField, Potential, SpinCoupling, VectorPotential};
pub use geom::Point;
pub use lattice::{
    build_h, build_h_b0, ground_state, relativistic_hamiltonian, semigroup_matrix, sqrt_shift, BoundState, Interpolation, Lattice, OperatorMatrix, PhiInterpolant,
    OperatorTag,
};
pub use levy::{
    bessel_k2, relativistic_kernel, sample_brownian_on_grid, sample_jumps, sample_subordinator_increment, sample_subordinator_path,
    subordinator_density, BrownianPath, JumpSet, SpinTrack, SubordinatorPath,
};
pub use testfn::{SpinSector, TestFunction};
