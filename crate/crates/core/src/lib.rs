//! Cellular automata over finitely generated groups and their quotients.
//!
//! Groups are quotients of a free group `F_k` given by word-problem oracles.
//! Configurations are only ever handled through finite windows, periodic
//! representatives or finite quotients, and every proximity is reported as
//! an exact integer agreement radius.

pub mod ca;
pub mod error;
pub mod format;
pub mod group;
pub mod lab;
pub mod limits;
pub mod linear;
pub mod shift;
pub mod window;
pub mod word;

pub use ca::{pullback_ca, synthesize_ca, BlackBox, CellularAutomaton, LocalRule, QuotientAutomaton};
pub use error::{Error, Result};
pub use group::{marked_distance, membership_window, AgreementRadius, Element, MarkedGroup};
pub use lab::{
    compute_profile, convergence_experiment, eca_sweep, gromov_radius, injectivity_transfer_check, is_injective_1d,
    is_preinjective_1d, is_surjective_1d, periodic_oracle, ConvergenceReport, DeBruijnGraph, ModulusProfile, Property,
    TransferReport,
};
pub use linear::{
    lin_apply, lin_decide, lin_inverse_kernel, lin_matrix, stable_finiteness_witness, FpMatrix, GroupAlgebraMatrix,
    LinearDecision, LinearKernel, Side, StableFiniteness, VectorConfiguration,
};
pub use shift::{
    fix_window, rho_star, rho_star_inverse, shift_window, FiniteConfiguration, FixSubshift, FullShift,
    PeriodicConfiguration,
};
pub use window::{
    hb_agreement_radius, hb_union_property_check, pushforward_window, window_entourage_check, Subshift,
    WindowMap, WindowPattern, WindowSet,
};
pub use word::{free_ball, Ball, FreeWord, Letter};
