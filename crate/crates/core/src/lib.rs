//! Optimal controller synthesis for discrete-time piecewise linear systems
//! with regular finite-word objectives, by abstraction refinement.
//!
//! The pipeline is: grid the state and input spaces ([`abstraction`]), solve
//! the min-max reachability game on the product with the property automaton
//! ([`game`]), extract a concrete input sequence and halve the grid
//! ([`synthesis`]). [`io`] holds the problem and report formats.

pub mod abstraction;
pub mod error;
pub mod game;
pub mod geometry;
pub mod io;
pub mod synthesis;
pub mod wts;

pub use abstraction::{
    canonical_refinement_witness, check_simulation, cons_abs, AbstractionResult, Piece, Proposition, PwlSystem,
    SimulationViolation, SimulationWitness,
};
pub use error::{Error, Result};
pub use game::{brute_force_game, reduce_reach, solve_finite_game, GameSolution, ProductGame, PropertyAutomaton};
pub use geometry::{
    grid, image_constraints, lp_feasible, lp_maximize, pwl_maximize, AffineMap, AxisBox, ConvexPwlFunction,
    Halfspace, Lattice, Polyhedron, Rational,
};
pub use synthesis::{
    extract, lemma7_check, lemma7_constants, optcar, simulate, BoundConstants, RefinementReport, SynthesisConfig,
    Trajectory,
};
pub use wts::{
    conforming_maximal_paths, path_cost, strategy_cost, FiniteWts, LayeredStrategy, Path, Strategy, Transition,
};
