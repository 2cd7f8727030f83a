//! Equilibrium construction and competitive-structure analysis for the
//! Population Lotto game.
//!
//! Players draw a value from a density whose mean is their budget; the
//! larger draw wins a pairing and ties split evenly. With a continuum of
//! players, everyone effectively plays against the population aggregate `g`.
//! This crate builds the sub-population consistent equilibrium for a finite
//! set of budget groups ([`solver`]), checks equilibrium conditions
//! independently ([`equilibrium`]) and reports leagues, sub-leagues and
//! transitivity of the pairwise outcomes ([`structure`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod equilibrium;
pub mod error;
pub mod exec;
pub mod payoff;
pub mod solver;
pub mod structure;

pub use density::{mixture, CdfValue, PiecewiseDensity};
pub use equilibrium::{
    best_dyad, payoff_identity_check, verify_linear_bounds, verify_nash, verify_subpop_consistency, EquilibriumReport,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use payoff::{dyad_payoff, population_payoff, win_prob, Dyad};
pub use solver::{fill, quadratic_fill, solve, DiscreteBudgetDistribution, EquilibriumSolution, TerraceProfile};
pub use structure::{
    dice_to_population, export_digraph, league_rewire, leagues, outcome_matrix, plot_csv, sub_leagues,
    transitivity_report, DigraphFormat, LeaguePartition, OutcomeMatrix, SubLeagueReport, TransitivityReport,
};

/// Global comparison and breakpoint-merging tolerance.
pub const EPS: f64 = 1e-9;
