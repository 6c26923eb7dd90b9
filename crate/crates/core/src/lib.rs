//! Solvers and analysis tools for two-stage firm/worker competition games.
//!
//! Firms simultaneously post per-worker salary offers, then each worker joins
//! the highest bidder (or stays idle). The reduced form of a stable outcome is
//! a partition of workers plus one realized payment per worker; stability of a
//! candidate outcome is decided exactly by a linear program over rationals.
//!
//! The crate is organized around that pipeline:
//!
//! * [`game`]: games, valuation classes (weighted / explicit / synergy /
//!   influence), marginal values, and structural predicates,
//! * [`partition`]: welfare-maximizing partitions (pseudo-polynomial DP,
//!   type-aware enumeration, max-cut) and the configuration LP,
//! * [`lp`]: an exact rational simplex used by everything above,
//! * [`equilibrium`]: the stability LP, outcome verification, and the
//!   closed-form equilibrium constructions,
//! * [`network`]: independent-cascade influence, synergy graphs and their
//!   interconversion, and the hard-instance constructions,
//! * [`experiments`]: dataset generators and the empirical studies, with
//!   deterministic CSV output.
//!
//! All quantities are exact `BigRational`s end to end; no floating point is
//! used on any decision path.

pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod game;
pub mod lp;
pub mod network;
pub mod partition;
pub mod rational;

pub use error::{Error, Result};
pub use game::{CompetitionGame, Limits, Outcome, Partition, Valuation};
pub use network::{InfluenceNetwork, SynergyMatrix};
pub use rational::Rat;
