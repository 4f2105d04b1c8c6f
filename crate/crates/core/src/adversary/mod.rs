//! Deviating strategies, profile enumeration, payoffs and the collusion
//! playbook.

mod enumerate;
mod payoff;
mod playbook;
mod strategy;

pub use enumerate::{enumerate_profiles, strategy_library};
pub use payoff::{evaluate_deviation, DeviationError, DeviationReport, PayoffVector, Share};
pub use playbook::{collusion_playbook, Attack, AttackKind, PlaybookError};
pub use strategy::{
    collusion_targets, honest_parties, resolve_roles, Collusion, ProfileError, Role, Strategy, StrategyParseError,
    StrategyProfile,
};
