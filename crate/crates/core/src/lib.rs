//! Weak-KAM numerics for contact Hamiltonian systems on the flat tori T^1 and T^2.
//!
//! The crate computes contact flows, discrete Lax-Oleinik semigroups,
//! stationary viscosity solutions, implicit action functions, Mane sets and
//! globally minimizing orbits, together with the checks that tie them
//! together.

pub mod action;
pub mod expr;
pub mod flow;
pub mod grid;
pub mod minimizer;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod real;
pub mod semigroup;
pub mod verify;
pub mod weakkam;

pub use model::{ConditionReport, ContactModel, Vec2};
