//! Non-archimedean plectic uniformization: p-adic Schottky and plectic groups,
//! Bruhat–Tits trees, invariant boundary measures, multiplicative integrals,
//! period lattices and plectic Jacobians.

pub mod error;
pub mod padic;
pub mod proj;
pub mod tree;
pub mod words;
pub mod group;
pub mod schreier;
pub mod intlin;
pub mod measures;
pub mod integration;
pub mod jacobian;
pub mod hecke;
pub mod config;
pub mod verify;
