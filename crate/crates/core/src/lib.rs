//! Polar codes for multiple-access channels over prime fields.

pub mod codec;
pub mod gfq;
pub mod linear_mac;
pub mod mac;
pub mod polarize;
pub mod region;
pub mod subspace;
pub mod users;
