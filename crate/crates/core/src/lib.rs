pub mod cli;
pub mod contact;
pub mod dynamics;
pub mod einstein;
pub mod equilibria;
pub mod lie;
pub mod linalg;
pub mod phase;
pub mod reduction;
pub mod scenario;
