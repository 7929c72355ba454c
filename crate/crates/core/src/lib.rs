pub mod anytime;
pub mod apc;
pub mod chart;
pub mod fs;
pub mod grammar;
pub mod lattice;
