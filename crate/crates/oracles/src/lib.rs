pub mod cfg;
pub mod features;
pub mod fs;
