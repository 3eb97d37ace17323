pub mod approximator;
pub mod environments;
pub mod agents;
pub mod exploration;
pub mod analysis;
pub mod harness;
