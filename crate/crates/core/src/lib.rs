pub mod error;
pub mod model;
pub mod rng;
pub mod tree;
pub mod uplift;
pub mod policy;
pub mod sim;
pub mod harness;
