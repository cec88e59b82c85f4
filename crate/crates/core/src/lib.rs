pub mod crypto;
pub mod engine;
pub mod harness;
pub mod sim;
pub mod store;
pub mod vector;
