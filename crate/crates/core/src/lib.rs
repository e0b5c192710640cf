pub mod analysis;
pub mod cli;
pub mod disturbance;
pub mod engine;
pub mod plant;
pub mod rng;
pub mod script;
pub mod service;
pub mod signal;
pub mod subjects;
pub mod verify;
