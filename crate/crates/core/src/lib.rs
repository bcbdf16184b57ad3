pub mod equilibrium;
pub mod framework;
pub mod harness;
pub mod market;
pub mod pricing;
pub mod punishment;
pub mod rational;
pub mod regulation;
pub mod rng;
