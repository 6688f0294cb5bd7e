pub mod cli;
pub mod damage;
pub mod data;
pub mod distributions;
pub mod error;
pub mod nonparam;
pub mod plot;
pub mod propagate;
pub mod quad;
pub mod rng;
