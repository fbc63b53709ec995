pub mod analyze;
pub mod energy;
pub mod forecast;
pub mod simulate;
pub mod xor;

