pub mod bigreal;
pub mod eigensolve;
pub mod error;
pub mod exec;
pub mod frobenius;
pub mod regular;
pub mod series;
pub mod shooting;
pub mod problems;
pub mod wavefunction;
