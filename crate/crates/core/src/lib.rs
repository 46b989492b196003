pub mod diagnostics;
pub mod integrator;
pub mod linstab;
pub mod models;
pub mod steady;
