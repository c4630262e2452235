//! Reference computations for tests. Everything here is deliberately naive (dense algebra,
//! brute-force sums, adaptive quadrature) and shares no code with the engine it checks.

pub mod dense;
pub mod quad;
pub mod special;
pub mod tweedie;
