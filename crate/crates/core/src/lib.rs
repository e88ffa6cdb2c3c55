pub mod analytic;
pub mod arith;
pub mod duppoly;
pub mod exec;
pub mod experiments;
pub mod legendre;
pub mod heights;
pub mod torsion;
