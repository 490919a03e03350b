pub mod bench;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod operator;
pub mod solver;
pub mod tensor_basis;
pub mod verification;
