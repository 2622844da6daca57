pub mod boson;
pub mod circuit;
pub mod effective;
pub mod error;
pub mod linalg;
pub mod pauli;
pub mod gates;
pub mod optimizer;
pub mod perturbative;
pub mod dynamics;
pub mod cli_io;
