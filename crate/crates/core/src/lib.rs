pub mod cli;
pub mod clogic;
pub mod error;
pub mod matrix;
pub mod opsystem;
pub mod predicates;
pub mod ucp;
