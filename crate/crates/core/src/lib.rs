pub mod caputo;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod gamma;
pub mod geometry;
pub mod gravity;
pub mod lagrange;
pub mod point;
