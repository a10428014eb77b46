pub mod autonomous;
pub mod cli;
pub mod expr;
pub mod field;
pub mod flow;
pub mod integrate;
pub mod linear;
pub mod reconstruct;
pub mod state;
pub mod verify;
