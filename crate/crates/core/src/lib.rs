pub mod case;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod margin;
pub mod netjac;
pub mod network;
pub mod ratlin;
pub mod reshape;
pub mod zerocalc;
