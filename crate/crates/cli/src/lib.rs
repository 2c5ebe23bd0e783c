pub mod config;
pub mod io;
pub mod manifest;
pub mod run;
