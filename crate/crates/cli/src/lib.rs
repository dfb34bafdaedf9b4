//! Front ends for crewplan: file-based commands and the session HTTP service.

pub mod commands;
pub mod config;
pub mod server;
