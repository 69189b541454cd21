pub mod cli;
pub mod config;
pub mod equivalence;
pub mod hub;
pub mod lp;
pub mod market;
pub mod oracle;
pub mod output;
pub mod scenario;
