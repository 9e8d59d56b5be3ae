pub mod cluster;
pub mod ingest;
pub mod textprep;
pub mod pipeline;
pub mod config;
pub mod labeling;
pub mod run;
pub mod export;
pub mod cli;
pub mod service;
