//! File formats, the study service, and the experiment harness built on
//! `recstudy-core`.

pub mod config;
pub mod formats;
pub mod harness;
pub mod http;
pub mod service;
