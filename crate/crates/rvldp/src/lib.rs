//! Monte Carlo engine, JSON configuration and command line front end for `rvldp-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod mc;
pub mod output;
pub mod smile_par;
