#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod datagen;
pub mod discount;
pub mod error;
pub mod experiments;
pub mod limits;
pub mod metrics;
pub mod quadrature;
