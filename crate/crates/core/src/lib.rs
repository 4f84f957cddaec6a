//! Analysis and repair of automated-driving behaviour against temporal properties.

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::should_implement_trait
)]

pub mod geometry;
pub mod localizer;
pub mod mudrive;
pub mod pipeline;
pub mod promptgen;
pub mod repair;
pub mod simulator;
pub mod spec;
pub mod trace;
