// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod quad;
pub mod special;
pub mod params;
pub mod moments;
pub mod dist;
pub mod pricing;
pub mod sim;
pub mod degrade;
pub mod optim;
pub mod selftest;
