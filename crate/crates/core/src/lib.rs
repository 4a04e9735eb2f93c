// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allatom;
pub mod cli;
pub mod config;
pub mod flowmatch;
pub mod geom3;
pub mod losses;
pub mod metrics;
pub mod proteinio;
pub mod sampler;
pub mod seqflow;
pub mod synthetic;
