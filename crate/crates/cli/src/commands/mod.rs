pub mod dataset;
pub mod eval;
pub mod infer;
pub mod rf;
pub mod train;
