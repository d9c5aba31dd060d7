pub mod eval;
pub mod gradcheck;
pub mod sample;
pub mod surface;
pub mod train;
