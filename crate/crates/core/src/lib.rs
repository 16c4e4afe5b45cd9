//! Correlation-set toolbox: Bell scenarios, quantum models, symmetry
//! actions, and the almost-quantum moment relaxation.

// Dense kernels index into flat buffers throughout; range loops are the idiom.
#![allow(clippy::needless_range_loop)]

pub mod moment;
pub mod quantum;
pub mod random;
pub mod scenario;
pub mod symmetry;
pub mod tensor;
pub mod theorem;
