pub mod padic;
pub mod moments;
pub mod manin;
pub mod exec;
pub mod lift;
pub mod lfun;
pub mod selftest;
pub mod cli;
