//! Shared fixtures for the integration tests and the acceptance runner.

#![allow(dead_code)]

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub mod adr;
pub mod der;
pub mod mesh;
pub mod rx;
pub mod topology;

pub use mesh::*;
