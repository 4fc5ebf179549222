#![no_std]

extern crate alloc;

pub mod calculus;
pub mod conjugation;
pub mod ddouble;
pub mod dimension;
pub mod dual;
pub mod enclose;
pub mod error;
pub mod expr;
pub mod ifs;
pub mod interval;
pub mod jet;
pub mod map;
pub mod perturbation;
pub mod scalar;
pub mod separation;
pub mod symbolic;

pub use error::{Error, EvalError, ParseError};
pub use expr::{parse_expr, Expr};
pub use interval::Interval;
pub use jet::Jet;
pub use scalar::Scalar;
