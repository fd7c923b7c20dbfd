pub mod bracket;
pub mod error;
pub mod exec;
pub mod fkmc;
pub mod hyperbolic;
pub mod kernels;
pub mod ledger;
pub mod renewal;
pub mod roots;
pub mod specialfn;
pub mod stats;
pub mod validate;

pub use bracket::{BracketMode, KernelBracket};
pub use error::{Error, Result};
