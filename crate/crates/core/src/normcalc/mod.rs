//! Norm expression trees and the solvers behind them.

mod descent;
mod dual;
mod eval;
mod expr;
mod model;
mod opnorm;
pub mod simplex;

pub use dual::dual_expr;
pub use eval::{dist_to_subspace, dist_with, eval_norm, DistResult, DistRoute, DEFAULT_TOL};
pub use expr::{dual_index, norm_serde, parse_norm, EvalCache, Exponent, Norm, NormExpr, Slot};
pub use opnorm::{op_norm, op_norm_upper, OpNorm, SIGN_CAP};
pub(crate) use opnorm::sign_vectors;
pub use simplex::{simplex_solve, LpSolution, LpStatus, StandardLp};

pub use crate::linalg::null_space;

