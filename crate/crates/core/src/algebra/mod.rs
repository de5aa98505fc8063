//! Noncommutative trace polynomials and their derivatives.

mod calculus;
mod eval;
mod parse;
mod poly;
mod tensor;
mod word;

pub use calculus::{
    bold_grad, bold_grad_all, compose, convexity_certificate, cyclic_grad, diff_free, kappa,
    quadratic, regularity_check, seminorm_bound_poly, seminorm_bound_tensor, tilde_diff, tr,
    RegularityReport,
};
pub use eval::{eval, eval_tensor_sharp, frechet_dir, DerivativePlan, EvalCache, Evaluator};
pub use parse::{parse, parse_infer, parse_word};
pub use poly::{Monomial, TracePoly, PRUNE_TOL};
pub use tensor::{TensorPoly, TensorTerm};
pub use word::{cyclic_normalize, TraceFactor, Word};
