//! Dense feature selection and tf-idf dimensionality reduction.

pub mod lasso;
pub mod tsvd;

pub use lasso::{default_lambda_grid, lambda_max, lasso_cv, lasso_fit, LassoCv, LassoModel};
pub use tsvd::{SvdMethod, TruncatedBasis};
