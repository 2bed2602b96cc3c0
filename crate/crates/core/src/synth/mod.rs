//! Synthetic experiment ingredients: explanatory distributions, Hölder
//! ground truths with exact derivatives, binary packings of bump functions
//! and full `(x, y)` datasets.

mod bump;
mod dataset;
mod lambda;
mod target;
mod vg;

pub use bump::{bump_constants, bump_derivatives, eval_bump, BumpConstants, MAX_BUMP_ORDER};
pub use dataset::{
    dataset_from_csv, dataset_to_csv, make_dataset, read_dataset, write_dataset, DatasetSidecar,
};
pub use lambda::{sample_lambda, LambdaSpec};
pub use target::{
    bump_product_holder_norm, floor_beta, holder_norm_bound, multi_indices, BumpSum, HolderTarget, MultiScale,
    SmoothPoly,
};
pub use vg::{VGCode, MAX_CODE_LEN};

/// `f_ω` for word `i` of a packing.
pub fn make_f_omega(code: &VGCode, omega: &[bool], beta: f64, holder_c: f64) -> crate::Result<HolderTarget> {
    Ok(HolderTarget::BumpSum(BumpSum::from_code(code.m, code.d, omega, beta, holder_c)?))
}
