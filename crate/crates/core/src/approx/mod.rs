//! Explicit ReLU approximants of Hölder functions: trapezoid partitions of
//! unity, approximate multiplication and the assembled local Taylor network.

mod compile;
mod prod;
mod trapezoid;

pub use compile::{
    assemble, compile, construction_bound, error_budget, lp_error, ApproxParams, CertBundle, CompileOptions,
    CompiledNet, TaylorGrid, DEFAULT_ETA0, DEFAULT_MC_POINTS,
};
pub use prod::{build_prod, min_accuracy, pair_net, square_net, stages_for, ProdNet, ProdShape};
pub use trapezoid::{build_trapezoid, TrapezoidUnit};
