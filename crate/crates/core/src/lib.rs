//! Strong fractional integration on product spaces, at desk scale.
//!
//! The library discretizes the product Riesz operator with kernel
//! `|x-u|^{alpha-n} |y-v|^{beta-m}` on a bounded box in R^n x R^m,
//! decomposes it into dyadic cones indexed by the eccentricity of the
//! distance ratio, and computes the two-weight bump characteristics that
//! control its weighted L^p regularity. Everything is built to be checked:
//! the separable fast path has a brute-force oracle, the cone decomposition
//! reconstructs the full operator exactly with excluded-pair bookkeeping,
//! and per-eccentricity profiles feed a log-linear decay-rate fit.

pub mod characteristic;
pub mod checks;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod operator;
pub mod verify;

mod rng;
mod sum;

pub use characteristic::{
    b_quantity, b_ratio_probe, bump_characteristic_rectangle, bump_characteristic_sup,
    bump_characteristic_sup_with_table, BRatioProbe, CharacteristicReport, PowerWeightSpec,
    WeightPair,
};
pub use error::{Error, Result};
pub use grid::{
    enumerate_dyadic_rectangles, make_grid, DyadicRectangle, ExponentConfig, Factor,
    GridFunction, ProductGrid, RectangleFilter,
};
pub use kernel::{cone_index, kernel_factor, self_cell_average, KernelSpec, SelfCellRule};
pub use operator::{
    cone_decomposition, cone_operator, cone_sum, fractional_integral_1factor, riesz_1d_at,
    strong_fractional_integral, strong_fractional_integral_direct, ConeDecomposition,
    ConeSumOutput, OperatorOutput, DIRECT_GUARD_MAX_CELLS,
};
pub use verify::{
    build_corpus, characteristic_decay_profile, cone_norm_profile, fit_decay_rate,
    inequality_ratio, weighted_norm, CorpusKind, DecayReport, InequalityRatio, QuantityKind,
    TestCorpus,
};
