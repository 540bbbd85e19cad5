//! Vecchia factorization `Sigma~^{-1} = B^T D^{-1} B` under a random ordering with
//! nearest-neighbor conditioning sets, its parameter derivatives and prediction blocks.

mod factor;
mod neighbors;
mod prediction;
mod sparse;

pub use factor::{
    build_factor, build_factor_with_gradients, factor_gradient, VecchiaFactor, VecchiaGradient,
    VecchiaStructure, CONDITIONAL_VARIANCE_FLOOR,
};
pub use neighbors::{find_neighbors, nearest_in, order_random, NeighborSets, BRUTE_FORCE_LIMIT};
pub use prediction::{prediction_blocks, PredictionBlocks, DUPLICATE_TOLERANCE};
pub use sparse::{SparseLower, SparseRows};
