//! Scrambled geometric net quadrature.
//!
//! Construction of (0,m,s)-nets in prime-power bases, nested uniform
//! scrambling, recursive splits of intervals and triangles with the
//! centroid transformation, equal-weight integral estimation with
//! replication-based variance and confidence intervals, and the
//! gain-coefficient / multiresolution machinery that explains the
//! variance behaviour of the estimator.

pub mod analysis;
pub mod domains;
pub mod estimator;
pub mod experiments;
pub mod field;
pub mod nets;
pub mod scramble;
pub mod stats;

pub use domains::{
    compute_split_matrix, map_net, phi_map, CellAddress, DomainError, PointSet, ProductDomain,
    Region, SplitMatrix, SplitScheme,
};
pub use field::FieldTable;
pub use nets::{
    default_depth, faure_generators, generate_net, read_net, verify_net, write_net, DigitalNet,
    GeneratorSet, NetCheck, NetError,
};
pub use scramble::{scramble_net, PermutationTree, ScrambleKey, ScrambleMode};
