pub mod asymptotics;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod hermite_pade;
pub mod index;
pub mod linalg;
pub mod measures;
pub mod mop;
pub mod mp;
pub mod zeros;

pub use equilibrium::{
    build_interaction_matrix, solve_equilibrium, EquilibriumOptions, EquilibriumSolution,
    InteractionMatrix,
};
pub use error::{Error, Result};
pub use hermite_pade::{
    biorthogonality_matrix, canonical_sequence, compute_d, BiorthogonalityReport,
    HermitePadeTriple, MatrixMarkovFunction,
};
pub use index::{decreasing_lattice, staircase, MultiIndexPair, Shift};
pub use measures::{
    build_gauss_rule, cauchy_transform, check_cauchy_identity, DiscretizedMeasure, Interval,
    MassPoint, NikishinSystem, Sign, WeightFamily, WeightSpec,
};
pub use mop::{
    assemble_moment_system, compute_varying_data, solve_mop, FormEvaluator, MopSolution, Residual,
    SystemPair, VaryingMeasureData,
};
pub use mp::Complex;
