//! Exact finite-`n` laws: weighted sums, conditional spectra and their
//! functionals, the limit object and the partition function.

mod engine;
mod limits;
mod qn;
mod spectrum;
mod tables;

pub use engine::{
    general_recursion_residual, ln_partition_function, partition_function, poisson_recursion_residual,
    suffix_table, t_distribution, upper_bound_constant, ExactEngine,
};
pub use limits::{limit_laws, LimitLaws};
pub use qn::{qn_law, QnOptions, DEFAULT_NODE_BUDGET};
pub use spectrum::{
    bruteforce_with_normalizer, for_each_partition, spectrum_law_bruteforce, tv_distance, Spectrum,
    SpectrumLaw, TvDistance, BRUTE_FORCE_GUARD,
};
pub use tables::{PrefixTable, ScaledColumn, SuffixTable};
