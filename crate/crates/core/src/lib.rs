//! Exact and asymptotic computations for component spectra of decomposable
//! combinatorial structures whose component counts are independent `Z_j`
//! conditioned on `sum_j j Z_j = n`, in the convergent case
//! `E Z_j = j^{-q-1} lambda(j)`, `q > 0`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod exact;
pub mod model;
pub mod pmf;
pub mod samplers;
pub mod spec_file;
pub mod trees;

pub use error::{Error, Result};
pub use exact::{
    limit_laws, qn_law, spectrum_law_bruteforce, suffix_table, t_distribution, tv_distance, ExactEngine,
    LimitLaws, QnOptions, Spectrum, SpectrumLaw, SuffixTable, TvDistance,
};
pub use model::{Family, LambdaSpec, Model, ModelSpec};
pub use pmf::{epsilon_profile, scaled_convolve, EpsilonProfile, Pmf, ScaledVar};
pub use spec_file::parse_model_spec;
pub use trees::{otter_constants, OtterConstants, TreeCounts};
