//! Summary statistics for marked spatial point patterns with non-constant
//! intensity.
//!
//! The crate estimates the cross versions of the nearest-neighbour distance
//! distribution D, the empty-space function F, the ratio statistic
//! J = (1 - D) / (1 - F) and the second-moment statistic K for point
//! patterns whose points carry categorical marks. All estimators reweight by
//! a user-supplied or kernel-estimated intensity, so first-order
//! inhomogeneity does not masquerade as interaction. On top of the
//! estimators sit two Monte Carlo tests: a mark-permutation test of random
//! labelling and a torus-translation test of independence between two mark
//! groups.
//!
//! Everything is deterministic under a fixed seed, including parallel runs:
//! replicate streams are split by index and reductions happen in index
//! order, so outputs are byte-identical across thread counts.

pub mod error;
pub mod estimators;
pub mod geom;
pub mod intensity;
pub mod io;
pub mod mctest;
pub mod neighbors;
pub mod pattern;
pub mod simulate;

pub use error::{Error, Result};
pub use estimators::{
    estimate_d, estimate_d_raw, estimate_f, estimate_j, estimate_k, hamilton_normalizer, summarize,
    ProbeGrid, RGrid, SummaryConfig, SummaryEstimate, SummaryRow,
};
pub use geom::{Point, Window};
pub use intensity::{
    fit_scale, kernel_bandwidth_rule, raster_integral, EdgeCorrection, IntensityModel,
    KernelIntensity, LeaveOneOutKernel, PerMarkIntensity, ScaledIntensity, SpatialField, Surface,
    TranslatedIntensity,
};
pub use mctest::{
    test_independence_ls, test_random_labelling, Envelope, EnvelopeConfig, TestStatistic,
};
pub use neighbors::NeighborIndex;
pub use pattern::{DedupPolicy, Mark, MarkSet, MarkSpace, MarkedPattern, MarkedPoint};
pub use simulate::{
    replicate_rng, sim_marked, sim_poisson, sim_thomas_cross, MarkingRule, ParentCoupling,
    SimConfig,
};
