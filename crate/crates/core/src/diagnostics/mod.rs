//! Posterior summaries: histograms and total variation, moments,
//! autocorrelation, error traces and flow/scalar observables.

mod histogram;
mod observables;
mod stats;

pub use histogram::{find_modes, tv_distance, tv_distance_2d, tv_probabilities, BinEdges, Histogram1D, Histogram2D};
pub use observables::{
    compute_observable, enstrophy, enstrophy_dissipation, scalar_difference, scalar_dissipation, scalar_variance,
    Observable,
};
pub use stats::{
    autocorrelation, batch_means_se, cumulative_relative_error, loglog_slope, moments, moments_of, ComponentMoments,
};
