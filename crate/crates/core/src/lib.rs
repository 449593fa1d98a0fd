//! Von Neumann style un-biasing of bit sources, exact output distributions,
//! and worst-case total-variation bounds for constant and drifting bias.

pub mod bits;
pub mod bounds;
pub mod exactdist;
pub mod markov;
pub mod normalize;
pub mod sources;
pub mod stats;

pub use bits::{count_bits, parse_bits, serialize_bits, BitFormat, BitString, BitsError, QaryString};
pub use exactdist::{
    check_independence, exact_source_dist, normalized_dist, normalized_dist_with, pn_prob, rn_prob,
    total_variation, uniform_dist, worst_case_product_dist, DistributionTable, ExactError, Independence,
    Lean,
};
pub use normalize::{
    delete_symbol, parity_normalize, peres_normalize, vn_normalize, vn_pair, vn_preimage,
    NormalizationMethod, NormalizeError,
};
pub use sources::{
    adversarial_trace, sample, sample_qary, validate_trace, DriftParams, DriftTrace, MarkovTable, PairDist,
    Sampler, SourceError, SourceSpec, Trajectory,
};
pub use bounds::{
    alpha_max, binom_cdf, binom_pmf, binom_tv, calibrate_alpha, calibrate_delta, crossing_index,
    linear_alpha_for_rho, linear_bound, naive_alpha_for_rho, product_deviation_sum, reg_inc_beta,
    tv_bound_exact, tv_bound_naive, u_max_oracle, u_value, Binomial, BoundFamily, BoundsError, VariationReport,
};
pub use markov::{run_markov_experiment, MarkovExperiment, MarkovReport};
pub use stats::{borel_counts, empirical_block_dist, sweep_alpha, sweep_csv, BorelReport, CountMode, StatsError};
