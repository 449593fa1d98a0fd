//! How close to uniform the von Neumann output of a short-memory source gets.

use std::fmt::Write as _;

use thiserror::Error;

use crate::exactdist::{normalized_dist, total_variation, uniform_dist, DistributionTable, ExactError, ENUMERATION_MAX_LEN};
use crate::normalize::vn_normalize;
use crate::sources::{MarkovTable, Sampler, SourceError, SourceSpec};
use crate::stats::{format_sig, tv_slack};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("output length m = {m} must lie in 1..={max} for chains of length {n}")]
    OutputLength { m: usize, n: usize, max: usize },
    #[error("sample count must be positive")]
    NoSamples,
    #[error("table memory {table} does not match k = {k}")]
    TableMemory { table: usize, k: usize },
    #[error("no chain of length {n} produced exactly {m} output bits")]
    NoOutputs { n: usize, m: usize },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// One configuration of the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovExperiment {
    /// Marginal used for the first `k` bits and as the table's centre.
    pub p0: f64,
    pub k: usize,
    pub kappa: f64,
    /// Output block length.
    pub m: usize,
    /// Chain length per sample.
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// Conditional table; the alternating `p0 ± κ` table when absent.
    pub table: Option<MarkovTable>,
}

impl MarkovExperiment {
    pub fn spec(&self) -> Result<SourceSpec, MarkovError> {
        let table = match &self.table {
            Some(t) if t.k() != self.k => return Err(MarkovError::TableMemory { table: t.k(), k: self.k }),
            Some(t) => t.clone(),
            None => MarkovTable::alternating(self.k, self.p0, self.kappa)?,
        };
        let spec = SourceSpec::Markov { p0: self.p0, kappa: self.kappa, table };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub experiment: MarkovExperiment,
    /// `Δ(P_{n→m}, U_m)` by enumeration, when `n` is within the guard.
    pub tv_exact: Option<f64>,
    pub tv_empirical: f64,
    /// Chains whose output had exactly `m` bits.
    pub kept: u64,
    /// 4σ sampling spread of `tv_empirical`.
    pub slack: f64,
    pub empirical: DistributionTable,
}

/// Draws `samples` chains of `n` bits, keeps those whose von Neumann output
/// has exactly `m` bits, and measures the distance of the kept outputs from
/// `U_m`.
pub fn run_markov_experiment(exp: &MarkovExperiment) -> Result<MarkovReport, MarkovError> {
    let max = exp.n / 2;
    if exp.m < 1 || exp.m > max || exp.m > ENUMERATION_MAX_LEN {
        return Err(MarkovError::OutputLength { m: exp.m, n: exp.n, max });
    }
    if exp.samples == 0 {
        return Err(MarkovError::NoSamples);
    }
    let spec = exp.spec()?;
    let mut sampler = Sampler::new(spec.clone(), exp.seed)?;
    let mut counts = vec![0u64; 1 << exp.m];
    let mut kept = 0u64;
    for _ in 0..exp.samples {
        sampler.restart();
        let y = vn_normalize(&sampler.take_bits(exp.n)?);
        if y.len() == exp.m {
            counts[y.to_u64() as usize] += 1;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(MarkovError::NoOutputs { n: exp.n, m: exp.m });
    }
    let uniform = uniform_dist(exp.m)?;
    let empirical = DistributionTable::from_weights(exp.m, counts.iter().map(|&c| c as f64).collect())?;
    let tv_empirical = total_variation(&empirical, &uniform)?;
    let tv_exact = if exp.n <= ENUMERATION_MAX_LEN {
        Some(total_variation(&normalized_dist(&spec, exp.n, exp.m)?, &uniform)?)
    } else {
        None
    };
    Ok(MarkovReport {
        experiment: exp.clone(),
        tv_exact,
        tv_empirical,
        kept,
        slack: tv_slack(&uniform, kept),
        empirical,
    })
}

pub const MARKOV_CSV_HEADER: &str = "k,kappa,m,n,tv_exact,tv_empirical,samples,seed";

impl MarkovReport {
    /// A row under [`MARKOV_CSV_HEADER`]; `tv_exact` is empty when not computed.
    pub fn csv_row(&self) -> String {
        let e = &self.experiment;
        format!(
            "{},{},{},{},{},{},{},{}",
            e.k,
            format_sig(e.kappa, 12),
            e.m,
            e.n,
            self.tv_exact.map(|v| format_sig(v, 12)).unwrap_or_default(),
            format_sig(self.tv_empirical, 12),
            e.samples,
            e.seed
        )
    }
}

pub fn markov_csv(reports: &[MarkovReport]) -> String {
    let mut out = format!("{MARKOV_CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}
