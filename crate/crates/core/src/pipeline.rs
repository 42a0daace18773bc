//! End-to-end runs of both procedures on a p-value lattice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate, FilterKind};
use crate::error::{Error, Result};
use crate::fdr::{reject, threshold, Estimator, FdrCurve};
use crate::grid::{build_neighborhoods, Lattice, NeighborhoodSpec, NeighborhoodTable, RejectionMask};
use crate::nulldist::{method1_ghat, method2_ghat_with, Method2Fit, Method2Options, NullCdf};

/// How the null law of the p*-values is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NullMethod {
    /// Symmetric empirical estimate from the upper half of the p*-values.
    #[default]
    #[serde(rename = "1")]
    Symmetric,
    /// Normal approximation to the median law.
    #[serde(rename = "1n")]
    NormalApprox,
    /// Composite estimate accounting for signal-contaminated neighborhoods.
    #[serde(rename = "2")]
    Composite,
    /// Exact median law of uniform p-values.
    #[serde(rename = "beta")]
    Beta,
    /// `G(t) = t`.
    #[serde(rename = "uniform")]
    Uniform,
}

impl NullMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            NullMethod::Symmetric => "1",
            NullMethod::NormalApprox => "1n",
            NullMethod::Composite => "2",
            NullMethod::Beta => "beta",
            NullMethod::Uniform => "uniform",
        }
    }

    fn assumes_median(self) -> bool {
        matches!(self, NullMethod::NormalApprox | NullMethod::Composite | NullMethod::Beta)
    }
}

impl fmt::Display for NullMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NullMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1" | "I" => NullMethod::Symmetric,
            "1n" | "I-normal" => NullMethod::NormalApprox,
            "2" | "II" => NullMethod::Composite,
            "beta" => NullMethod::Beta,
            "uniform" => NullMethod::Uniform,
            other => return Err(Error::InvalidParameter(format!("unknown null method '{other}'"))),
        })
    }
}

/// Settings of the local procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Split point for the null-count step of the composite method;
    /// defaults to `lambda`.
    pub n0_lambda: Option<f64>,
    /// Defaults to the cross of the lattice's dimensionality.
    pub neighborhood: Option<NeighborhoodSpec>,
    pub filter: FilterKind,
    pub method: NullMethod,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            lambda: 0.1,
            n0_lambda: None,
            neighborhood: None,
            filter: FilterKind::Median,
            method: NullMethod::Symmetric,
            seed: 0,
            repetitions: 1,
        }
    }
}

impl LocalConfig {
    pub fn neighborhood_for(&self, dims: &[usize]) -> NeighborhoodSpec {
        self.neighborhood.unwrap_or_else(|| NeighborhoodSpec::cross_for(dims.len()))
    }

    pub fn table_for(&self, dims: &[usize]) -> Result<NeighborhoodTable> {
        build_neighborhoods(dims, self.neighborhood_for(dims))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub pstar: Lattice,
    pub null: NullCdf,
    pub fit: Option<Method2Fit>,
    pub curve: FdrCurve,
    pub mask: RejectionMask,
}

/// Null CDF of `pstar` by `cfg.method`. The composite method also needs the
/// raw p-values `p`.
pub fn estimate_null(
    p: Option<&Lattice>,
    pstar: &Lattice,
    nbrs: &NeighborhoodTable,
    cfg: &LocalConfig,
) -> Result<(NullCdf, Option<Method2Fit>)> {
    if cfg.filter == FilterKind::Mean && cfg.method.assumes_median() {
        return Err(Error::InvalidParameter(format!(
            "null method {} describes median-aggregated values; use method 1 or uniform with the mean filter",
            cfg.method
        )));
    }
    let k = nbrs.full_size();
    Ok(match cfg.method {
        NullMethod::Symmetric => (method1_ghat(pstar)?, None),
        NullMethod::NormalApprox => (NullCdf::normal(k)?, None),
        NullMethod::Beta => (NullCdf::beta(k)?, None),
        NullMethod::Uniform => (NullCdf::Uniform, None),
        NullMethod::Composite => {
            let p = p.ok_or_else(|| {
                Error::InvalidParameter("the composite null method needs the raw p-values".into())
            })?;
            let fit = method2_ghat_with(
                p,
                pstar,
                nbrs,
                &Method2Options {
                    lambda: cfg.n0_lambda.unwrap_or(cfg.lambda),
                    repetitions: cfg.repetitions,
                    seed: cfg.seed,
                },
            )?;
            (fit.cdf.clone(), Some(fit))
        }
    })
}

/// Null estimation, threshold and rejections on already aggregated values.
pub fn run_local_on_pstar(pstar: Lattice, p: Option<&Lattice>, cfg: &LocalConfig) -> Result<LocalOutcome> {
    pstar.ensure_probabilities()?;
    let nbrs = cfg.table_for(pstar.dims())?;
    let (null, fit) = estimate_null(p, &pstar, &nbrs, cfg)?;
    let curve = threshold(&pstar, cfg.lambda, cfg.alpha, Estimator::Local(&null))?;
    let mask = reject(&pstar, curve.t_alpha);
    Ok(LocalOutcome {
        pstar,
        null,
        fit,
        curve,
        mask,
    })
}

/// Aggregation followed by [`run_local_on_pstar`].
pub fn run_local(p: &Lattice, cfg: &LocalConfig) -> Result<LocalOutcome> {
    let nbrs = cfg.table_for(p.dims())?;
    let pstar = aggregate(p, &nbrs, cfg.filter)?;
    run_local_on_pstar(pstar, Some(p), cfg)
}

/// The conventional procedure on raw p-values.
pub fn run_conventional(p: &Lattice, alpha: f64, lambda: f64) -> Result<(FdrCurve, RejectionMask)> {
    p.ensure_probabilities()?;
    let curve = threshold(p, lambda, alpha, Estimator::Conventional)?;
    let mask = reject(p, curve.t_alpha);
    Ok((curve, mask))
}
