//! Lack-of-identification analysis.
//!
//! As the number of tests grows, each plug-in FDR estimate converges to a
//! deterministic curve in `t`. Its infimum over `(0, 1]` is the smallest
//! control level `α_∞` at which the procedure can still reject anything
//! with a positive p-value; `1 − α_∞` is its endurance. The limit curves
//! are driven by the alternative tail at the null level,
//! `G1(t) = 1 − F1(F0⁻¹(1 − t))`, and for the local procedure by the
//! median laws `G0*(t) = B(t)` and `G1*(t) = B(G1(t))`, `B` the CDF of the
//! median of `k` uniforms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::nulldist::{beta_median_cdf, check_lambda};

/// Null `F0` and alternative `F1` of a one-sided test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistModel {
    /// `F0` is Exp(1) shifted to mean zero; `F1` is `F0` shifted by `c`.
    ExponentialShift { c: f64 },
    /// `F0 = N(0, 1)`, `F1 = N(c, sigma²)`.
    Normal { c: f64, sigma: f64 },
    /// `F0 = t(d0)`, `F1 = c + t(d1)`.
    StudentT { c: f64, d0: f64, d1: f64 },
}

fn bad(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

impl DistModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |cond: bool, msg: &str| if cond { Ok(()) } else { Err(bad(format!("{msg} in {self:?}"))) };
        match *self {
            DistModel::ExponentialShift { c } => ok(c > 0.0 && c.is_finite(), "C must be positive"),
            DistModel::Normal { c, sigma } => {
                ok(c > 0.0 && c.is_finite(), "C must be positive")?;
                ok(sigma > 0.0 && sigma.is_finite(), "sigma must be positive")
            }
            DistModel::StudentT { c, d0, d1 } => {
                ok(c > 0.0 && c.is_finite(), "C must be positive")?;
                ok(d0 >= 1.0 && d1 >= 1.0, "degrees of freedom must be at least 1")
            }
        }
    }

    fn normal(mean: f64, sd: f64) -> Normal {
        Normal::new(mean, sd).expect("validated parameters")
    }

    fn student(location: f64, freedom: f64) -> StudentsT {
        StudentsT::new(location, 1.0, freedom).expect("validated parameters")
    }

    pub fn null_cdf(&self, x: f64) -> f64 {
        match *self {
            DistModel::ExponentialShift { .. } => 1.0 - self.null_sf(x),
            DistModel::Normal { .. } => Self::normal(0.0, 1.0).cdf(x),
            DistModel::StudentT { d0, .. } => Self::student(0.0, d0).cdf(x),
        }
    }

    /// `1 − F0(x)`, computed without cancellation in the upper tail.
    pub fn null_sf(&self, x: f64) -> f64 {
        match *self {
            DistModel::ExponentialShift { .. } => (-(x + 1.0)).exp().min(1.0),
            DistModel::Normal { .. } => Self::normal(0.0, 1.0).sf(x),
            DistModel::StudentT { d0, .. } => Self::student(0.0, d0).sf(x),
        }
    }

    pub fn null_pdf(&self, x: f64) -> f64 {
        match *self {
            DistModel::ExponentialShift { .. } => {
                if x > -1.0 {
                    (-(x + 1.0)).exp()
                } else {
                    0.0
                }
            }
            DistModel::Normal { .. } => Self::normal(0.0, 1.0).pdf(x),
            DistModel::StudentT { d0, .. } => Self::student(0.0, d0).pdf(x),
        }
    }

    pub fn null_inverse_cdf(&self, u: f64) -> f64 {
        self.null_isf(1.0 - u)
    }

    /// `F0⁻¹(1 − t)`, accurate for small `t`.
    pub fn null_isf(&self, t: f64) -> f64 {
        match *self {
            DistModel::ExponentialShift { .. } => -t.ln() - 1.0,
            // symmetric nulls: F0⁻¹(1 − t) = −F0⁻¹(t)
            DistModel::Normal { .. } => -Self::normal(0.0, 1.0).inverse_cdf(t),
            DistModel::StudentT { d0, .. } => -Self::student(0.0, d0).inverse_cdf(t),
        }
    }

    pub fn alt_cdf(&self, x: f64) -> f64 {
        match *self {
            DistModel::ExponentialShift { .. } => 1.0 - self.alt_sf(x),
            DistModel::Normal { c, sigma } => Self::normal(c, sigma).cdf(x),
            DistModel::StudentT { c, d1, .. } => Self::student(c, d1).cdf(x),
        }
    }

    pub fn alt_sf(&self, x: f64) -> f64 {
        match *self {
            DistModel::ExponentialShift { c } => (-(x + 1.0 - c)).exp().min(1.0),
            DistModel::Normal { c, sigma } => Self::normal(c, sigma).sf(x),
            DistModel::StudentT { c, d1, .. } => Self::student(c, d1).sf(x),
        }
    }

    pub fn alt_pdf(&self, x: f64) -> f64 {
        match *self {
            DistModel::ExponentialShift { c } => {
                if x + 1.0 > c {
                    (-(x + 1.0 - c)).exp()
                } else {
                    0.0
                }
            }
            DistModel::Normal { c, sigma } => Self::normal(c, sigma).pdf(x),
            DistModel::StudentT { c, d1, .. } => Self::student(c, d1).pdf(x),
        }
    }

    /// Probability that an alternative p-value falls at or below `t`.
    pub fn alt_pvalue_cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t >= 1.0 {
            return Ok(1.0);
        }
        let x = self.null_isf(t);
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "null quantile at upper tail {t} is not finite for {self:?}"
            )));
        }
        Ok(self.alt_sf(x).clamp(0.0, 1.0))
    }
}

fn check_pi0(pi0: f64) -> Result<()> {
    if !(pi0 > 0.0 && pi0 <= 1.0) {
        return Err(bad(format!("pi0 must lie in (0, 1], got {pi0}")));
    }
    Ok(())
}

/// Limit of the conventional estimate at threshold `t`.
pub fn limit_fdr(model: &DistModel, lambda: f64, pi0: f64, t: f64) -> Result<f64> {
    let pi1 = 1.0 - pi0;
    let g1_lambda = model.alt_pvalue_cdf(lambda)?;
    let g1_t = model.alt_pvalue_cdf(t)?;
    let nulls_above = pi0 * (1.0 - lambda) + pi1 * (1.0 - g1_lambda);
    Ok(nulls_above * t / ((pi0 * t + pi1 * g1_t) * (1.0 - lambda)))
}

/// Limit of the local estimate at threshold `t` for odd neighborhood size `k`,
/// with a vanishing share of null sites near the signal.
pub fn limit_fdrl(model: &DistModel, lambda: f64, pi0: f64, k: usize, t: f64) -> Result<f64> {
    let pi1 = 1.0 - pi0;
    let b = |x: f64| beta_median_cdf(k, x);
    let g0_lambda = b(lambda)?;
    let g1_lambda = b(model.alt_pvalue_cdf(lambda)?)?;
    let g0_t = b(t)?;
    let g1_t = b(model.alt_pvalue_cdf(t)?)?;
    let nulls_above = pi0 * (1.0 - g0_lambda) + pi1 * (1.0 - g1_lambda);
    Ok(nulls_above * g0_t / ((pi0 * g0_t + pi1 * g1_t) * (1.0 - g0_lambda)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Fdr,
    /// Local procedure with a five-point median neighborhood.
    FdrlK5,
}

/// Closed form of `α_∞` under the exponential-shift model.
pub fn alpha_inf_exponential(c: f64, lambda: f64, pi0: f64, procedure: Procedure) -> Result<f64> {
    DistModel::ExponentialShift { c }.validate()?;
    check_lambda(lambda)?;
    check_pi0(pi0)?;
    let pi1 = 1.0 - pi0;
    let ec = c.exp();
    // G1(t) = min(1, t·e^C)
    let g1_lambda = (lambda * ec).min(1.0);
    Ok(match procedure {
        Procedure::Fdr => (pi0 + pi1 * (1.0 - g1_lambda) / (1.0 - lambda)) / (pi0 + pi1 * ec),
        Procedure::FdrlK5 => {
            let b = |x: f64| beta_median_cdf(5, x).expect("k = 5 is odd");
            (pi0 + pi1 * (1.0 - b(g1_lambda)) / (1.0 - b(lambda))) / (pi0 + pi1 * ec.powi(3))
        }
    })
}

/// Geometric threshold grid on `[t_min, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_min: 1e-8,
            points: 10_000,
        }
    }
}

/// Heavy-tailed quantiles lose accuracy below this level, so grids stop here.
pub const GRID_FLOOR: f64 = 1e-8;

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.points < 1000 {
            return Err(bad(format!("grid needs at least 1000 points, got {}", self.points)));
        }
        if !(self.t_min >= GRID_FLOOR && self.t_min < 1.0) {
            return Err(bad(format!(
                "t_min must lie in [{GRID_FLOOR}, 1), got {}",
                self.t_min
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        let log_min = self.t_min.ln();
        let mut grid: Vec<f64> = (0..self.points)
            .map(|i| (log_min * (1.0 - i as f64 / last)).exp())
            .collect();
        grid[0] = self.t_min;
        grid[self.points - 1] = 1.0;
        grid
    }

    /// The coarser grid: every other point of the upper half (in log scale).
    fn coarse_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let half = (self.points - 1) / 2;
        (half..self.points).filter(move |i| (i - half).is_multiple_of(2) || *i == self.points - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub t_min: f64,
    pub points: usize,
    /// Infima over the coarse subgrid, which stops at `sqrt(t_min)`.
    pub coarse_fdr: f64,
    pub coarse_fdrl: f64,
    pub coarse_t_min: f64,
    pub argmin_fdr: f64,
    pub argmin_fdrl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipReport {
    pub model: DistModel,
    pub lambda: f64,
    pub pi0: f64,
    pub k: usize,
    pub alpha_inf_fdr: f64,
    pub alpha_inf_fdrl: f64,
    pub endurance_fdr: f64,
    pub endurance_fdrl: f64,
    /// Present for grid-based values; analytic values carry `None`.
    pub grid: Option<GridReport>,
}

impl LipReport {
    fn new(model: DistModel, lambda: f64, pi0: f64, k: usize, fdr: f64, fdrl: f64, grid: Option<GridReport>) -> Self {
        let fdr = fdr.clamp(0.0, 1.0);
        let fdrl = fdrl.clamp(0.0, 1.0);
        Self {
            model,
            lambda,
            pi0,
            k,
            alpha_inf_fdr: fdr,
            alpha_inf_fdrl: fdrl,
            endurance_fdr: 1.0 - fdr,
            endurance_fdrl: 1.0 - fdrl,
            grid,
        }
    }
}

/// Closed-form report for the exponential-shift model with `k = 5`.
pub fn lip_report_exponential(c: f64, lambda: f64, pi0: f64) -> Result<LipReport> {
    let fdr = alpha_inf_exponential(c, lambda, pi0, Procedure::Fdr)?;
    let fdrl = alpha_inf_exponential(c, lambda, pi0, Procedure::FdrlK5)?;
    Ok(LipReport::new(
        DistModel::ExponentialShift { c },
        lambda,
        pi0,
        5,
        fdr,
        fdrl,
        None,
    ))
}

fn argmin(values: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    values
        .filter(|(_, v)| v.is_finite())
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Grid infimum of both limit curves, reported at two refinement levels.
///
/// Points where the limit is not finite (the median laws underflow for
/// large `k` at tiny `t`) are skipped.
pub fn alpha_inf_numeric(model: &DistModel, lambda: f64, pi0: f64, k: usize, grid: GridSpec) -> Result<LipReport> {
    model.validate()?;
    check_lambda(lambda)?;
    check_pi0(pi0)?;
    grid.validate()?;
    beta_median_cdf(k, 0.5)?;
    let ts = grid.points();
    let fdr: Vec<f64> = ts
        .iter()
        .map(|&t| limit_fdr(model, lambda, pi0, t))
        .collect::<Result<_>>()?;
    let fdrl: Vec<f64> = ts
        .iter()
        .map(|&t| limit_fdrl(model, lambda, pi0, k, t))
        .collect::<Result<_>>()?;

    let (t_fdr, min_fdr) = argmin(ts.iter().copied().zip(fdr.iter().copied()));
    let (t_fdrl, min_fdrl) = argmin(ts.iter().copied().zip(fdrl.iter().copied()));
    let coarse = |vals: &[f64]| argmin(grid.coarse_indices().map(|i| (ts[i], vals[i]))).1;
    if !min_fdr.is_finite() || !min_fdrl.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "limit curves not finite anywhere on the grid for {model:?}"
        )));
    }
    let report = GridReport {
        t_min: grid.t_min,
        points: grid.points,
        coarse_fdr: coarse(&fdr),
        coarse_fdrl: coarse(&fdrl),
        coarse_t_min: ts[grid.coarse_indices().next().expect("non-empty grid")],
        argmin_fdr: t_fdr,
        argmin_fdrl: t_fdrl,
    };
    Ok(LipReport::new(*model, lambda, pi0, k, min_fdr, min_fdrl, Some(report)))
}

/// `(1 − α_∞^FDR, 1 − α_∞^FDR_L)`.
pub fn endurance(report: &LipReport) -> (f64, f64) {
    (1.0 - report.alpha_inf_fdr, 1.0 - report.alpha_inf_fdrl)
}

/// Fixed-width text table, one column per report.
pub fn format_table(columns: &[(String, &LipReport)]) -> String {
    let mut out = String::new();
    let width = columns.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(8);
    let _ = write!(out, "{:<12}", "C");
    for (label, _) in columns {
        let _ = write!(out, " {label:>width$}");
    }
    out.push('\n');
    for (name, pick) in [
        ("alpha_FDR", (|r: &LipReport| r.alpha_inf_fdr) as fn(&LipReport) -> f64),
        ("alpha_FDR_L", |r: &LipReport| r.alpha_inf_fdrl),
    ] {
        let _ = write!(out, "{name:<12}");
        for (_, r) in columns {
            let _ = write!(out, " {:>width$.4}", pick(r));
        }
        out.push('\n');
    }
    out
}
