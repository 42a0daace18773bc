//! Plug-in FDR estimates, data-driven thresholds and rejection sets.
//!
//! Both estimators share one shape,
//!
//! ```text
//! FDR(t) = W(λ) · G(t) / ((R(t) ∨ 1) · (1 − G(λ)))
//! ```
//!
//! with `W(λ) = #{x > λ}`, `R(t) = #{x ≤ t}` and `G` the null CDF of the
//! tested values: `G(t) = t` for raw p-values, an estimated p* null for the
//! local procedure.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Lattice, Mask, RejectionMask};
use crate::nulldist::{check_lambda, NullCdf};

fn count_at_most(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&x| x <= t)
}

#[inline]
fn plug_in(w_lambda: usize, null_t: f64, r_t: usize, null_lambda: f64) -> f64 {
    w_lambda as f64 * null_t / (r_t.max(1) as f64 * (1.0 - null_lambda))
}

/// Conventional estimate at threshold `t` on raw p-values.
pub fn fdr_hat(p: &Lattice, lambda: f64, t: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let w = p.values().iter().filter(|&&x| x > lambda).count();
    let r = p.values().iter().filter(|&&x| x <= t).count();
    Ok(plug_in(w, t, r, lambda))
}

/// Local estimate at threshold `t` on p*-values with null CDF `gstar`.
pub fn fdrl_hat(pstar: &Lattice, lambda: f64, t: f64, gstar: &NullCdf) -> Result<f64> {
    check_lambda(lambda)?;
    let g_lambda = gstar.eval(lambda);
    if g_lambda >= 1.0 {
        return Err(degenerate(lambda));
    }
    let w = pstar.values().iter().filter(|&&x| x > lambda).count();
    let r = pstar.values().iter().filter(|&&x| x <= t).count();
    Ok(plug_in(w, gstar.eval(t), r, g_lambda))
}

fn degenerate(lambda: f64) -> Error {
    Error::DegenerateNull(format!(
        "null CDF equals 1 at lambda = {lambda}; lower lambda or widen the null estimate"
    ))
}

/// Which estimator a curve uses.
#[derive(Debug, Clone, Copy)]
pub enum Estimator<'a> {
    /// Raw p-values against a uniform null.
    Conventional,
    /// Aggregated p*-values against the given null CDF.
    Local(&'a NullCdf),
}

/// Estimated FDR over the candidate thresholds and the threshold it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrCurve {
    pub thresholds: Vec<f64>,
    pub estimates: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub t_alpha: f64,
    pub rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrSummary {
    pub alpha: f64,
    pub lambda: f64,
    pub t_alpha: f64,
    pub rejections: usize,
}

impl FdrCurve {
    pub fn summary(&self) -> FdrSummary {
        FdrSummary {
            alpha: self.alpha,
            lambda: self.lambda,
            t_alpha: self.t_alpha,
            rejections: self.rejections,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,estimate\n");
        for (t, e) in self.thresholds.iter().zip(&self.estimates) {
            writeln!(out, "{t},{e}").expect("writing to a String");
        }
        out
    }

    /// Threshold for another level, reusing the evaluated curve.
    pub fn t_alpha_at(&self, alpha: f64) -> f64 {
        pick_threshold(&self.thresholds, &self.estimates, alpha)
    }
}

fn pick_threshold(thresholds: &[f64], estimates: &[f64], alpha: f64) -> f64 {
    thresholds
        .iter()
        .zip(estimates)
        .rev()
        .find(|(_, &e)| e <= alpha)
        .map_or(0.0, |(&t, _)| t)
}

/// Evaluates the estimator on every distinct observed value plus 1 and
/// takes the largest candidate whose estimate is at most `alpha` (0 if none).
pub fn threshold(values: &Lattice, lambda: f64, alpha: f64, estimator: Estimator<'_>) -> Result<FdrCurve> {
    check_lambda(lambda)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let mut sorted = values.values().to_vec();
    if sorted.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("NaN among tested values".into()));
    }
    sorted.sort_unstable_by(f64::total_cmp);
    let w = sorted.len() - count_at_most(&sorted, lambda);

    let mut thresholds: Vec<f64> = sorted.iter().copied().filter(|x| (0.0..=1.0).contains(x)).collect();
    thresholds.dedup();
    if thresholds.last() != Some(&1.0) {
        thresholds.push(1.0);
    }

    let null_lambda = match estimator {
        Estimator::Conventional => lambda,
        Estimator::Local(g) => {
            let g_lambda = g.eval(lambda);
            if g_lambda >= 1.0 {
                return Err(degenerate(lambda));
            }
            g_lambda
        }
    };
    let estimates: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            let null_t = match estimator {
                Estimator::Conventional => t,
                Estimator::Local(g) => g.eval(t),
            };
            plug_in(w, null_t, count_at_most(&sorted, t), null_lambda)
        })
        .collect();

    let t_alpha = pick_threshold(&thresholds, &estimates, alpha);
    Ok(FdrCurve {
        rejections: count_at_most(&sorted, t_alpha),
        thresholds,
        estimates,
        alpha,
        lambda,
        t_alpha,
    })
}

/// Rejects every site whose value is at most `t_alpha`.
pub fn reject(field: &Lattice, t_alpha: f64) -> RejectionMask {
    Mask::new(
        field.dims().to_vec(),
        field.values().iter().map(|&x| x <= t_alpha).collect(),
    )
    .expect("dims come from a valid lattice")
}
