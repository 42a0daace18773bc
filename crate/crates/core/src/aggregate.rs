//! Local aggregation of p-values into p*-values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Lattice, NeighborhoodTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    #[default]
    Median,
    Mean,
}

/// Median of `values`, reordering them in place. An even count yields the
/// midpoint of the two central order statistics.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    assert!(n > 0, "median of an empty neighborhood");
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

fn mean_in_place(values: &mut [f64]) -> f64 {
    // fixed summation order keeps the result independent of neighbor order
    values.sort_unstable_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    mean.clamp(values[0], values[values.len() - 1])
}

impl FilterKind {
    pub fn apply(self, values: &mut [f64]) -> f64 {
        match self {
            FilterKind::Median => median_in_place(values),
            FilterKind::Mean => mean_in_place(values),
        }
    }
}

/// Replaces each site's p-value by the filtered value of its neighborhood.
pub fn aggregate(p: &Lattice, nbrs: &NeighborhoodTable, filter: FilterKind) -> Result<Lattice> {
    nbrs.ensure_dims(p.dims())?;
    p.ensure_probabilities()?;
    let values = p.values();
    let out: Vec<f64> = (0..p.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, site| {
            buf.clear();
            buf.extend(nbrs.neighbors(site).iter().map(|&u| values[u]));
            filter.apply(buf)
        })
        .collect();
    Lattice::new(p.dims().to_vec(), out)
}
