//! Synthetic signal-plus-noise lattices and detection metrics.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Lattice, Mask, RejectionMask, TruthMask};
use crate::lip::DistModel;
use crate::rng::{stream, NOISE_STREAM};

/// Axis-aligned block of signal sites with a common mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    pub mu: f64,
}

impl Region {
    pub fn new(row: usize, col: usize, height: usize, width: usize, mu: f64) -> Self {
        Self {
            row,
            col,
            height,
            width,
            mu,
        }
    }

    fn contains(&self, r: usize, c: usize) -> bool {
        (self.row..self.row + self.height).contains(&r) && (self.col..self.col + self.width).contains(&c)
    }

    fn overlaps(&self, other: &Region) -> bool {
        self.row < other.row + other.height
            && other.row < self.row + self.height
            && self.col < other.col + other.width
            && other.col < self.col + self.width
    }

    fn area(&self) -> usize {
        self.height * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Five-point cross moving average of a standard normal field, over √5.
    Cross5,
    /// 7×7 box moving average of a standard normal field, over 7.
    Box7,
    /// Exp(1) − 1, independent across sites.
    CenteredExp,
}

impl NoiseKind {
    /// Cells the parent field extends beyond the lattice on each side.
    fn margin(self) -> usize {
        match self {
            NoiseKind::Cross5 => 1,
            NoiseKind::Box7 => 3,
            NoiseKind::CenteredExp => 0,
        }
    }

    /// Null law of a site's statistic.
    pub fn null_model(self) -> DistModel {
        match self {
            NoiseKind::Cross5 | NoiseKind::Box7 => DistModel::Normal { c: 1.0, sigma: 1.0 },
            NoiseKind::CenteredExp => DistModel::ExponentialShift { c: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Example1,
    Example2,
    Example3,
    Exponential,
}

/// A 2D lattice with rectangular signal regions and a noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub dims: [usize; 2],
    pub regions: Vec<Region>,
    pub noise: NoiseKind,
}

impl Scenario {
    /// 258×258, a 60×60 block at mean 4 and a 30×30 block at mean 2.
    pub fn example1() -> Self {
        Self {
            kind: ScenarioKind::Example1,
            dims: [258, 258],
            regions: vec![Region::new(40, 40, 60, 60, 4.0), Region::new(150, 160, 30, 30, 2.0)],
            noise: NoiseKind::Cross5,
        }
    }

    /// 128×128 version of [`Scenario::example1`] with halved blocks.
    pub fn example1_desk() -> Self {
        Self {
            kind: ScenarioKind::Example1,
            dims: [128, 128],
            regions: vec![Region::new(20, 20, 30, 30, 4.0), Region::new(75, 80, 15, 15, 2.0)],
            noise: NoiseKind::Cross5,
        }
    }

    /// Example 1 geometry under 7×7 box-averaged noise.
    pub fn example2() -> Self {
        Self {
            kind: ScenarioKind::Example2,
            noise: NoiseKind::Box7,
            ..Self::example1()
        }
    }

    /// Nineteen 3-wide vertical stripes at mean 4: most null sites near the
    /// signal border a stripe.
    pub fn example3() -> Self {
        let regions = (0..19).map(|i| Region::new(29, 20 + 12 * i, 200, 3, 4.0)).collect();
        Self {
            kind: ScenarioKind::Example3,
            dims: [258, 258],
            regions,
            noise: NoiseKind::Cross5,
        }
    }

    /// 50×50 with 400 signal sites (16%) shifted by `c` under centered
    /// exponential noise.
    pub fn exponential(c: f64) -> Self {
        Self {
            kind: ScenarioKind::Exponential,
            dims: [50, 50],
            regions: vec![Region::new(5, 5, 20, 14, c), Region::new(30, 30, 12, 10, c)],
            noise: NoiseKind::CenteredExp,
        }
    }

    /// Rescales the lattice and every region proportionally.
    pub fn scaled_to(&self, dims: [usize; 2]) -> Self {
        let sr = dims[0] as f64 / self.dims[0] as f64;
        let sc = dims[1] as f64 / self.dims[1] as f64;
        let scale = |x: usize, s: f64| (x as f64 * s).round() as usize;
        let regions = self
            .regions
            .iter()
            .map(|r| Region {
                row: scale(r.row, sr),
                col: scale(r.col, sc),
                height: scale(r.height, sr).max(1),
                width: scale(r.width, sc).max(1),
                mu: r.mu,
            })
            .collect();
        Self {
            dims,
            regions,
            ..self.clone()
        }
    }

    pub fn n_signal(&self) -> usize {
        self.regions.iter().map(Region::area).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidDims(self.dims.to_vec()));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.height == 0 || r.width == 0 || r.row + r.height > self.dims[0] || r.col + r.width > self.dims[1] {
                return Err(Error::InvalidParameter(format!("region {i} ({r:?}) does not fit in {:?}", self.dims)));
            }
            if !r.mu.is_finite() {
                return Err(Error::InvalidParameter(format!("region {i} has non-finite mean")));
            }
            if let Some(j) = self.regions[..i].iter().position(|o| o.overlaps(r)) {
                return Err(Error::InvalidParameter(format!("regions {j} and {i} overlap")));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<TruthMask> {
        self.validate()?;
        Mask::from_fn(self.dims.to_vec(), |c| self.regions.iter().any(|r| r.contains(c[0], c[1])))
    }

    pub fn means(&self) -> Result<Lattice> {
        self.validate()?;
        Lattice::from_fn(self.dims.to_vec(), |c| {
            self.regions
                .iter()
                .find(|r| r.contains(c[0], c[1]))
                .map_or(0.0, |r| r.mu)
        })
    }

    /// The error field alone.
    pub fn noise(&self, seed: u64) -> Result<Lattice> {
        self.validate()?;
        let [rows, cols] = self.dims;
        let mut rng = stream(seed, NOISE_STREAM);
        let values = match self.noise {
            NoiseKind::CenteredExp => (0..rows * cols)
                .map(|_| rng.sample::<f64, _>(Exp1) - 1.0)
                .collect(),
            kind => {
                let m = kind.margin();
                let pc = cols + 2 * m;
                let parent: Vec<f64> = (0..(rows + 2 * m) * pc).map(|_| rng.sample(StandardNormal)).collect();
                let e = |r: usize, c: usize| parent[r * pc + c];
                let mut out = Vec::with_capacity(rows * cols);
                for i in 0..rows {
                    for j in 0..cols {
                        // (i + m, j + m) is the parent cell under site (i, j)
                        let (pi, pj) = (i + m, j + m);
                        out.push(match kind {
                            NoiseKind::Cross5 => {
                                (e(pi - 1, pj) + e(pi, pj) + e(pi + 1, pj) + e(pi, pj - 1) + e(pi, pj + 1))
                                    / 5f64.sqrt()
                            }
                            _ => {
                                let mut s = 0.0;
                                for r in pi - 3..=pi + 3 {
                                    for c in pj - 3..=pj + 3 {
                                        s += e(r, c);
                                    }
                                }
                                s / 7.0
                            }
                        });
                    }
                }
                out
            }
        };
        Lattice::new(self.dims.to_vec(), values)
    }
}

/// Observed statistics `Y = μ + ε` and the truth mask.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<(Lattice, TruthMask)> {
    let means = scenario.means()?;
    let noise = scenario.noise(seed)?;
    let y: Vec<f64> = means.values().iter().zip(noise.values()).map(|(m, e)| m + e).collect();
    Ok((Lattice::new(scenario.dims.to_vec(), y)?, scenario.truth()?))
}

/// Upper-tail p-values `1 − F0(Y)` under the null of `model`.
pub fn pvalues_one_sided(y: &Lattice, model: &DistModel) -> Lattice {
    y.map(|v| model.null_sf(v).clamp(0.0, 1.0))
}

/// Confusion counts of a rejection mask against the truth.
///
/// Retained nulls `u`, rejected nulls `v`, retained signals `t`, rejected
/// signals `s`; `w` and `r` are the retained and rejected totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub u: usize,
    pub v: usize,
    pub t: usize,
    pub s: usize,
    pub w: usize,
    pub r: usize,
    /// `s / n1`; `None` without signal sites.
    pub sensitivity: Option<f64>,
    /// `u / n0`; `None` without null sites.
    pub specificity: Option<f64>,
    pub fdp: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "n,n0,n1,u,v,t,s,w,r,sensitivity,specificity,fdp";

    pub fn csv_fields(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.n0,
            self.n1,
            self.u,
            self.v,
            self.t,
            self.s,
            self.w,
            self.r,
            opt(self.sensitivity),
            opt(self.specificity),
            self.fdp
        )
    }

    /// Row and column sums of the confusion table.
    pub fn is_consistent(&self) -> bool {
        self.u + self.v == self.n0
            && self.t + self.s == self.n1
            && self.w + self.r == self.n
            && self.n0 + self.n1 == self.n
            && self.v + self.s == self.r
    }
}

pub fn metrics(mask: &RejectionMask, truth: &TruthMask) -> Result<MetricsReport> {
    if mask.dims() != truth.dims() {
        return Err(Error::DimsMismatch {
            expected: truth.dims().to_vec(),
            found: mask.dims().to_vec(),
        });
    }
    let (mut u, mut v, mut t, mut s) = (0, 0, 0, 0);
    for (&rejected, &signal) in mask.values().iter().zip(truth.values()) {
        match (signal, rejected) {
            (false, false) => u += 1,
            (false, true) => v += 1,
            (true, false) => t += 1,
            (true, true) => s += 1,
        }
    }
    let (n0, n1, r) = (u + v, t + s, v + s);
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let report = MetricsReport {
        n: n0 + n1,
        n0,
        n1,
        u,
        v,
        t,
        s,
        w: u + t,
        r,
        sensitivity: ratio(s, n1),
        specificity: ratio(u, n0),
        fdp: v as f64 / r.max(1) as f64,
    };
    debug_assert!(report.is_consistent());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn exponential_geometry() {
        let s = Scenario::exponential(8f64.ln());
        let truth = s.truth().unwrap();
        assert_eq!(truth.count(), 400);
        assert_eq!(truth.count() * 100, 16 * truth.len());
    }

    #[test]
    fn exponential_null_mean_is_zero() {
        let s = Scenario::exponential(8f64.ln());
        let (y, truth) = generate(&s, 11).unwrap();
        let nulls: Vec<f64> = y
            .values()
            .iter()
            .zip(truth.values())
            .filter(|(_, &t)| !t)
            .map(|(&v, _)| v)
            .collect();
        let (m, _) = mean_var(&nulls);
        assert!(m.abs() < 3.0 / (nulls.len() as f64).sqrt(), "{m}");
    }

    #[test]
    fn moving_average_noise_has_unit_variance() {
        // pooled over seeds: neighboring errors are correlated, so one
        // lattice carries far fewer effective samples than sites
        for (s, tol) in [(Scenario::example1(), 0.02), (Scenario::example2(), 0.05)] {
            let pooled: Vec<f64> = (0..4).flat_map(|seed| s.noise(seed).unwrap().into_values()).collect();
            let (m, v) = mean_var(&pooled);
            assert!(m.abs() < tol, "{:?} mean {m}", s.kind);
            assert!((v - 1.0).abs() < tol, "{:?} variance {v}", s.kind);
        }
    }

    #[test]
    fn cross_noise_matches_hand_sum() {
        // rebuild the parent field from the same stream and check one site
        let s = Scenario::example1_desk();
        let e = s.noise(5).unwrap();
        let mut rng = stream(5, NOISE_STREAM);
        let parent: Vec<f64> = (0..130 * 130).map(|_| rng.sample(StandardNormal)).collect();
        let p = |r: usize, c: usize| parent[r * 130 + c];
        let (i, j) = (10, 17);
        let expected = (p(i, j + 1) + p(i + 1, j + 1) + p(i + 2, j + 1) + p(i + 1, j) + p(i + 1, j + 2)) / 5f64.sqrt();
        assert!((e.get(&[i, j]).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn generation_is_reproducible() {
        let s = Scenario::example3().scaled_to([64, 64]);
        assert_eq!(generate(&s, 9).unwrap(), generate(&s, 9).unwrap());
        assert_ne!(generate(&s, 9).unwrap().0, generate(&s, 10).unwrap().0);
    }

    #[test]
    fn presets_are_valid() {
        for s in [
            Scenario::example1(),
            Scenario::example1_desk(),
            Scenario::example2(),
            Scenario::example3(),
            Scenario::exponential(2.0),
        ] {
            s.validate().unwrap();
            assert_eq!(s.truth().unwrap().count(), s.n_signal());
        }
        assert_eq!(Scenario::example1().n_signal(), 4500);
    }

    #[test]
    fn bad_geometry_is_rejected() {
        let mut s = Scenario::exponential(1.0);
        s.regions.push(Region::new(45, 45, 10, 2, 1.0));
        assert!(matches!(s.validate(), Err(Error::InvalidParameter(_))));
        let mut s = Scenario::exponential(1.0);
        s.regions.push(Region::new(10, 10, 2, 2, 1.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn pvalue_examples() {
        let e = DistModel::ExponentialShift { c: 1.0 };
        let y = Lattice::new(vec![1, 3], vec![-1.0, -1.0 + 2f64.ln(), -3.0]).unwrap();
        let p = pvalues_one_sided(&y, &e);
        assert_eq!(p.values()[0], 1.0);
        assert!((p.values()[1] - 0.5).abs() < 1e-15);
        assert_eq!(p.values()[2], 1.0);
        let n = DistModel::Normal { c: 1.0, sigma: 1.0 };
        let y = Lattice::new(vec![1, 1], vec![0.0]).unwrap();
        assert_eq!(pvalues_one_sided(&y, &n).values()[0], 0.5);
    }

    #[test]
    fn metric_examples() {
        let truth = Mask::new(vec![2, 2], vec![true, false, false, false]).unwrap();
        let m = metrics(&truth, &truth).unwrap();
        assert_eq!((m.sensitivity, m.specificity, m.fdp), (Some(1.0), Some(1.0), 0.0));

        let all = Mask::new(vec![2, 2], vec![true; 4]).unwrap();
        let m = metrics(&all, &truth).unwrap();
        assert_eq!((m.sensitivity, m.specificity, m.fdp), (Some(1.0), Some(0.0), 0.75));

        let mask = Mask::new(vec![2, 2], vec![true, true, false, false]).unwrap();
        let m = metrics(&mask, &truth).unwrap();
        assert_eq!(m.sensitivity, Some(1.0));
        assert!((m.specificity.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.fdp, 0.5);

        let none = Mask::new(vec![2, 2], vec![false; 4]).unwrap();
        let m = metrics(&none, &none).unwrap();
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.fdp, 0.0);
        let m = metrics(&none, &all).unwrap();
        assert_eq!(m.specificity, None);

        let json = serde_json::to_value(metrics(&none, &none).unwrap()).unwrap();
        assert!(json["sensitivity"].is_null());

        let other = Mask::new(vec![1, 4], vec![false; 4]).unwrap();
        assert!(matches!(metrics(&other, &truth), Err(Error::DimsMismatch { .. })));
    }

    proptest! {
        #[test]
        fn confusion_sums(bits in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
            let n = bits.len();
            let mask = Mask::new(vec![1, n], bits.iter().map(|b| b.0).collect()).unwrap();
            let truth = Mask::new(vec![1, n], bits.iter().map(|b| b.1).collect()).unwrap();
            let m = metrics(&mask, &truth).unwrap();
            prop_assert!(m.is_consistent());
            prop_assert_eq!(m.n, n);
            prop_assert_eq!(m.r, mask.count());
            prop_assert_eq!(m.n1, truth.count());
            prop_assert!((0.0..=1.0).contains(&m.fdp));
        }
    }
}
