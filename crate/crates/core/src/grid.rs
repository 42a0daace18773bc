//! Lattice containers and neighborhood construction.
//!
//! Sites are addressed by a flat row-major index (last coordinate fastest),
//! so 2D and 3D fields share every code path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn validate_dims(dims: &[usize]) -> Result<usize> {
    if !(2..=3).contains(&dims.len()) || dims.contains(&0) {
        return Err(Error::InvalidDims(dims.to_vec()));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidDims(dims.to_vec()))
}

fn coords_of(dims: &[usize], mut index: usize) -> Vec<usize> {
    let mut coords = vec![0; dims.len()];
    for axis in (0..dims.len()).rev() {
        coords[axis] = index % dims[axis];
        index /= dims[axis];
    }
    coords
}

fn index_of(dims: &[usize], coords: &[usize]) -> Option<usize> {
    if coords.len() != dims.len() {
        return None;
    }
    let mut index = 0;
    for (&c, &d) in coords.iter().zip(dims) {
        if c >= d {
            return None;
        }
        index = index * d + c;
    }
    Some(index)
}

/// Dense scalar field on a 2D or 3D lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLattice")]
pub struct Lattice {
    dims: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawLattice {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<RawLattice> for Lattice {
    type Error = Error;

    fn try_from(raw: RawLattice) -> Result<Self> {
        Lattice::new(raw.dims, raw.values)
    }
}

impl Lattice {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected = validate_dims(&dims)?;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                dims,
                expected,
                found: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn filled(dims: Vec<usize>, value: f64) -> Result<Self> {
        let n = validate_dims(&dims)?;
        Ok(Self {
            dims,
            values: vec![value; n],
        })
    }

    /// Builds a lattice by evaluating `f` at every site's coordinates.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = validate_dims(&dims)?;
        let values = (0..n).map(|i| f(&coords_of(&dims, i))).collect();
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, coords: &[usize]) -> Option<f64> {
        index_of(&self.dims, coords).map(|i| self.values[i])
    }

    pub fn index_of(&self, coords: &[usize]) -> Option<usize> {
        index_of(&self.dims, coords)
    }

    pub fn coords_of(&self, index: usize) -> Vec<usize> {
        coords_of(&self.dims, index)
    }

    /// Applies `f` sitewise, keeping the dims.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Lattice {
        Lattice {
            dims: self.dims.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Checks the p-value invariant: every value lies in `[0, 1]`.
    pub fn ensure_probabilities(&self) -> Result<()> {
        match self
            .values
            .iter()
            .position(|v| !(0.0..=1.0).contains(v))
        {
            Some(site) => Err(Error::NotAProbability {
                site,
                value: self.values[site],
            }),
            None => Ok(()),
        }
    }

    pub fn ensure_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims != dims {
            return Err(Error::DimsMismatch {
                expected: dims.to_vec(),
                found: self.dims.clone(),
            });
        }
        Ok(())
    }
}

/// Boolean field on a lattice. Used both for ground truth (true = signal)
/// and for rejection sets (true = null hypothesis rejected).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    dims: Vec<usize>,
    values: Vec<bool>,
}

pub type TruthMask = Mask;
pub type RejectionMask = Mask;

impl Mask {
    pub fn new(dims: Vec<usize>, values: Vec<bool>) -> Result<Self> {
        let expected = validate_dims(&dims)?;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                dims,
                expected,
                found: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> bool) -> Result<Self> {
        let n = validate_dims(&dims)?;
        let values = (0..n).map(|i| f(&coords_of(&dims, i))).collect();
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, coords: &[usize]) -> Option<bool> {
        index_of(&self.dims, coords).map(|i| self.values[i])
    }

    /// True when every set site of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims == other.dims
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(&a, &b)| !a || b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "param")]
pub enum NeighborhoodShape {
    /// Site plus its four axis neighbors in 2D.
    Cross2d5,
    /// Site plus its six axis neighbors in 3D.
    Cross3d7,
    /// The `k` lattice offsets nearest in Euclidean distance, the site included.
    Knn(usize),
    /// All lattice offsets within Euclidean distance `r`.
    Radius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderPolicy {
    /// Drop neighbors that fall outside the lattice.
    #[default]
    Truncate,
    /// Reflect outside coordinates back in (`-1 -> 1`, `n -> n-2`).
    Mirror,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub shape: NeighborhoodShape,
    pub border: BorderPolicy,
}

impl NeighborhoodSpec {
    pub fn new(shape: NeighborhoodShape, border: BorderPolicy) -> Self {
        Self { shape, border }
    }

    /// The cross shape matching the lattice dimensionality, truncated at borders.
    pub fn cross_for(ndim: usize) -> Self {
        let shape = if ndim == 3 {
            NeighborhoodShape::Cross3d7
        } else {
            NeighborhoodShape::Cross2d5
        };
        Self::new(shape, BorderPolicy::Truncate)
    }

    /// Offsets relative to a site, self first, then by distance with
    /// lexicographic tie-breaking.
    pub fn stencil(&self, ndim: usize, n_sites: usize) -> Result<Vec<Vec<isize>>> {
        let axis_cross = |want: usize, name: &str| -> Result<Vec<Vec<isize>>> {
            if ndim != want {
                return Err(Error::InvalidSpec(format!(
                    "{name} needs a {want}D lattice, got {ndim}D"
                )));
            }
            let mut offsets = vec![vec![0; ndim]];
            for axis in 0..ndim {
                for step in [-1, 1] {
                    let mut o = vec![0; ndim];
                    o[axis] = step;
                    offsets.push(o);
                }
            }
            Ok(offsets)
        };
        match self.shape {
            NeighborhoodShape::Cross2d5 => axis_cross(2, "cross2d5"),
            NeighborhoodShape::Cross3d7 => axis_cross(3, "cross3d7"),
            NeighborhoodShape::Knn(k) => {
                if k == 0 {
                    return Err(Error::InvalidSpec("knn requires k >= 1".into()));
                }
                if k > n_sites {
                    return Err(Error::InvalidSpec(format!(
                        "knn({k}) exceeds the {n_sites} sites of the lattice"
                    )));
                }
                let mut reach = 1isize;
                loop {
                    let ball = ball_offsets(ndim, reach as f64);
                    if ball.len() >= k {
                        return Ok(ball.into_iter().take(k).collect());
                    }
                    reach += 1;
                }
            }
            NeighborhoodShape::Radius(r) => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "radius must be positive and finite, got {r}"
                    )));
                }
                Ok(ball_offsets(ndim, r))
            }
        }
    }
}

fn ball_offsets(ndim: usize, radius: f64) -> Vec<Vec<isize>> {
    let reach = radius.floor() as isize;
    let r2 = radius * radius;
    let side = (2 * reach + 1) as usize;
    let total = side.pow(ndim as u32);
    let mut offsets: Vec<(isize, Vec<isize>)> = (0..total)
        .filter_map(|mut code| {
            let mut o = vec![0isize; ndim];
            for axis in (0..ndim).rev() {
                o[axis] = (code % side) as isize - reach;
                code /= side;
            }
            let d2: isize = o.iter().map(|c| c * c).sum();
            ((d2 as f64) <= r2).then_some((d2, o))
        })
        .collect();
    offsets.sort();
    offsets.into_iter().map(|(_, o)| o).collect()
}

fn reflect(coord: isize, extent: usize) -> usize {
    if extent == 1 {
        return 0;
    }
    let period = 2 * (extent as isize - 1);
    let m = coord.rem_euclid(period);
    if m < extent as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Per-site neighbor lists in compressed row form. Each list starts with
/// the site itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodTable {
    dims: Vec<usize>,
    spec: NeighborhoodSpec,
    full_size: usize,
    starts: Vec<usize>,
    indices: Vec<usize>,
}

impl NeighborhoodTable {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spec(&self) -> NeighborhoodSpec {
        self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.starts.len() - 1
    }

    /// Neighborhood size `k` at an interior site.
    pub fn full_size(&self) -> usize {
        self.full_size
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.indices[self.starts[site]..self.starts[site + 1]]
    }

    /// Effective size `k_v` at `site`.
    pub fn size(&self, site: usize) -> usize {
        self.starts[site + 1] - self.starts[site]
    }

    pub fn ensure_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims != dims {
            return Err(Error::DimsMismatch {
                expected: self.dims.clone(),
                found: dims.to_vec(),
            });
        }
        Ok(())
    }
}

pub fn build_neighborhoods(dims: &[usize], spec: NeighborhoodSpec) -> Result<NeighborhoodTable> {
    let n = validate_dims(dims)?;
    let stencil = spec.stencil(dims.len(), n)?;
    let mut starts = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(n * stencil.len());
    let mut target = vec![0usize; dims.len()];
    starts.push(0);
    for site in 0..n {
        let here = coords_of(dims, site);
        for offset in &stencil {
            let mut inside = true;
            for axis in 0..dims.len() {
                let c = here[axis] as isize + offset[axis];
                target[axis] = if (0..dims[axis] as isize).contains(&c) {
                    c as usize
                } else {
                    match spec.border {
                        BorderPolicy::Truncate => {
                            inside = false;
                            break;
                        }
                        BorderPolicy::Mirror => reflect(c, dims[axis]),
                    }
                };
            }
            if inside {
                indices.push(index_of(dims, &target).expect("coordinates within dims"));
            }
        }
        starts.push(indices.len());
    }
    Ok(NeighborhoodTable {
        dims: dims.to_vec(),
        spec,
        full_size: stencil.len(),
        starts,
        indices,
    })
}
