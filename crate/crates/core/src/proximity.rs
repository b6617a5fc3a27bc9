//! Spatial proximity matrices.
//!
//! Coordinate data get an exponential kernel `exp(-d / r)` whose range `r` is
//! the longest edge of the Euclidean minimum spanning tree over the sites.
//! Areal data arrive as a binary contiguity matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{map_indices, Parallelism};

/// Planar site coordinates with optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSet {
    sites: Vec<[f64; 2]>,
    site_ids: Option<Vec<String>>,
}

impl CoordinateSet {
    pub fn new(sites: Vec<[f64; 2]>, site_ids: Option<Vec<String>>) -> Result<Self> {
        Self::with_min_sites(sites, site_ids, 2)
    }

    /// Prediction sets may be any non-empty size.
    pub fn new_prediction(sites: Vec<[f64; 2]>, site_ids: Option<Vec<String>>) -> Result<Self> {
        Self::with_min_sites(sites, site_ids, 1)
    }

    fn with_min_sites(
        sites: Vec<[f64; 2]>,
        site_ids: Option<Vec<String>>,
        min: usize,
    ) -> Result<Self> {
        if sites.len() < min {
            return Err(Error::invalid(format!(
                "need at least {min} site(s), got {}",
                sites.len()
            )));
        }
        if let Some(i) = sites
            .iter()
            .position(|s| !s[0].is_finite() || !s[1].is_finite())
        {
            return Err(Error::invalid(format!("non-finite coordinate at site {i}")));
        }
        if let Some(ids) = &site_ids {
            if ids.len() != sites.len() {
                return Err(Error::invalid(
                    "site_ids length differs from number of sites",
                ));
            }
        }
        Ok(CoordinateSet { sites, site_ids })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    pub fn site_ids(&self) -> Option<&[String]> {
        self.site_ids.as_deref()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.sites[i], self.sites[j])
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProximityKind {
    ExponentialKernel { range: f64 },
    BinaryContiguity,
    UserSupplied,
}

/// Symmetric, non-negative proximity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    values: DMatrix<f64>,
    kind: ProximityKind,
    site_ids: Option<Vec<String>>,
    coords: Option<CoordinateSet>,
}

impl ProximityMatrix {
    /// Validates an arbitrary user-supplied proximity matrix.
    pub fn user_supplied(values: DMatrix<f64>, site_ids: Option<Vec<String>>) -> Result<Self> {
        validate_square(&values, false)?;
        Ok(ProximityMatrix {
            values,
            kind: ProximityKind::UserSupplied,
            site_ids,
            coords: None,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> &ProximityKind {
        &self.kind
    }

    pub fn site_ids(&self) -> Option<&[String]> {
        self.site_ids.as_deref()
    }

    /// Training coordinates, present for kernel proximities.
    pub fn coords(&self) -> Option<&CoordinateSet> {
        self.coords.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Longest edge of the Euclidean minimum spanning tree (Prim, O(N^2)).
pub fn mst_longest_edge(coords: &CoordinateSet) -> f64 {
    let n = coords.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut longest: f64 = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut bu = f64::INFINITY;
        for v in 0..n {
            if !in_tree[v] && best[v] < bu {
                bu = best[v];
                u = v;
            }
        }
        in_tree[u] = true;
        longest = longest.max(bu);
        for v in 0..n {
            if !in_tree[v] {
                let d = coords.distance(u, v);
                if d < best[v] {
                    best[v] = d;
                }
            }
        }
    }
    longest
}

/// Exponential-kernel proximity `exp(-d_ij / r)` with `r` the longest MST edge.
pub fn build_kernel_proximity(coords: &CoordinateSet) -> Result<ProximityMatrix> {
    build_kernel_proximity_with(coords, Parallelism::default())
}

pub fn build_kernel_proximity_with(
    coords: &CoordinateSet,
    parallelism: Parallelism,
) -> Result<ProximityMatrix> {
    let range = mst_longest_edge(coords);
    if range <= 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    let n = coords.len();
    let rows = map_indices(parallelism, n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    0.0
                } else {
                    (-coords.distance(i, j) / range).exp()
                }
            })
            .collect::<Vec<f64>>()
    });
    let values = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(ProximityMatrix {
        values,
        kind: ProximityKind::ExponentialKernel { range },
        site_ids: coords.site_ids().map(|s| s.to_vec()),
        coords: Some(coords.clone()),
    })
}

/// Validates a binary contiguity matrix and wraps it.
pub fn build_contiguity_proximity(
    adjacency: DMatrix<f64>,
    site_ids: Option<Vec<String>>,
) -> Result<ProximityMatrix> {
    validate_square(&adjacency, true)?;
    if let Some(ids) = &site_ids {
        if ids.len() != adjacency.nrows() {
            return Err(Error::invalid(format!(
                "{} zone ids for a {}x{} adjacency matrix",
                ids.len(),
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
    }
    Ok(ProximityMatrix {
        values: adjacency,
        kind: ProximityKind::BinaryContiguity,
        site_ids,
        coords: None,
    })
}

fn validate_square(m: &DMatrix<f64>, binary: bool) -> Result<()> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid(format!(
            "proximity matrix must be square, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("proximity matrix needs at least 2 sites"));
    }
    for i in 0..n {
        if m[(i, i)] != 0.0 {
            return Err(Error::Validation {
                row: i,
                col: i,
                message: "nonzero diagonal".into(),
            });
        }
        for j in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation {
                    row: i,
                    col: j,
                    message: format!("entry {v} must be finite and non-negative"),
                });
            }
            if binary && v != 0.0 && v != 1.0 {
                return Err(Error::Validation {
                    row: i,
                    col: j,
                    message: format!("entry {v} is not 0 or 1"),
                });
            }
            if j > i {
                let w = m[(j, i)];
                let scale = v.abs().max(w.abs()).max(1e-300);
                if (v - w).abs() > 1e-12 * scale {
                    return Err(Error::Validation {
                        row: i,
                        col: j,
                        message: format!("asymmetric: [{i},{j}]={v} but [{j},{i}]={w}"),
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coords(pts: &[[f64; 2]]) -> CoordinateSet {
        CoordinateSet::new(pts.to_vec(), None).unwrap()
    }

    #[test]
    fn two_sites_give_exp_minus_one() {
        let p = build_kernel_proximity(&coords(&[[0.0, 0.0], [3.0, 4.0]])).unwrap();
        assert_relative_eq!(p.values()[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(p.values()[(0, 0)], 0.0);
        assert_eq!(p.kind(), &ProximityKind::ExponentialKernel { range: 5.0 });
    }

    #[test]
    fn collinear_sites_use_unit_range() {
        let p = build_kernel_proximity(&coords(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])).unwrap();
        assert_relative_eq!(p.values()[(0, 2)], (-2.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(p.values()[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn duplicates_allowed_identical_rejected() {
        let p = build_kernel_proximity(&coords(&[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])).unwrap();
        assert_eq!(p.values()[(0, 1)], 1.0);
        let err = build_kernel_proximity(&coords(&[[2.0, 2.0], [2.0, 2.0]])).unwrap_err();
        assert_eq!(err, Error::DegenerateGeometry);
    }

    #[test]
    fn coordinate_set_invariants() {
        assert!(CoordinateSet::new(vec![[0.0, 0.0]], None).is_err());
        assert!(CoordinateSet::new(vec![[0.0, 0.0], [f64::NAN, 1.0]], None).is_err());
    }

    #[test]
    fn contiguity_validation() {
        let ok = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(build_contiguity_proximity(ok, None).is_ok());

        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        match build_contiguity_proximity(diag, None).unwrap_err() {
            Error::Validation { row, col, .. } => assert_eq!((row, col), (0, 0)),
            e => panic!("unexpected {e}"),
        }

        let asym = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        match build_contiguity_proximity(asym, None).unwrap_err() {
            Error::Validation { row, col, .. } => assert_eq!((row, col), (1, 2)),
            e => panic!("unexpected {e}"),
        }

        let nonbinary = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!(build_contiguity_proximity(nonbinary, None).is_err());
    }

    #[test]
    fn kernel_is_symmetric_nonnegative() {
        let pts: Vec<[f64; 2]> = (0..30)
            .map(|i| {
                let t = i as f64;
                [(t * 1.7).sin() * 10.0, (t * 0.3).cos() * 7.0 + t * 0.1]
            })
            .collect();
        let p = build_kernel_proximity(&coords(&pts)).unwrap();
        let v = p.values();
        for i in 0..30 {
            assert_eq!(v[(i, i)], 0.0);
            for j in 0..30 {
                assert!(v[(i, j)] >= 0.0);
                assert_eq!(v[(i, j)], v[(j, i)]);
            }
        }
        let seq = build_kernel_proximity_with(&coords(&pts), Parallelism::Sequential).unwrap();
        assert_eq!(seq.values(), v);
    }
}
