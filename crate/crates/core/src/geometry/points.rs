use std::io::BufRead;

use crate::error::{H2Error, Result};

/// A set of points in 1 to 3 spatial dimensions, stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(H2Error::InvalidArgument(format!("unsupported dimension {dim}")));
        }
        if coords.is_empty() {
            return Err(H2Error::Structure("empty point cloud".into()));
        }
        if coords.len() % dim != 0 {
            return Err(H2Error::InvalidArgument("coordinate count is not a multiple of dim".into()));
        }
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(H2Error::InvalidArgument(format!("non-finite coordinate at point {}", bad / dim)));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Regular cell-centred grid with `counts[d]` points along axis `d`.
    /// The spacing is `side / max(counts)` so the longest axis spans `[0, side]`.
    pub fn grid(counts: &[usize], side: f64) -> Result<Self> {
        let dim = counts.len();
        if counts.iter().any(|&c| c == 0) {
            return Err(H2Error::InvalidArgument("grid with an empty axis".into()));
        }
        let h = side / *counts.iter().max().unwrap_or(&1) as f64;
        let total: usize = counts.iter().product();
        let mut coords = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            for d in 0..dim {
                coords.push((idx[d] as f64 + 0.5) * h);
            }
            for d in 0..dim {
                idx[d] += 1;
                if idx[d] < counts[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        PointCloud::new(dim, coords)
    }

    /// Grid used by the 2D and 3D test families: `n` points on a grid of side
    /// length `side`, as close to a cube as powers of two allow.
    pub fn test_family(dim: usize, n: usize, side: f64) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(H2Error::InvalidArgument(format!("test family needs a power-of-two size, got {n}")));
        }
        let log = n.trailing_zeros() as usize;
        let counts: Vec<usize> = (0..dim)
            .map(|d| 1usize << (log / dim + usize::from(d < log % dim)))
            .collect();
        PointCloud::grid(&counts, side)
    }

    /// Reads one point per line; coordinates separated by whitespace or
    /// commas. Blank lines and lines starting with `#` are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut dim = 0;
        let mut coords = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|e| {
                        H2Error::InvalidArgument(format!("line {}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if dim == 0 {
                dim = vals.len();
            } else if vals.len() != dim {
                return Err(H2Error::InvalidArgument(format!(
                    "line {}: expected {dim} coordinates, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            coords.extend(vals);
        }
        if dim == 0 {
            return Err(H2Error::Structure("empty point cloud".into()));
        }
        PointCloud::new(dim, coords)
    }

    /// Points whose indices are listed, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud::new(self.dim, coords)
    }
}
