use crate::construct::{construct_h2, construct_h2_with_trees, KappaField, KernelSpec};
use crate::dist::DistributedH2;
use crate::error::{H2Error, Result};
use crate::geometry::{depth_for, ClusterTree, PointCloud};
use crate::matvec::{apply, from_tree_order};

/// Fractional diffusion on `[-1, 1]^2` with `n x n` cell-centred unknowns.
/// Unknown `(i, j)` sits at `(coord(i), coord(j))` and has grid index
/// `j * n + i`. The exterior region `[-3, 3]^2 \ [-1, 1]^2` uses the same
/// spacing, so indices `-n..2n` cover the extended box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracProblem {
    pub n: usize,
    pub beta: f64,
    pub field: KappaField,
    /// Factor on the non-fractional correction; [`self_cell_factor`] by
    /// default.
    pub c_scale: f64,
}

/// `1/2 * integral of |z|^(-2 beta)` over the unit cell `[-1/2, 1/2]^2`:
/// the second-order Taylor term of the kernel integral over the excluded
/// cell, in units of `h^(2 - 2 beta)`.
pub fn self_cell_factor(beta: f64) -> f64 {
    // polar form: 8 * int_0^{pi/4} (2 cos t)^(2 beta - 2) / (2 - 2 beta) dt,
    // composite Simpson on a smooth integrand
    let e = 2.0 - 2.0 * beta;
    let f = |t: f64| (2.0 * t.cos()).powf(-e) / e;
    let m = 64;
    let step = std::f64::consts::FRAC_PI_4 / m as f64;
    let inner: f64 = (1..m).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * step)).sum();
    let integral = 8.0 * step / 3.0 * (f(0.0) + inner + f(std::f64::consts::FRAC_PI_4));
    0.5 * integral
}

impl FracProblem {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(H2Error::InvalidArgument(format!("grid side {n} is too small")));
        }
        if !(beta > 0.5 && beta < 1.0) {
            return Err(H2Error::InvalidArgument(format!("fractional order {beta} outside (0.5, 1)")));
        }
        Ok(FracProblem { n, beta, field: KappaField::Bump, c_scale: self_cell_factor(beta) })
    }

    pub fn with_field(mut self, field: KappaField) -> Self {
        self.field = field;
        self
    }

    pub fn with_c_scale(mut self, c_scale: f64) -> Self {
        self.c_scale = c_scale;
        self
    }

    pub fn size(&self) -> usize {
        self.n * self.n
    }

    pub fn h(&self) -> f64 {
        2.0 / self.n as f64
    }

    pub fn coord(&self, i: i64) -> f64 {
        -1.0 + (i as f64 + 0.5) * self.h()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    fn points(&self, lo: i64, hi: i64) -> PointCloud {
        let mut c = Vec::with_capacity(2 * ((hi - lo) * (hi - lo)) as usize);
        for j in lo..hi {
            for i in lo..hi {
                c.push(self.coord(i));
                c.push(self.coord(j));
            }
        }
        PointCloud::new(2, c).expect("grid coordinates are finite")
    }

    /// Interior unknowns in grid order.
    pub fn interior_points(&self) -> PointCloud {
        self.points(0, self.n as i64)
    }

    /// The whole `[-3, 3]^2` grid, interior included.
    pub fn extended_points(&self) -> PointCloud {
        let n = self.n as i64;
        self.points(-n, 2 * n)
    }

    pub fn kappa(&self, x: &[f64]) -> f64 {
        self.field.eval(x)
    }

    /// Kernel of the off-diagonal part `K`.
    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::Frac { beta: self.beta, sign: -1.0, field: self.field }
    }

    /// Positive kernel whose row sums give `D`.
    pub fn aux_kernel(&self) -> KernelSpec {
        KernelSpec::Frac { beta: self.beta, sign: 1.0, field: self.field }
    }

    pub fn rhs(&self) -> Vec<f64> {
        vec![1.0; self.size()]
    }
}

/// `K` over the interior points, split over `ranks` ranks. Rows and columns
/// are in the cluster tree order of the interior points.
pub fn assemble_k(problem: &FracProblem, leaf_size: usize, eta: f64, p: usize, ranks: usize) -> Result<DistributedH2> {
    let a = construct_h2(problem.interior_points(), &problem.kernel(), leaf_size, eta, p)?;
    DistributedH2::distribute(&a, ranks)
}

/// Diagonal `D` in grid order: row sums of the auxiliary kernel from each
/// interior point to every point of the extended box. The auxiliary matrix
/// is built with interior rows only and dropped before returning.
pub fn assemble_d(problem: &FracProblem, leaf_size: usize, eta: f64, p: usize) -> Result<Vec<f64>> {
    let q = depth_for(problem.size(), leaf_size.max(1));
    let rows = ClusterTree::build_with_depth(problem.interior_points(), q, leaf_size)?;
    let cols = ClusterTree::build_with_depth(problem.extended_points(), q, 9 * leaf_size)?;
    let aux = construct_h2_with_trees(rows, cols, &problem.aux_kernel(), eta, p)?;
    let d = apply(&aux, &vec![1.0; aux.cols()], 1)?;
    Ok(from_tree_order(aux.row_tree(), &d, 1))
}
