use crate::geometry::BoundingBox;

/// Tensor grid of first-kind Chebyshev points mapped into a box.
///
/// Grid points are indexed `alpha = sum_d alpha_d p^d`, so the first
/// coordinate varies fastest. Along an axis where the box is flat all `p`
/// nodes sit at the centre and only the first Lagrange factor is nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebGrid {
    pub p: usize,
    /// Mapped 1D nodes per axis.
    pub nodes: Vec<Vec<f64>>,
    pub flat: Vec<bool>,
}

/// `cos(pi (2i + 1) / (2p))` for `i = 0..p`.
pub fn cheb_points(p: usize) -> Vec<f64> {
    (0..p).map(|i| (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * p) as f64).cos()).collect()
}

pub fn cheb_nodes(p: usize, bbox: &BoundingBox) -> ChebGrid {
    assert!(p >= 1, "interpolation order must be positive");
    let reference = cheb_points(p);
    let mut nodes = Vec::with_capacity(bbox.dim());
    let mut flat = Vec::with_capacity(bbox.dim());
    for d in 0..bbox.dim() {
        let (lo, hi) = (bbox.lo[d], bbox.hi[d]);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        flat.push(half == 0.0);
        nodes.push(reference.iter().map(|&t| mid + half * t).collect());
    }
    ChebGrid { p, nodes, flat }
}

impl ChebGrid {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn rank(&self) -> usize {
        self.p.pow(self.dim() as u32)
    }

    /// Coordinates of grid point `alpha`.
    pub fn point(&self, alpha: usize) -> Vec<f64> {
        let mut a = alpha;
        (0..self.dim())
            .map(|d| {
                let i = a % self.p;
                a /= self.p;
                self.nodes[d][i]
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.rank()).map(|a| self.point(a)).collect()
    }

    /// The `p` Lagrange factors of axis `d` evaluated at `x`.
    fn factors(&self, d: usize, x: f64, out: &mut [f64]) {
        let xi = &self.nodes[d];
        if self.flat[d] {
            out.fill(0.0);
            out[0] = 1.0;
            return;
        }
        for j in 0..self.p {
            let mut v = 1.0;
            for m in 0..self.p {
                if m != j {
                    v *= (x - xi[m]) / (xi[j] - xi[m]);
                }
            }
            out[j] = v;
        }
    }

    /// Values of all `p^dim` tensor Lagrange polynomials at `x`.
    pub fn lagrange(&self, x: &[f64], out: &mut [f64]) {
        let p = self.p;
        let mut f = vec![0.0; p * self.dim()];
        for d in 0..self.dim() {
            self.factors(d, x[d], &mut f[d * p..(d + 1) * p]);
        }
        for (alpha, o) in out.iter_mut().enumerate().take(self.rank()) {
            let mut a = alpha;
            let mut v = 1.0;
            for d in 0..self.dim() {
                v *= f[d * p + a % p];
                a /= p;
            }
            *o = v;
        }
    }
}

/// `m x k` matrix (column-major) of tensor Lagrange polynomials evaluated at
/// `points`.
pub fn leaf_basis(points: &[&[f64]], grid: &ChebGrid) -> Vec<f64> {
    let (m, k) = (points.len(), grid.rank());
    let mut out = vec![0.0; m * k];
    let mut row = vec![0.0; k];
    for (i, x) in points.iter().enumerate() {
        grid.lagrange(x, &mut row);
        for (a, &v) in row.iter().enumerate() {
            out[i + a * m] = v;
        }
    }
    out
}

/// `k_child x k_parent` transfer: entry `(alpha, beta)` is the parent's
/// Lagrange polynomial `beta` at child node `alpha`.
pub fn transfer_matrix(child: &ChebGrid, parent: &ChebGrid) -> Vec<f64> {
    let pts = child.points();
    let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
    leaf_basis(&refs, parent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize) -> BoundingBox {
        BoundingBox::new(vec![-1.0; dim], vec![1.0; dim])
    }

    #[test]
    fn reference_nodes() {
        assert!(cheb_points(1)[0].abs() < 1e-16);
        let p2 = cheb_points(2);
        assert!((p2[0] - 0.5f64.sqrt()).abs() < 1e-15 && (p2[1] + 0.5f64.sqrt()).abs() < 1e-15);
        let g = cheb_nodes(3, &BoundingBox::new(vec![0.0], vec![2.0]));
        let want = [1.0 + (std::f64::consts::PI / 6.0).cos(), 1.0, 1.0 - (std::f64::consts::PI / 6.0).cos()];
        for (a, b) in g.nodes[0].iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((g.nodes[0][0] - 1.8660254037844386).abs() < 1e-12);
    }

    #[test]
    fn cardinality_and_partition_of_unity() {
        let g = cheb_nodes(4, &BoundingBox::new(vec![0.0, 1.0], vec![2.0, 1.5]));
        let pts = g.points();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let b = leaf_basis(&refs, &g);
        let k = g.rank();
        for i in 0..k {
            for a in 0..k {
                let want = if i == a { 1.0 } else { 0.0 };
                assert!((b[i + a * k] - want).abs() < 1e-12);
            }
        }
        let x = [0.37, 1.21];
        let mut row = vec![0.0; k];
        g.lagrange(&x, &mut row);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn reproduces_cubics() {
        let g = cheb_nodes(4, &unit(2));
        let f = |x: &[f64]| 1.0 - 2.0 * x[0] + x[0] * x[0] * x[1] - 0.5 * x[1].powi(3);
        let vals: Vec<f64> = g.points().iter().map(|q| f(q)).collect();
        let mut row = vec![0.0; g.rank()];
        for &(a, b) in &[(0.1, 0.2), (-0.77, 0.5), (0.99, -0.99)] {
            g.lagrange(&[a, b], &mut row);
            let interp: f64 = row.iter().zip(&vals).map(|(l, v)| l * v).sum();
            assert!((interp - f(&[a, b])).abs() < 1e-13);
        }
    }

    #[test]
    fn transfer_identity_for_same_box() {
        let g = cheb_nodes(3, &unit(2));
        let e = transfer_matrix(&g, &g);
        for i in 0..9 {
            for j in 0..9 {
                assert!((e[i + 9 * j] - f64::from(i == j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn flat_axis() {
        let g = cheb_nodes(3, &BoundingBox::new(vec![0.0, 2.0], vec![1.0, 2.0]));
        assert_eq!(g.rank(), 9);
        assert!(g.flat[1]);
        let mut row = vec![0.0; 9];
        g.lagrange(&[0.5, 2.0], &mut row);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(row[3..].iter().all(|&v| v == 0.0));
    }
}
