use super::PointCloud;

/// Axis-aligned box around a cluster of points.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        debug_assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h));
        BoundingBox { lo, hi }
    }

    /// Tight box of the points `indices` of `points`; `None` for no points.
    pub fn of_points(points: &PointCloud, indices: &[usize]) -> Option<Self> {
        let first = *indices.first()?;
        let mut lo = points.point(first).to_vec();
        let mut hi = lo.clone();
        for &i in &indices[1..] {
            for (d, &c) in points.point(i).iter().enumerate() {
                lo[d] = lo[d].min(c);
                hi[d] = hi[d].max(c);
            }
        }
        Some(BoundingBox { lo, hi })
    }

    /// Zero-extent box at `p`.
    pub fn point(p: &[f64]) -> Self {
        BoundingBox { lo: p.to_vec(), hi: p.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn diagonal(&self) -> f64 {
        (0..self.dim()).map(|d| self.extent(d).powi(2)).sum::<f64>().sqrt()
    }

    /// Index of the longest side; the lowest axis wins ties.
    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        for d in 1..self.dim() {
            if self.extent(d) > self.extent(best) {
                best = d;
            }
        }
        best
    }

    pub fn center_distance(&self, other: &BoundingBox) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((l1, h1), (l2, h2))| (0.5 * (l1 + h1) - 0.5 * (l2 + h2)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Geometric admissibility: `eta * |C_t - C_s| >= (D_t + D_s) / 2`.
/// Boxes with coinciding centres are never admissible, which matters for
/// degenerate (zero-diagonal) boxes.
pub fn admissible(t: &BoundingBox, s: &BoundingBox, eta: f64) -> bool {
    let dist = t.center_distance(s);
    dist > 0.0 && eta * dist >= 0.5 * (t.diagonal() + s.diagonal())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(cx: f64, cy: f64) -> BoundingBox {
        BoundingBox::new(vec![cx - 0.5, cy - 0.5], vec![cx + 0.5, cy + 0.5])
    }

    #[test]
    fn same_box_is_never_admissible() {
        let b = unit_square(0.0, 0.0);
        assert!(!admissible(&b, &b, 100.0));
        let p = BoundingBox::point(&[0.3, 0.3]);
        assert!(!admissible(&p, &p, 1.0));
    }

    #[test]
    fn far_squares() {
        // 0.9 * 10 = 9 >= sqrt(2)
        assert!(admissible(&unit_square(0.0, 0.0), &unit_square(10.0, 0.0), 0.9));
    }

    #[test]
    fn adjacent_squares() {
        // 0.9 * 1 = 0.9 < sqrt(2)
        let (a, b) = (unit_square(0.0, 0.0), unit_square(1.0, 0.0));
        assert!(!admissible(&a, &b, 0.9));
        assert!((0.5 * (a.diagonal() + b.diagonal()) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn box_geometry() {
        let b = BoundingBox::new(vec![0.0, 1.0, 0.0], vec![2.0, 1.0, 1.0]);
        assert_eq!(b.center(), vec![1.0, 1.0, 0.5]);
        assert_eq!(b.longest_axis(), 0);
        assert!((b.diagonal() - 5f64.sqrt()).abs() < 1e-15);
    }
}
