/// Per-level basis coefficients for `nv` vectors. Node `i` of level `l`
/// owns a `ranks[l] x nv` column-major block.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorTree {
    pub nv: usize,
    pub ranks: Vec<usize>,
    pub levels: Vec<Vec<f64>>,
}

impl VectorTree {
    /// Zero coefficients for a complete tree with `ranks.len()` levels.
    pub fn zeros(ranks: &[usize], nv: usize) -> Self {
        let levels = ranks.iter().enumerate().map(|(l, &k)| vec![0.0; (1 << l) * k * nv]).collect();
        VectorTree { nv, ranks: ranks.to_vec(), levels }
    }

    pub fn depth(&self) -> usize {
        self.ranks.len() - 1
    }

    pub fn node_len(&self, level: usize) -> usize {
        self.ranks[level] * self.nv
    }

    pub fn node(&self, level: usize, i: usize) -> &[f64] {
        let len = self.node_len(level);
        &self.levels[level][i * len..(i + 1) * len]
    }

    pub fn node_mut(&mut self, level: usize, i: usize) -> &mut [f64] {
        let len = self.node_len(level);
        &mut self.levels[level][i * len..(i + 1) * len]
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|l| l.iter().all(|&v| v == 0.0))
    }
}
