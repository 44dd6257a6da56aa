//! Ising models with site-dependent fields and couplings.
//!
//! [`IsingGraph`] is the general sparse form used by enumeration and the
//! samplers. [`GridIsing`] is the rectangular special case that also admits
//! the row-by-row transfer-matrix contraction. Both use the log-weight
//! `sum_i h_i s_i + sum_{ij} J_ij s_i s_j` over states packed in
//! [`SpinBits`] (set bit = `-1`).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SpinBits;
use crate::stats::log_sum_exp;

#[derive(Debug, Clone, PartialEq)]
pub struct IsingGraph {
    field: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<(usize, f64)>>,
    /// Hard constraints `s_a s_b = sign` (noiseless bond observations).
    hard: Vec<(usize, usize, i8)>,
}

impl IsingGraph {
    pub fn new(n: usize) -> Self {
        IsingGraph {
            field: vec![0.0; n],
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
            hard: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn hard_constraints(&self) -> &[(usize, usize, i8)] {
        &self.hard
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn add_field(&mut self, i: usize, h: f64) {
        self.field[i] += h;
    }

    pub fn add_coupling(&mut self, a: usize, b: usize, j: f64) {
        assert!(a != b && a < self.len() && b < self.len());
        self.edges.push((a, b, j));
        self.adj[a].push((b, j));
        self.adj[b].push((a, j));
    }

    pub fn add_hard_constraint(&mut self, a: usize, b: usize, sign: i8) {
        self.hard.push((a, b, sign));
    }

    /// `h_i + sum_j J_ij s_j`.
    #[inline]
    pub fn local_field(&self, state: &SpinBits, i: usize) -> f64 {
        let mut a = self.field[i];
        for &(j, c) in &self.adj[i] {
            a += c * state.get(j) as f64;
        }
        a
    }

    pub fn satisfies_constraints(&self, state: &SpinBits) -> bool {
        self.hard
            .iter()
            .all(|&(a, b, s)| state.get(a) * state.get(b) == s)
    }

    /// Unnormalized log-weight; `-inf` off the constraint set.
    pub fn log_weight(&self, state: &SpinBits) -> f64 {
        if !self.satisfies_constraints(state) {
            return f64::NEG_INFINITY;
        }
        let mut w = 0.0;
        for (i, &h) in self.field.iter().enumerate() {
            w += h * state.get(i) as f64;
        }
        for &(a, b, j) in &self.edges {
            w += j * (state.get(a) * state.get(b)) as f64;
        }
        w
    }

    fn log_weight_word(&self, word: u64) -> f64 {
        let bit = |i: usize| (word >> i) & 1;
        for &(a, b, s) in &self.hard {
            let prod_minus = bit(a) ^ bit(b) == 1;
            if prod_minus != (s < 0) {
                return f64::NEG_INFINITY;
            }
        }
        let mut w = 0.0;
        for (i, &h) in self.field.iter().enumerate() {
            w += if bit(i) == 0 { h } else { -h };
        }
        for &(a, b, j) in &self.edges {
            w += if bit(a) == bit(b) { j } else { -j };
        }
        w
    }

    /// Exact law by summing over all `2^n` states.
    pub fn enumerate(&self, max_sites: usize) -> Result<DenseLaw> {
        let n = self.len();
        if n > max_sites || n > 30 {
            return Err(Error::BudgetExceeded {
                what: "enumerated sites",
                needed: n,
                limit: max_sites.min(30),
            });
        }
        let logw: Vec<f64> = (0..1u64 << n)
            .into_par_iter()
            .map(|s| self.log_weight_word(s))
            .collect();
        let log_z = log_sum_exp(&logw);
        if log_z == f64::NEG_INFINITY {
            return Err(Error::InconsistentObservations { edge: 0 });
        }
        let probs = logw.iter().map(|&l| (l - log_z).exp()).collect();
        Ok(DenseLaw { n, probs, log_z })
    }
}

/// Dense probability table over `2^n` states, indexed by the packed word.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLaw {
    n: usize,
    probs: Vec<f64>,
    log_z: f64,
}

impl DenseLaw {
    pub fn from_probs(n: usize, probs: Vec<f64>, log_z: f64) -> Self {
        assert_eq!(probs.len(), 1usize << n);
        DenseLaw { n, probs, log_z }
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn prob(&self, word: u64) -> f64 {
        self.probs[word as usize]
    }

    /// `P(s_i = +1)`.
    pub fn plus_probability(&self, i: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| (s >> i) & 1 == 0)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn magnetization(&self, i: usize) -> f64 {
        2.0 * self.plus_probability(i) - 1.0
    }

    pub fn magnetizations(&self) -> Vec<f64> {
        let mut plus = vec![0.0; self.n];
        for (s, p) in self.probs.iter().enumerate() {
            for (i, acc) in plus.iter_mut().enumerate() {
                if (s >> i) & 1 == 0 {
                    *acc += p;
                }
            }
        }
        plus.into_iter().map(|q| 2.0 * q - 1.0).collect()
    }

    /// Marginal over the sites in `sites`, indexed by the bits of those sites
    /// in the given order.
    pub fn marginal(&self, sites: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << sites.len()];
        for (s, p) in self.probs.iter().enumerate() {
            let mut idx = 0;
            for (b, &i) in sites.iter().enumerate() {
                idx |= ((s >> i) & 1) << b;
            }
            out[idx] += p;
        }
        out
    }

    pub fn expectation(&self, f: impl Fn(u64) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(s, p)| if *p > 0.0 { p * f(s as u64) } else { 0.0 })
            .sum()
    }
}

/// Ising model on a `rows x cols` grid with row-major site index
/// `r * cols + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridIsing {
    rows: usize,
    cols: usize,
    /// Coupling between `(r,c)` and `(r,c+1)` at `r * (cols-1) + c`.
    horiz: Vec<f64>,
    /// Coupling between `(r,c)` and `(r+1,c)` at `r * cols + c`.
    vert: Vec<f64>,
    field: Vec<f64>,
}

/// Output of the transfer-matrix contraction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub log_z: f64,
    pub magnetizations: Vec<f64>,
}

impl GridIsing {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        GridIsing {
            rows,
            cols,
            horiz: vec![0.0; rows * (cols - 1)],
            vert: vec![0.0; (rows - 1) * cols],
            field: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    pub fn set_horizontal(&mut self, r: usize, c: usize, j: f64) {
        self.horiz[r * (self.cols - 1) + c] = j;
    }

    pub fn set_vertical(&mut self, r: usize, c: usize, j: f64) {
        self.vert[r * self.cols + c] = j;
    }

    pub fn add_field(&mut self, r: usize, c: usize, h: f64) {
        self.field[r * self.cols + c] += h;
    }

    pub fn horizontal(&self, r: usize, c: usize) -> f64 {
        self.horiz[r * (self.cols - 1) + c]
    }

    pub fn vertical(&self, r: usize, c: usize) -> f64 {
        self.vert[r * self.cols + c]
    }

    pub fn field(&self, r: usize, c: usize) -> f64 {
        self.field[r * self.cols + c]
    }

    pub fn to_graph(&self) -> IsingGraph {
        let mut g = IsingGraph::new(self.rows * self.cols);
        for (i, &h) in self.field.iter().enumerate() {
            g.add_field(i, h);
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c + 1 < self.cols {
                    g.add_coupling(self.index(r, c), self.index(r, c + 1), self.horizontal(r, c));
                }
                if r + 1 < self.rows {
                    g.add_coupling(self.index(r, c), self.index(r + 1, c), self.vertical(r, c));
                }
            }
        }
        g
    }

    /// In-row log-weight for each of the `2^cols` row states.
    fn row_log_weights(&self, r: usize) -> Vec<f64> {
        let w = self.cols;
        (0..1usize << w)
            .map(|s| {
                let spin = |c: usize| if (s >> c) & 1 == 0 { 1.0 } else { -1.0 };
                let mut lw = 0.0;
                for c in 0..w {
                    lw += self.field(r, c) * spin(c);
                    if c + 1 < w {
                        lw += self.horizontal(r, c) * spin(c) * spin(c + 1);
                    }
                }
                lw
            })
            .collect()
    }

    /// Multiply `v` by the inter-row kernel `prod_c exp(J_c s_c s'_c)`,
    /// one column bit at a time. Returns the log of the factored-out scale.
    fn apply_vertical(&self, r: usize, v: &mut [f64]) -> f64 {
        let mut log_scale = 0.0;
        for c in 0..self.cols {
            let j = self.vertical(r, c);
            let same = (j - j.abs()).exp();
            let diff = (-j - j.abs()).exp();
            log_scale += j.abs();
            let bit = 1usize << c;
            for s in 0..v.len() {
                if s & bit == 0 {
                    let (a, b) = (v[s], v[s | bit]);
                    v[s] = a * same + b * diff;
                    v[s | bit] = a * diff + b * same;
                }
            }
        }
        log_scale
    }

    /// Exact log-partition function and all single-site magnetizations by
    /// forward/backward contraction over rows. Vectors are renormalized to
    /// unit maximum after every row and the scales kept in log form.
    pub fn transfer(&self, max_cols: usize) -> Result<TransferResult> {
        if self.cols > max_cols || self.cols > 24 {
            return Err(Error::BudgetExceeded {
                what: "transfer-matrix column height",
                needed: self.cols,
                limit: max_cols.min(24),
            });
        }
        let states = 1usize << self.cols;
        let local: Vec<Vec<f64>> = (0..self.rows).map(|r| self.row_log_weights(r)).collect();

        let exp_shifted = |lw: &[f64]| -> (Vec<f64>, f64) {
            let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lw.iter().map(|l| (l - max).exp()).collect(), max)
        };
        let normalize = |v: &mut [f64]| -> f64 {
            let max = v.iter().copied().fold(0.0, f64::max);
            for x in v.iter_mut() {
                *x /= max;
            }
            max.ln()
        };

        // forward[r] includes row r's own weight
        let mut forward: Vec<Vec<f64>> = Vec::with_capacity(self.rows);
        let (mut a, mut log_scale) = exp_shifted(&local[0]);
        log_scale += normalize(&mut a);
        forward.push(a);
        for r in 1..self.rows {
            let mut v = forward[r - 1].clone();
            log_scale += self.apply_vertical(r - 1, &mut v);
            let (row, shift) = exp_shifted(&local[r]);
            log_scale += shift;
            for (x, w) in v.iter_mut().zip(&row) {
                *x *= w;
            }
            log_scale += normalize(&mut v);
            forward.push(v);
        }
        let log_z = log_scale + forward[self.rows - 1].iter().sum::<f64>().ln();

        // backward[r] excludes row r's own weight
        let mut backward = vec![Vec::new(); self.rows];
        backward[self.rows - 1] = vec![1.0; states];
        for r in (0..self.rows - 1).rev() {
            let (row, _) = exp_shifted(&local[r + 1]);
            let mut v: Vec<f64> = backward[r + 1].iter().zip(&row).map(|(b, w)| b * w).collect();
            self.apply_vertical(r, &mut v);
            normalize(&mut v);
            backward[r] = v;
        }

        let mut magnetizations = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            let mut total = 0.0;
            let mut plus = vec![0.0; self.cols];
            for s in 0..states {
                let p = forward[r][s] * backward[r][s];
                total += p;
                for (c, acc) in plus.iter_mut().enumerate() {
                    if (s >> c) & 1 == 0 {
                        *acc += p;
                    }
                }
            }
            for c in 0..self.cols {
                magnetizations[r * self.cols + c] = 2.0 * plus[c] / total - 1.0;
            }
        }
        Ok(TransferResult {
            log_z,
            magnetizations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;

    fn random_grid(rows: usize, cols: usize, scale: f64, seed: u32) -> GridIsing {
        let mut rng = SeedSpec::new(77).with_replicate(seed).stream();
        let mut g = GridIsing::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                g.add_field(r, c, scale * (2.0 * rng.next_f64() - 1.0));
                if c + 1 < cols {
                    g.set_horizontal(r, c, scale * (2.0 * rng.next_f64() - 1.0));
                }
                if r + 1 < rows {
                    g.set_vertical(r, c, scale * (2.0 * rng.next_f64() - 1.0));
                }
            }
        }
        g
    }

    #[test]
    fn single_site_closed_form() {
        let mut g = IsingGraph::new(1);
        g.add_field(0, 0.7);
        let law = g.enumerate(24).unwrap();
        assert!((law.magnetization(0) - 0.7f64.tanh()).abs() < 1e-15);
        assert!((law.log_z() - (2.0 * 0.7f64.cosh()).ln()).abs() < 1e-15);
    }

    #[test]
    fn transfer_matches_enumeration() {
        for (seed, (rows, cols)) in [(1, 3), (3, 3), (4, 3), (2, 5), (5, 2), (1, 1), (3, 4)].into_iter().enumerate() {
            let g = random_grid(rows, cols, 1.5, seed as u32);
            let law = g.to_graph().enumerate(24).unwrap();
            let tm = g.transfer(15).unwrap();
            assert!((law.log_z() - tm.log_z).abs() < 1e-10, "{rows}x{cols}");
            for (i, m) in law.magnetizations().iter().enumerate() {
                assert!((m - tm.magnetizations[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn transfer_survives_strong_couplings() {
        let g = random_grid(30, 4, 40.0, 9);
        let tm = g.transfer(15).unwrap();
        assert!(tm.log_z.is_finite());
        assert!(tm.magnetizations.iter().all(|m| m.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn enumeration_normalized_and_budgeted() {
        let g = random_grid(3, 4, 2.0, 4).to_graph();
        let law = g.enumerate(24).unwrap();
        assert!((law.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(g.enumerate(10), Err(Error::BudgetExceeded { .. })));
        assert!(matches!(
            random_grid(2, 16, 1.0, 0).transfer(15),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn hard_constraints_restrict_support() {
        let mut g = IsingGraph::new(3);
        g.add_hard_constraint(0, 1, -1);
        g.add_hard_constraint(1, 2, 1);
        let law = g.enumerate(24).unwrap();
        for s in 0..8u64 {
            let ok = ((s & 1) ^ ((s >> 1) & 1)) == 1 && ((s >> 1) & 1) == ((s >> 2) & 1);
            assert_eq!(law.prob(s) > 0.0, ok);
        }
        assert!((law.prob(0b110) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn marginal_consistent_with_magnetization() {
        let g = random_grid(2, 3, 1.0, 2).to_graph();
        let law = g.enumerate(24).unwrap();
        let m = law.marginal(&[4]);
        assert!((m[0] - m[1] - law.magnetization(4)).abs() < 1e-14);
        let pair = law.marginal(&[1, 4]);
        assert!((pair.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pair[0] + pair[1] - m[0]).abs() < 1e-14);
    }
}
