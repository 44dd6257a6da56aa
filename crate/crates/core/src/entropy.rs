//! Exact information quantities for small hidden Markov models.
//!
//! States of `{-1,1}^r` are words of `r` bits with a set bit meaning `-1`,
//! so coordinatewise products are XORs. Entropies are in bits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::neg_plog2p;

/// Largest number of bits a dense table may index.
pub const MAX_TABLE_BITS: usize = 24;

/// Largest signal state dimension.
pub const MAX_STATE_BITS: usize = 4;

/// Dense probability table over `bits`-bit words.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTable {
    bits: usize,
    probs: Vec<f64>,
}

impl DenseTable {
    pub fn new(bits: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << bits {
            return Err(Error::ShapeMismatch(format!("{} entries for {bits} bits", probs.len())));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidArgument("negative or NaN probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("table sums to {total}")));
        }
        Ok(DenseTable { bits, probs })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Law of the bits in `mask`, packed in increasing bit order.
    pub fn marginal(&self, mask: u64) -> Vec<f64> {
        let positions: Vec<usize> = (0..self.bits).filter(|b| (mask >> b) & 1 == 1).collect();
        let split = self.bits.min(12);
        let lo_mask = (1usize << split) - 1;
        let pack = |base: usize, range: std::ops::Range<usize>| -> Vec<usize> {
            (0..1usize << range.len())
                .map(|w| {
                    let mut key = 0;
                    for (slot, &b) in positions.iter().enumerate() {
                        if range.contains(&b) && (w >> (b - base)) & 1 == 1 {
                            key |= 1 << slot;
                        }
                    }
                    key
                })
                .collect()
        };
        let lo = pack(0, 0..split);
        let hi = pack(split, split..self.bits);
        let mut out = vec![0.0; 1usize << positions.len()];
        for (i, &p) in self.probs.iter().enumerate() {
            out[lo[i & lo_mask] | hi[i >> split]] += p;
        }
        out
    }

    /// `H` of the bits in `mask`.
    pub fn entropy(&self, mask: u64) -> f64 {
        self.marginal(mask).iter().map(|&p| neg_plog2p(p)).sum()
    }

    /// `H(target | given)`.
    pub fn conditional_entropy(&self, target: u64, given: u64) -> f64 {
        self.entropy(target | given) - self.entropy(given)
    }
}

/// Observation channel applied coordinatewise with flip probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Channel {
    /// `Y_k = X_k xi_k`.
    VertexFlip { p: f64 },
    /// `Y_k = X_k X_{k-1} xi_k`.
    ProductFlip { p: f64 },
}

impl Channel {
    pub fn p(&self) -> f64 {
        match *self {
            Channel::VertexFlip { p } | Channel::ProductFlip { p } => p,
        }
    }

    fn prob(&self, r: usize, y: usize, x: usize, prev: usize) -> f64 {
        let clean = match self {
            Channel::VertexFlip { .. } => x,
            Channel::ProductFlip { .. } => x ^ prev,
        };
        let flips = (y ^ clean).count_ones() as i32;
        let p = self.p();
        p.powi(flips) * (1.0 - p).powi(r as i32 - flips)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHMM {
    r: usize,
    /// Row-major `2^r x 2^r`.
    transition: Vec<f64>,
    initial: Vec<f64>,
    channel: Channel,
}

impl FiniteHMM {
    pub fn new(r: usize, transition: Vec<f64>, initial: Vec<f64>, channel: Channel) -> Result<Self> {
        if r == 0 || r > MAX_STATE_BITS {
            return Err(Error::InvalidArgument(format!("state dimension {r} outside 1..={MAX_STATE_BITS}")));
        }
        let s = 1usize << r;
        if transition.len() != s * s || initial.len() != s {
            return Err(Error::ShapeMismatch("transition or initial law has the wrong size".into()));
        }
        let p = channel.p();
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        let stochastic = |row: &[f64]| row.iter().all(|&q| q >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        if !transition.chunks(s).all(stochastic) {
            return Err(Error::InvalidArgument("transition rows must be probability vectors".into()));
        }
        if !stochastic(&initial) {
            return Err(Error::InvalidArgument("initial law must be a probability vector".into()));
        }
        Ok(FiniteHMM {
            r,
            transition,
            initial,
            channel,
        })
    }

    /// Coordinates flip independently with probability `rate` per step,
    /// started from the uniform law.
    pub fn symmetric_chain(r: usize, rate: f64, channel: Channel) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("flip rate {rate}")));
        }
        let s = 1usize << r.min(MAX_STATE_BITS + 1);
        let mut t = vec![0.0; s * s];
        for a in 0..s {
            for b in 0..s {
                let f = (a ^ b).count_ones() as i32;
                t[a * s + b] = rate.powi(f) * (1.0 - rate).powi(r as i32 - f);
            }
        }
        FiniteHMM::new(r, t, vec![1.0 / s as f64; s], channel)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn states(&self) -> usize {
        1 << self.r
    }

    pub fn transition(&self, a: usize, b: usize) -> f64 {
        self.transition[a * self.states() + b]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }
}

/// i.i.d. uniform bits observed through `Y_k = X_k X_{k-1}` without noise.
pub fn blackwell_fixture() -> FiniteHMM {
    FiniteHMM::symmetric_chain(1, 0.5, Channel::ProductFlip { p: 0.0 }).expect("valid fixture")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
}

/// Exact joint law of `(X_0..X_n, Y_1..Y_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    r: usize,
    n: usize,
    table: DenseTable,
}

impl JointTable {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &DenseTable {
        &self.table
    }

    fn offset(&self, v: Var) -> usize {
        match v {
            Var::X(j) => {
                assert!(j <= self.n, "X_{j} beyond horizon {}", self.n);
                j * self.r
            }
            Var::Y(j) => {
                assert!(j >= 1 && j <= self.n, "Y_{j} outside 1..={}", self.n);
                (self.n + j) * self.r
            }
        }
    }

    pub fn mask(&self, vars: &[Var]) -> u64 {
        let block = (1u64 << self.r) - 1;
        vars.iter().fold(0, |m, &v| m | (block << self.offset(v)))
    }

    pub fn entropy(&self, vars: &[Var]) -> f64 {
        self.table.entropy(self.mask(vars))
    }

    pub fn conditional_entropy(&self, target: &[Var], given: &[Var]) -> f64 {
        self.table.conditional_entropy(self.mask(target), self.mask(given))
    }

    /// Marginal with `first` in the low bits and `rest` above it.
    fn split_marginal(&self, first: Var, rest: &[Var]) -> Vec<f64> {
        // packing follows bit order, so X_j / Y_j offsets already sort
        // `first` below `rest` only when it has the lowest offset; reorder
        let m = self.table.marginal(self.mask(&[first]) | self.mask(rest));
        let mut order: Vec<Var> = rest.to_vec();
        order.push(first);
        order.sort_by_key(|&v| self.offset(v));
        let pos = order.iter().position(|&v| v == first).expect("present");
        let r = self.r;
        let low = (1usize << (pos * r)) - 1;
        let block = (1usize << r) - 1;
        let mut out = vec![0.0; m.len()];
        for (i, &p) in m.iter().enumerate() {
            let f = (i >> (pos * r)) & block;
            let above = i >> ((pos + 1) * r);
            let rest_key = (i & low) | (above << (pos * r));
            out[f | (rest_key << r)] += p;
        }
        out
    }
}

fn ys(range: std::ops::RangeInclusive<usize>) -> Vec<Var> {
    range.map(Var::Y).collect()
}

pub fn build_joint(hmm: &FiniteHMM, n: usize) -> Result<JointTable> {
    let r = hmm.r;
    let bits = r * (2 * n + 1);
    if bits > MAX_TABLE_BITS {
        return Err(Error::BudgetExceeded {
            what: "joint table bits",
            needed: bits,
            limit: MAX_TABLE_BITS,
        });
    }
    let block = (1usize << r) - 1;
    let probs: Vec<f64> = (0..1usize << bits)
        .into_par_iter()
        .map(|w| {
            let x = |j: usize| (w >> (j * r)) & block;
            let y = |j: usize| (w >> ((n + j) * r)) & block;
            let mut p = hmm.initial[x(0)];
            for j in 1..=n {
                if p == 0.0 {
                    break;
                }
                p *= hmm.transition(x(j - 1), x(j)) * hmm.channel.prob(r, y(j), x(j), x(j - 1));
            }
            p
        })
        .collect();
    Ok(JointTable {
        r,
        n,
        table: DenseTable::new(bits, probs)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `sum_k [H(Y_k | Y_<k) - H(Y_k | X_0, Y_<k)]`.
    pub lhs: f64,
    /// `H(X_0) - H(X_0 | Y_1..Y_n)`.
    pub rhs: f64,
    pub h_x0: f64,
}

pub fn information_identity_check(hmm: &FiniteHMM, n: usize) -> Result<IdentityCheck> {
    let t = build_joint(hmm, n)?;
    let mut lhs = 0.0;
    for k in 1..=n {
        let past = ys(1..=k - 1);
        let mut with_x0 = past.clone();
        with_x0.push(Var::X(0));
        lhs += t.conditional_entropy(&[Var::Y(k)], &past) - t.conditional_entropy(&[Var::Y(k)], &with_x0);
    }
    let h_x0 = t.entropy(&[Var::X(0)]);
    let rhs = h_x0 - t.conditional_entropy(&[Var::X(0)], &ys(1..=n));
    Ok(IdentityCheck { lhs, rhs, h_x0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionGap {
    /// `E || P[Y_k | X_0, Y_<k] - P[Y_k | Y_<k] ||_TV`.
    pub tv: f64,
    /// `H(Y_k | Y_<k) - H(Y_k | X_0, Y_<k)` in bits.
    pub entropy_gap: f64,
    /// `sqrt(ln 2 / 2 * entropy_gap)`.
    pub pinsker: f64,
}

pub fn prediction_gap(hmm: &FiniteHMM, k: usize) -> Result<PredictionGap> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let t = build_joint(hmm, k)?;
    let s = hmm.states();
    let past = ys(1..=k - 1);
    let mut with_x0 = vec![Var::X(0)];
    with_x0.extend_from_slice(&past);
    let full = t.split_marginal(Var::Y(k), &with_x0);
    let obs = t.split_marginal(Var::Y(k), &past);
    // rest key of `with_x0` is x0 in the low r bits, then the past
    let mut tv = 0.0;
    for (rest, chunk) in full.chunks(s).enumerate() {
        let w: f64 = chunk.iter().sum();
        if w == 0.0 {
            continue;
        }
        let ypast = rest >> hmm.r;
        let other = &obs[ypast * s..(ypast + 1) * s];
        let wo: f64 = other.iter().sum();
        let d: f64 = chunk.iter().zip(other).map(|(a, b)| (a / w - b / wo).abs()).sum();
        tv += w * 0.5 * d;
    }
    let entropy_gap = t.conditional_entropy(&[Var::Y(k)], &past) - t.conditional_entropy(&[Var::Y(k)], &with_x0);
    Ok(PredictionGap {
        tv,
        entropy_gap,
        pinsker: (std::f64::consts::LN_2 / 2.0 * entropy_gap.max(0.0)).sqrt(),
    })
}

/// For `k = 1..=n`: `max_a E |P[X_k = a | X_0, Y_1..k] - P[X_k = a | Y_1..k]|`.
pub fn filter_stability_gap(hmm: &FiniteHMM, n: usize) -> Result<Vec<f64>> {
    let t = build_joint(hmm, n)?;
    let s = hmm.states();
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let obs_vars = ys(1..=k);
        let mut with_x0 = vec![Var::X(0)];
        with_x0.extend_from_slice(&obs_vars);
        let full = t.split_marginal(Var::X(k), &with_x0);
        let obs = t.split_marginal(Var::X(k), &obs_vars);
        let mut best = 0.0f64;
        for a in 0..s {
            let mut e = 0.0;
            for (rest, chunk) in full.chunks(s).enumerate() {
                let w: f64 = chunk.iter().sum();
                if w == 0.0 {
                    continue;
                }
                let y = rest >> hmm.r;
                let other = &obs[y * s..(y + 1) * s];
                let wo: f64 = other.iter().sum();
                e += w * (chunk[a] / w - other[a] / wo).abs();
            }
            best = best.max(e);
        }
        out.push(best);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackwellReport {
    pub k: usize,
    /// Range of `P[X_k = 1 | Y_1..k]` over observation sequences of positive probability.
    pub given_y_min: f64,
    pub given_y_max: f64,
    /// `max |P[X_k = 1 | X_0, Y_1..k] - 1{X_k = 1}|` over the support.
    pub indicator_error: f64,
    pub stability_gap: f64,
}

/// Both conditional laws of the Blackwell fixture at time `k`.
pub fn blackwell_demo(k: usize) -> Result<BlackwellReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let hmm = blackwell_fixture();
    let t = build_joint(&hmm, k)?;
    let obs_vars = ys(1..=k);
    let mut with_x0 = vec![Var::X(0)];
    with_x0.extend_from_slice(&obs_vars);
    // state word 0 is the spin +1
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in t.split_marginal(Var::X(k), &obs_vars).chunks(2) {
        let w = c[0] + c[1];
        if w > 0.0 {
            lo = lo.min(c[0] / w);
            hi = hi.max(c[0] / w);
        }
    }
    let mut err = 0.0f64;
    for c in t.split_marginal(Var::X(k), &with_x0).chunks(2) {
        let w = c[0] + c[1];
        for (a, &q) in c.iter().enumerate() {
            if q > 0.0 {
                let ind = if a == 0 { 1.0 } else { 0.0 };
                err = err.max((c[0] / w - ind).abs());
            }
        }
    }
    let gap = filter_stability_gap(&hmm, k)?[k - 1];
    Ok(BlackwellReport {
        k,
        given_y_min: lo,
        given_y_max: hi,
        indicator_error: err,
        stability_gap: gap,
    })
}

fn check_t_args(len: usize, i: usize, p: f64) -> Result<()> {
    if !len.is_power_of_two() || i >= len.trailing_zeros() as usize {
        return Err(Error::InvalidArgument(format!("coordinate {i} out of range for a table of {len}")));
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(())
}

/// `(T_i g)(x) = (1-p) g(x) + p g(x^{-i})`.
pub fn t_operator_apply(g: &[f64], i: usize, p: f64) -> Result<Vec<f64>> {
    check_t_args(g.len(), i, p)?;
    Ok((0..g.len()).map(|x| (1.0 - p) * g[x] + p * g[x ^ (1 << i)]).collect())
}

/// Inverse of `T_i`: keeps the even part, divides the odd part by `1-2p`.
pub fn t_operator_invert(f: &[f64], i: usize, p: f64) -> Result<Vec<f64>> {
    check_t_args(f.len(), i, p)?;
    if p == 0.5 {
        return Err(Error::NotInvertible);
    }
    Ok((0..f.len())
        .map(|x| {
            let y = f[x ^ (1 << i)];
            0.5 * (f[x] + y) + 0.5 * (f[x] - y) / (1.0 - 2.0 * p)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntermediateGap {
    pub k: usize,
    pub m: usize,
    pub v: i64,
    /// `H(Y_k^v | Y_1..k-1, Y_k^{<v}) - H(Y_k^v | X_0, Y_1..k-1, Y_k^{<v})`.
    pub value: f64,
    /// Always set: the value is for the hard-windowed model only.
    pub surrogate: bool,
}

/// Largest `k (2m+1)` accepted by [`intermediate_entropy_gap`].
pub const MAX_INTERMEDIATE_SITES: usize = 12;

/// Intermediate entropy gap of the space-time model restricted to
/// `{0..k} x [-m,m]`, with i.i.d. uniform signal, a temporal observation
/// `X_t^u X_{t-1}^u xi` for every `u` and a spatial one `X_t^u X_t^{u+1} xi`
/// for `u < m`. `Y_t^u` is the pair (temporal, spatial) at `u`.
pub fn intermediate_entropy_gap(p: f64, k: usize, m: usize, v: i64) -> Result<IntermediateGap> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    if k == 0 || v.unsigned_abs() as usize > m {
        return Err(Error::InvalidArgument(format!("need k >= 1 and |v| <= m, got k={k}, v={v}")));
    }
    let w = 2 * m + 1;
    if k * w > MAX_INTERMEDIATE_SITES {
        return Err(Error::BudgetExceeded {
            what: "intermediate gap sites",
            needed: k * w,
            limit: MAX_INTERMEDIATE_SITES,
        });
    }
    // observation list: (t, u, spatial)
    let mut obs: Vec<(usize, usize, bool)> = Vec::new();
    let target_u = (v + m as i64) as usize;
    let mut target = 0u64;
    for t in 1..=k {
        for u in 0..w {
            if t == k && u > target_u {
                break;
            }
            for spatial in [false, true] {
                if spatial && u + 1 == w {
                    continue;
                }
                if t == k && u == target_u {
                    target |= 1 << obs.len();
                }
                obs.push((t, u, spatial));
            }
        }
    }
    let nx = (k + 1) * w;
    let bits = w + obs.len();
    if nx + obs.len() > MAX_TABLE_BITS {
        return Err(Error::BudgetExceeded {
            what: "intermediate gap table bits",
            needed: nx + obs.len(),
            limit: MAX_TABLE_BITS,
        });
    }
    let spin = |x: usize, t: usize, u: usize| (x >> (t * w + u)) & 1;
    let rest_sites = k * w;
    let scale = 0.5f64.powi(nx as i32);
    // table bits: X_0 in the low w bits, observations above
    let probs: Vec<f64> = (0..1usize << bits)
        .into_par_iter()
        .map(|idx| {
            let x0 = idx & ((1 << w) - 1);
            let y = idx >> w;
            let mut total = 0.0;
            for rest in 0..1usize << rest_sites {
                let x = x0 | (rest << w);
                let mut pr = 1.0;
                for (b, &(t, u, spatial)) in obs.iter().enumerate() {
                    let clean = if spatial {
                        spin(x, t, u) ^ spin(x, t, u + 1)
                    } else {
                        spin(x, t, u) ^ spin(x, t - 1, u)
                    };
                    pr *= if (y >> b) & 1 == clean { 1.0 - p } else { p };
                }
                total += pr;
            }
            total * scale
        })
        .collect();
    let table = DenseTable::new(bits, probs)?;
    let target = target << w;
    let given = (((1u64 << obs.len()) - 1) << w) & !target;
    let x0 = (1u64 << w) - 1;
    let value = table.conditional_entropy(target, given) - table.conditional_entropy(target, given | x0);
    Ok(IntermediateGap {
        k,
        m,
        v,
        value,
        surrogate: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h2(p: f64) -> f64 {
        neg_plog2p(p) + neg_plog2p(1.0 - p)
    }

    #[test]
    fn joint_basics() {
        let hmm = FiniteHMM::symmetric_chain(1, 0.5, Channel::VertexFlip { p: 0.2 }).unwrap();
        let t = build_joint(&hmm, 1).unwrap();
        for (w, &q) in t.table().probs().iter().enumerate() {
            let (x1, y1) = ((w >> 1) & 1, (w >> 2) & 1);
            let ch = if x1 == y1 { 0.8 } else { 0.2 };
            assert!((q - 0.25 * ch).abs() < 1e-15);
        }
        assert!((t.entropy(&[Var::X(0)]) - 1.0).abs() < 1e-12);
        assert!((t.entropy(&[Var::Y(1)]) - 1.0).abs() < 1e-12);
        assert!((t.conditional_entropy(&[Var::Y(1)], &[Var::X(1)]) - h2(0.2)).abs() < 1e-12);
        assert!(t.conditional_entropy(&[Var::X(0)], &[Var::X(0)]).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let hmm = FiniteHMM::symmetric_chain(4, 0.1, Channel::VertexFlip { p: 0.1 }).unwrap();
        assert!(build_joint(&hmm, 2).is_ok());
        assert!(matches!(build_joint(&hmm, 3), Err(Error::BudgetExceeded { .. })));
        assert!(FiniteHMM::new(1, vec![0.5, 0.6, 0.5, 0.5], vec![0.5, 0.5], Channel::VertexFlip { p: 0.1 }).is_err());
        assert!(FiniteHMM::symmetric_chain(5, 0.1, Channel::VertexFlip { p: 0.1 }).is_err());
    }

    #[test]
    fn iid_is_uninformative() {
        let hmm = FiniteHMM::symmetric_chain(2, 0.5, Channel::VertexFlip { p: 0.1 }).unwrap();
        let c = information_identity_check(&hmm, 3).unwrap();
        assert!(c.lhs.abs() < 1e-12 && c.rhs.abs() < 1e-12);
        assert!(prediction_gap(&hmm, 2).unwrap().tv < 1e-12);
    }

    #[test]
    fn blackwell() {
        for n in 1..=4 {
            let c = information_identity_check(&blackwell_fixture(), n).unwrap();
            // Y alone carries nothing about X_0; (X_n, Y) pins it down
            assert!(c.rhs.abs() < 1e-12);
            let t = build_joint(&blackwell_fixture(), n).unwrap();
            let mut given = ys(1..=n);
            given.push(Var::X(n));
            assert!(t.conditional_entropy(&[Var::X(0)], &given).abs() < 1e-12);
            assert!((t.conditional_entropy(&[Var::X(0)], &ys(1..=n)) - 1.0).abs() < 1e-12);
            assert!((c.lhs - c.rhs).abs() < 1e-10);
            let r = blackwell_demo(n).unwrap();
            assert_eq!((r.given_y_min, r.given_y_max), (0.5, 0.5));
            assert_eq!(r.indicator_error, 0.0);
            assert!((r.stability_gap - 0.5).abs() < 1e-15);
        }
        let g = prediction_gap(&blackwell_fixture(), 3).unwrap();
        assert!(g.tv.abs() < 1e-15);
    }

    #[test]
    fn noiseless_direct_is_stable() {
        let hmm = FiniteHMM::symmetric_chain(1, 0.2, Channel::VertexFlip { p: 0.0 }).unwrap();
        for g in filter_stability_gap(&hmm, 4).unwrap() {
            assert!(g.abs() < 1e-15);
        }
    }

    #[test]
    fn markov_chain_decreasing() {
        let hmm = FiniteHMM::symmetric_chain(1, 0.2, Channel::VertexFlip { p: 0.3 }).unwrap();
        let g = filter_stability_gap(&hmm, 5).unwrap();
        for w in g.windows(2) {
            assert!(w[1] < w[0], "{g:?}");
        }
        let c = information_identity_check(&hmm, 3).unwrap();
        assert!((c.lhs - c.rhs).abs() < 1e-10);
        assert!(c.rhs > 0.0 && c.rhs <= c.h_x0);
    }

    #[test]
    fn t_operators() {
        let g: Vec<f64> = (0..4).map(|x| if x & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let tg = t_operator_apply(&g, 0, 0.3).unwrap();
        for (a, b) in tg.iter().zip(&g) {
            assert!((a - 0.4 * b).abs() < 1e-15);
        }
        let back = t_operator_invert(&tg, 0, 0.3).unwrap();
        for (a, b) in back.iter().zip(&g) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(t_operator_apply(&g, 1, 0.0).unwrap(), g);
        assert_eq!(t_operator_invert(&g, 1, 0.0).unwrap(), g);
        assert_eq!(t_operator_invert(&[1.0, 1.0], 0, 0.5), Err(Error::NotInvertible));
        assert!(t_operator_apply(&g, 2, 0.1).is_err());
    }

    #[test]
    fn intermediate_gap() {
        let g = intermediate_entropy_gap(0.5, 2, 1, 0).unwrap();
        assert!(g.value.abs() < 1e-12 && g.surrogate);
        for (p, k, m, v) in [(0.1, 1, 1, -1), (0.2, 2, 1, 0), (0.05, 3, 0, 0), (0.0, 2, 1, 1)] {
            assert!(intermediate_entropy_gap(p, k, m, v).unwrap().value >= -1e-12);
        }
        assert!(intermediate_entropy_gap(0.1, 5, 1, 0).is_err());
    }
}
