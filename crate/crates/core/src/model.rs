//! Space-time lattice windows, spin and disorder fields, and the generative
//! sampler for the noisy-gradient filtering model.
//!
//! Geometry: time `t` runs over `0..=k`, space `v` over `-m-1..=m+1`. The
//! interior is `J = [1,k] x [-m,m]`; the boundary is the time-0 row
//! `{0} x [-m,m]` together with the two spatial sides `[1,k] x {-m-1, m+1}`.
//! Corners `(0, +-(m+1))` belong to neither.
//!
//! Indexing is row-major with time major. Interior sites come first,
//! `(t, v) -> (t-1)(2m+1) + (v+m)`; a full-coverage field then stores the
//! time-0 row and finally the side sites in the order
//! `(1,-m-1), (1,m+1), (2,-m-1), ...`.
//!
//! Edges are ordered per time row `t = 1..=k`: first the `2m+1` temporal
//! edges `{(t-1,v),(t,v)}`, then the `2m+2` spatial edges `{(t,v),(t,v+1)}`
//! for `v = -m-1..=m`.

use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// Inverse temperature `beta = log sqrt((1-p)/p)`; `Infinite` at `p = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Finite(f64),
    Infinite,
}

impl Coupling {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Coupling::Infinite)
    }

    /// The finite value, or an error naming the caller that cannot handle
    /// the noiseless case.
    pub fn finite(&self, who: &'static str) -> Result<f64> {
        match *self {
            Coupling::Finite(b) => Ok(b),
            Coupling::Infinite => Err(Error::InfiniteCoupling(who)),
        }
    }
}

impl std::fmt::Display for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coupling::Finite(b) => write!(f, "{b}"),
            Coupling::Infinite => write!(f, "inf"),
        }
    }
}

pub fn beta_from_p(p: f64) -> Result<Coupling> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    if p == 0.0 {
        return Ok(Coupling::Infinite);
    }
    Ok(Coupling::Finite(0.5 * ((1.0 - p) / p).ln()))
}

/// Inverse of [`beta_from_p`] on `beta >= 0`.
pub fn p_from_beta(beta: f64) -> f64 {
    1.0 / (1.0 + (2.0 * beta).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub p: f64,
    pub beta: Coupling,
}

impl ModelParams {
    pub fn new(p: f64) -> Result<Self> {
        Ok(ModelParams {
            p,
            beta: beta_from_p(p)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub t: i64,
    pub v: i64,
}

impl Site {
    pub const fn new(t: i64, v: i64) -> Self {
        Site { t, v }
    }

    pub fn l1(&self, other: &Site) -> i64 {
        (self.t - other.t).abs() + (self.v - other.v).abs()
    }

    pub fn neighbors(&self) -> [Site; 4] {
        [
            Site::new(self.t - 1, self.v),
            Site::new(self.t + 1, self.v),
            Site::new(self.t, self.v - 1),
            Site::new(self.t, self.v + 1),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// `{(t-1,v),(t,v)}`, carrying the observation of `X_t^v X_{t-1}^v`.
    Temporal,
    /// `{(t,v),(t,v+1)}`, carrying the observation of `X_t^v X_t^{v+1}`.
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: Site,
    pub b: Site,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn other(&self, s: Site) -> Option<Site> {
        if s == self.a {
            Some(self.b)
        } else if s == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

/// Finite window `J = [1,k] x [-m,m]` with its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeWindow {
    k: usize,
    m: usize,
}

impl LatticeWindow {
    pub fn new(k: usize, m: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("horizon k must be >= 1".into()));
        }
        if m > 1_000_000 || k > 100_000_000 {
            return Err(Error::InvalidArgument("window too large".into()));
        }
        Ok(LatticeWindow { k, m })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Column height `2m+1`.
    pub fn width(&self) -> usize {
        2 * self.m + 1
    }

    pub fn interior_len(&self) -> usize {
        self.k * self.width()
    }

    pub fn boundary_len(&self) -> usize {
        self.width() + 2 * self.k
    }

    pub fn full_len(&self) -> usize {
        self.interior_len() + self.boundary_len()
    }

    pub fn edge_count(&self) -> usize {
        self.k * (4 * self.m + 3)
    }

    /// The site `(k, 0)` whose reconstruction defines the order parameter.
    pub fn origin(&self) -> Site {
        Site::new(self.k as i64, 0)
    }

    pub fn is_interior(&self, s: Site) -> bool {
        let m = self.m as i64;
        s.t >= 1 && s.t <= self.k as i64 && s.v >= -m && s.v <= m
    }

    pub fn is_boundary(&self, s: Site) -> bool {
        let m = self.m as i64;
        let k = self.k as i64;
        (s.t == 0 && s.v >= -m && s.v <= m) || (s.t >= 1 && s.t <= k && (s.v == -m - 1 || s.v == m + 1))
    }

    pub fn interior_index(&self, s: Site) -> Option<usize> {
        if !self.is_interior(s) {
            return None;
        }
        Some((s.t as usize - 1) * self.width() + (s.v + self.m as i64) as usize)
    }

    pub fn full_index(&self, s: Site) -> Option<usize> {
        if let Some(i) = self.interior_index(s) {
            return Some(i);
        }
        let m = self.m as i64;
        let base = self.interior_len();
        if s.t == 0 && s.v >= -m && s.v <= m {
            return Some(base + (s.v + m) as usize);
        }
        if s.t >= 1 && s.t <= self.k as i64 {
            let row = base + self.width() + 2 * (s.t as usize - 1);
            if s.v == -m - 1 {
                return Some(row);
            }
            if s.v == m + 1 {
                return Some(row + 1);
            }
        }
        None
    }

    pub fn site_of(&self, index: usize) -> Site {
        let w = self.width();
        let m = self.m as i64;
        if index < self.interior_len() {
            return Site::new((index / w) as i64 + 1, (index % w) as i64 - m);
        }
        let j = index - self.interior_len();
        if j < w {
            return Site::new(0, j as i64 - m);
        }
        let j = j - w;
        assert!(j < 2 * self.k, "index {index} outside window");
        let t = (j / 2) as i64 + 1;
        Site::new(t, if j % 2 == 0 { -m - 1 } else { m + 1 })
    }

    pub fn interior_sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.interior_len()).map(move |i| self.site_of(i))
    }

    pub fn edges(&self) -> Vec<Edge> {
        let m = self.m as i64;
        let mut out = Vec::with_capacity(self.edge_count());
        for t in 1..=self.k as i64 {
            for v in -m..=m {
                out.push(Edge {
                    a: Site::new(t - 1, v),
                    b: Site::new(t, v),
                    kind: EdgeKind::Temporal,
                });
            }
            for v in -m - 1..=m {
                out.push(Edge {
                    a: Site::new(t, v),
                    b: Site::new(t, v + 1),
                    kind: EdgeKind::Spatial,
                });
            }
        }
        out
    }

    /// Index of the edge `{a, b}` in [`LatticeWindow::edges`] order.
    pub fn edge_index(&self, a: Site, b: Site) -> Option<usize> {
        let (lo, hi) = if (a.t, a.v) <= (b.t, b.v) { (a, b) } else { (b, a) };
        let m = self.m as i64;
        let row = 4 * self.m + 3;
        if hi.t == lo.t + 1 && hi.v == lo.v {
            if hi.t < 1 || hi.t > self.k as i64 || hi.v < -m || hi.v > m {
                return None;
            }
            return Some((hi.t as usize - 1) * row + (hi.v + m) as usize);
        }
        if hi.t == lo.t && hi.v == lo.v + 1 {
            if lo.t < 1 || lo.t > self.k as i64 || lo.v < -m - 1 || lo.v > m {
                return None;
            }
            return Some((lo.t as usize - 1) * row + self.width() + (lo.v + m + 1) as usize);
        }
        None
    }

    /// Edges incident to an interior site, as `(edge index, other endpoint)`.
    pub fn incident(&self, s: Site) -> Vec<(usize, Site)> {
        s.neighbors()
            .into_iter()
            .filter_map(|n| self.edge_index(s, n).map(|e| (e, n)))
            .collect()
    }
}

/// Bit-packed ±1 vector; a set bit encodes `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinBits {
    len: usize,
    words: Vec<u64>,
}

impl SpinBits {
    pub fn all_plus(len: usize) -> Self {
        SpinBits {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn all_minus(len: usize) -> Self {
        let mut b = SpinBits::all_plus(len);
        for i in 0..len {
            b.set(i, -1);
        }
        b
    }

    /// Low `len` bits of `word` (len <= 64).
    pub fn from_word(len: usize, word: u64) -> Self {
        assert!(len <= 64);
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        SpinBits {
            len,
            words: if len == 0 { vec![] } else { vec![word & mask] },
        }
    }

    pub fn from_spins(spins: &[i8]) -> Self {
        let mut b = SpinBits::all_plus(spins.len());
        for (i, &s) in spins.iter().enumerate() {
            b.set(i, s);
        }
        b
    }

    /// The state as a word (len <= 64).
    pub fn to_word(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn is_minus(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        if self.is_minus(i) {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, s: i8) {
        debug_assert!(s == 1 || s == -1);
        let bit = 1u64 << (i & 63);
        if s < 0 {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Sitewise product with another vector of the same length.
    pub fn product(&self, other: &SpinBits) -> SpinBits {
        assert_eq!(self.len, other.len);
        SpinBits {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        }
    }

    /// `self >= other` sitewise.
    pub fn dominates(&self, other: &SpinBits) -> bool {
        // self >= other fails exactly where self = -1 and other = +1
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn count_minus(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of sites where the two vectors differ.
    pub fn hamming(&self, other: &SpinBits) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    Interior,
    Full,
}

/// ±1 assignment to the sites of a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinField {
    window: LatticeWindow,
    coverage: Coverage,
    bits: SpinBits,
}

impl SpinField {
    pub fn all_plus(window: LatticeWindow, coverage: Coverage) -> Self {
        let len = match coverage {
            Coverage::Interior => window.interior_len(),
            Coverage::Full => window.full_len(),
        };
        SpinField {
            window,
            coverage,
            bits: SpinBits::all_plus(len),
        }
    }

    pub fn from_bits(window: LatticeWindow, coverage: Coverage, bits: SpinBits) -> Result<Self> {
        let want = match coverage {
            Coverage::Interior => window.interior_len(),
            Coverage::Full => window.full_len(),
        };
        if bits.len() != want {
            return Err(Error::ShapeMismatch(format!(
                "{} spins for a window of {want} sites",
                bits.len()
            )));
        }
        Ok(SpinField {
            window,
            coverage,
            bits,
        })
    }

    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    pub fn coverage(&self) -> Coverage {
        self.coverage
    }

    pub fn bits(&self) -> &SpinBits {
        &self.bits
    }

    pub fn into_bits(self) -> SpinBits {
        self.bits
    }

    fn index(&self, s: Site) -> Option<usize> {
        match self.coverage {
            Coverage::Interior => self.window.interior_index(s),
            Coverage::Full => self.window.full_index(s),
        }
    }

    pub fn covers(&self, s: Site) -> bool {
        self.index(s).is_some()
    }

    pub fn get(&self, s: Site) -> Option<i8> {
        self.index(s).map(|i| self.bits.get(i))
    }

    /// Value at a covered site; panics otherwise.
    pub fn at(&self, s: Site) -> i8 {
        self.get(s)
            .unwrap_or_else(|| panic!("site {s:?} not covered by field"))
    }

    pub fn set(&mut self, s: Site, value: i8) -> Result<()> {
        let i = self
            .index(s)
            .ok_or_else(|| Error::ShapeMismatch(format!("site {s:?} not covered")))?;
        self.bits.set(i, value);
        Ok(())
    }

    /// The interior part of the field.
    pub fn interior(&self) -> SpinField {
        let n = self.window.interior_len();
        let mut bits = SpinBits::all_plus(n);
        for i in 0..n {
            bits.set(i, self.bits.get(i));
        }
        SpinField {
            window: self.window,
            coverage: Coverage::Interior,
            bits,
        }
    }

    /// Sitewise negation.
    pub fn negated(&self) -> SpinField {
        let mut out = self.clone();
        for i in 0..out.bits.len() {
            out.bits.flip(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisorderKind {
    /// Noise on the edges of a space-time window.
    SpaceTime,
    /// Per-vertex noise `xi_v` of a hidden random field.
    Vertex,
    /// Per-edge noise `xi_{v,w}` of a hidden random field.
    Edge,
}

/// Realized noise signs, one per edge (or vertex) in the owning geometry's order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisorderField {
    pub kind: DisorderKind,
    pub signs: SpinBits,
}

impl DisorderField {
    pub fn all_plus(kind: DisorderKind, len: usize) -> Self {
        DisorderField {
            kind,
            signs: SpinBits::all_plus(len),
        }
    }

    pub fn get(&self, i: usize) -> i8 {
        self.signs.get(i)
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Observed edge signs `Y^{qr} = X^q X^r xi^{qr}` in window edge order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observations {
    pub signs: SpinBits,
}

impl Observations {
    pub fn get(&self, e: usize) -> i8 {
        self.signs.get(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceTimeSample {
    /// Signal over `J` and its boundary.
    pub signal: SpinField,
    pub disorder: DisorderField,
    pub observations: Observations,
}

/// Combine a full-coverage signal with edge noise into observations.
pub fn observe(window: &LatticeWindow, signal: &SpinField, disorder: &DisorderField) -> Result<Observations> {
    if signal.coverage() != Coverage::Full || signal.window() != *window {
        return Err(Error::ShapeMismatch("signal must cover the full window".into()));
    }
    if disorder.len() != window.edge_count() {
        return Err(Error::ShapeMismatch("disorder does not match window edges".into()));
    }
    let mut signs = SpinBits::all_plus(window.edge_count());
    for (e, edge) in window.edges().iter().enumerate() {
        let y = signal.at(edge.a) * signal.at(edge.b) * disorder.get(e);
        signs.set(e, y);
    }
    Ok(Observations { signs })
}

/// Draw signal (i.i.d. uniform spins on `J` and its boundary), edge noise
/// (`P[xi = -1] = p`) and the resulting observations.
///
/// Draw order is fixed: all signal sites in full-index order, then all edges.
pub fn sample_space_time_model(params: &ModelParams, window: &LatticeWindow, seed: SeedSpec) -> SpaceTimeSample {
    let mut rng = seed.stream();
    let mut signal = SpinField::all_plus(*window, Coverage::Full);
    for i in 0..window.full_len() {
        signal.bits.set(i, rng.spin());
    }
    let mut disorder = DisorderField::all_plus(DisorderKind::SpaceTime, window.edge_count());
    for e in 0..window.edge_count() {
        // always consume one draw per edge so p = 0 keeps the stream layout
        let flip = rng.bernoulli(params.p);
        if flip {
            disorder.signs.set(e, -1);
        }
    }
    let observations = observe(window, &signal, &disorder).expect("shapes built above");
    SpaceTimeSample {
        signal,
        disorder,
        observations,
    }
}

/// `sigma^q = x^q z^q` sitewise.
pub fn gauge_transform(x: &SpinField, z: &SpinField) -> Result<SpinField> {
    if x.window != z.window || x.coverage != z.coverage {
        return Err(Error::ShapeMismatch("gauge transform needs identical windows and coverage".into()));
    }
    Ok(SpinField {
        window: x.window,
        coverage: x.coverage,
        bits: x.bits.product(&z.bits),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBound {
    pub value: f64,
    /// Set when the bound carries no information (`p = 0`).
    pub vacuous: bool,
}

/// Doeblin bound `2(1 - e^{-4 beta k})^{m+1}` on the effect of conditioning
/// on the signal beyond spatial radius `m`.
pub fn truncation_error_bound(beta: Coupling, k: usize, m: usize) -> Result<TruncationBound> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    match beta {
        Coupling::Infinite => Ok(TruncationBound {
            value: 2.0,
            vacuous: true,
        }),
        Coupling::Finite(b) => {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::InvalidArgument(format!("coupling {b} must be finite and >= 0")));
            }
            let base = -(-4.0 * b * k as f64).exp_m1();
            let value = 2.0 * base.powi(m as i32 + 1);
            Ok(TruncationBound {
                value,
                vacuous: value >= 2.0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn beta_closed_forms() {
        assert_eq!(beta_from_p(0.5).unwrap(), Coupling::Finite(0.0));
        let Coupling::Finite(b) = beta_from_p(0.25).unwrap() else { panic!() };
        assert!((b - 0.549_306_1).abs() < 1e-7);
        assert!((b - 3f64.sqrt().ln()).abs() < 1e-15);
        let Coupling::Finite(b) = beta_from_p(0.1).unwrap() else { panic!() };
        assert!((b - 3f64.ln()).abs() < 1e-15);
        assert_eq!(beta_from_p(0.0).unwrap(), Coupling::Infinite);
        assert!(beta_from_p(0.6).is_err());
        assert!(beta_from_p(-0.1).is_err());
        assert!(beta_from_p(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn beta_inverse_roundtrip(beta in 0.0f64..8.0) {
            let p = p_from_beta(beta);
            let Coupling::Finite(back) = beta_from_p(p).unwrap() else { panic!() };
            prop_assert!((back - beta).abs() < 1e-9 * (1.0 + beta));
        }

        #[test]
        fn beta_decreasing(p1 in 1e-6f64..0.5, p2 in 1e-6f64..0.5) {
            prop_assume!(p1 < p2);
            let Coupling::Finite(b1) = beta_from_p(p1).unwrap() else { panic!() };
            let Coupling::Finite(b2) = beta_from_p(p2).unwrap() else { panic!() };
            prop_assert!(b1 > b2);
        }
    }

    #[test]
    fn window_geometry() {
        for (k, m) in [(1, 0), (2, 1), (4, 2), (3, 3)] {
            let w = LatticeWindow::new(k, m).unwrap();
            assert_eq!(w.interior_len(), k * (2 * m + 1));
            let edges = w.edges();
            assert_eq!(edges.len(), w.edge_count());
            for (i, e) in edges.iter().enumerate() {
                assert_eq!(w.edge_index(e.a, e.b), Some(i));
                assert_eq!(w.edge_index(e.b, e.a), Some(i));
                assert_eq!(e.a.l1(&e.b), 1);
                // no edge with both endpoints on the boundary
                assert!(w.is_interior(e.a) || w.is_interior(e.b));
                assert!(w.full_index(e.a).is_some() && w.full_index(e.b).is_some());
            }
            for i in 0..w.full_len() {
                assert_eq!(w.full_index(w.site_of(i)), Some(i));
            }
            for s in w.interior_sites() {
                let inc = w.incident(s);
                assert!(inc.len() <= 4);
                let want = if s.t == k as i64 { 3 } else { 4 };
                assert_eq!(inc.len(), want);
            }
        }
    }

    #[test]
    fn noiseless_sample_has_no_flips() {
        let w = LatticeWindow::new(3, 2).unwrap();
        let params = ModelParams::new(0.0).unwrap();
        let s = sample_space_time_model(&params, &w, SeedSpec::new(9));
        assert_eq!(s.disorder.signs.count_minus(), 0);
        for (e, edge) in w.edges().iter().enumerate() {
            assert_eq!(s.observations.get(e), s.signal.at(edge.a) * s.signal.at(edge.b));
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let w = LatticeWindow::new(4, 2).unwrap();
        let params = ModelParams::new(0.3).unwrap();
        let seed = SeedSpec::new(42).with_replicate(5);
        assert_eq!(
            sample_space_time_model(&params, &w, seed),
            sample_space_time_model(&params, &w, seed)
        );
        let other = sample_space_time_model(&params, &w, seed.with_replicate(6));
        assert_ne!(sample_space_time_model(&params, &w, seed), other);
    }

    #[test]
    fn observation_consistency() {
        let w = LatticeWindow::new(3, 1).unwrap();
        let params = ModelParams::new(0.2).unwrap();
        for r in 0..20 {
            let s = sample_space_time_model(&params, &w, SeedSpec::new(3).with_replicate(r));
            for (e, edge) in w.edges().iter().enumerate() {
                let prod = s.observations.get(e) * s.signal.at(edge.a) * s.signal.at(edge.b);
                assert_eq!(prod, s.disorder.get(e));
            }
        }
    }

    #[test]
    fn disorder_mean_matches_binomial() {
        let w = LatticeWindow::new(4, 2).unwrap();
        let params = ModelParams::new(0.3).unwrap();
        let reps = 100_000u32;
        let per = w.edge_count() as f64;
        let mut total = 0.0;
        for r in 0..reps {
            let s = sample_space_time_model(&params, &w, SeedSpec::new(11).with_replicate(r));
            total += per - 2.0 * s.disorder.signs.count_minus() as f64;
        }
        let n = reps as f64 * per;
        let mean = total / n;
        let se = (1.0 - 0.4f64 * 0.4).sqrt() / n.sqrt();
        assert!((mean - 0.4).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn gauge_identities() {
        let w = LatticeWindow::new(3, 1).unwrap();
        // exhaustive over 3x3 interior fields
        for xw in (0u64..512).step_by(7) {
            let x = SpinField::from_bits(w, Coverage::Interior, SpinBits::from_word(9, xw)).unwrap();
            assert_eq!(
                gauge_transform(&x, &x).unwrap(),
                SpinField::all_plus(w, Coverage::Interior)
            );
            for zw in 0u64..512 {
                let z = SpinField::from_bits(w, Coverage::Interior, SpinBits::from_word(9, zw)).unwrap();
                let sigma = gauge_transform(&x, &z).unwrap();
                assert_eq!(gauge_transform(&x, &sigma).unwrap(), z);
            }
        }
        let plus = SpinField::all_plus(w, Coverage::Interior);
        let z = SpinField::from_bits(w, Coverage::Interior, SpinBits::from_word(9, 0b101_100_011)).unwrap();
        assert_eq!(gauge_transform(&plus, &z).unwrap(), z);
        let full = SpinField::all_plus(w, Coverage::Full);
        assert!(gauge_transform(&full, &z).is_err());
    }

    #[test]
    fn truncation_bound_values() {
        assert_eq!(truncation_error_bound(Coupling::Finite(0.0), 5, 3).unwrap().value, 0.0);
        let b = truncation_error_bound(beta_from_p(0.1).unwrap(), 1, 0).unwrap();
        assert!((b.value - 160.0 / 81.0).abs() < 1e-12);
        assert!(!b.vacuous);
        let beta = beta_from_p(0.4).unwrap();
        let b8 = truncation_error_bound(beta, 2, 8).unwrap().value;
        let b4 = truncation_error_bound(beta, 2, 4).unwrap().value;
        assert!(b8 < b4);
        let inf = truncation_error_bound(Coupling::Infinite, 2, 2).unwrap();
        assert!(inf.vacuous && inf.value == 2.0);
    }

    #[test]
    fn observation_law_is_sign_symmetric() {
        // k = 2, m = 0: 7 signal sites, 6 edges; enumerate (x, xi) exactly
        let w = LatticeWindow::new(2, 0).unwrap();
        let p: f64 = 0.3;
        let edges = w.edges();
        let mut law = vec![0.0; 1 << edges.len()];
        let mut flipped = vec![0.0; 1 << edges.len()];
        for xw in 0u64..(1 << w.full_len()) {
            let x = SpinField::from_bits(w, Coverage::Full, SpinBits::from_word(w.full_len(), xw)).unwrap();
            let nx = x.negated();
            for nw in 0u64..(1 << edges.len()) {
                let xi = DisorderField {
                    kind: DisorderKind::SpaceTime,
                    signs: SpinBits::from_word(edges.len(), nw),
                };
                let flips = xi.signs.count_minus() as i32;
                let pr = 2f64.powi(-(w.full_len() as i32)) * p.powi(flips) * (1.0 - p).powi(edges.len() as i32 - flips);
                law[observe(&w, &x, &xi).unwrap().signs.to_word() as usize] += pr;
                flipped[observe(&w, &nx, &xi).unwrap().signs.to_word() as usize] += pr;
            }
        }
        assert_eq!(law, flipped);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
