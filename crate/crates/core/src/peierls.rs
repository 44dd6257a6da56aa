//! Contours, their counts, the Peierls series and the low-noise certificate.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{enumerate_conditional, InferenceBudget, LawTable};
use crate::model::{beta_from_p, Coupling, DisorderField, LatticeWindow, Site, SpinField};

/// Largest boundary length the exhaustive enumerator accepts.
pub const MAX_BOUNDARY: usize = 14;

/// A finite 4-connected site set in free `Z^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    cells: BTreeSet<(i64, i64)>,
}

impl Contour {
    pub fn new(cells: impl IntoIterator<Item = (i64, i64)>) -> Result<Self> {
        let cells: BTreeSet<_> = cells.into_iter().collect();
        if cells.is_empty() {
            return Err(Error::InvalidArgument("empty contour".into()));
        }
        if !connected(&cells) {
            return Err(Error::InvalidArgument("contour is not connected".into()));
        }
        Ok(Contour { cells })
    }

    pub fn cells(&self) -> &BTreeSet<(i64, i64)> {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: (i64, i64)) -> bool {
        self.cells.contains(&c)
    }

    /// `|E J'|` in free `Z^2`.
    pub fn boundary_length(&self) -> usize {
        self.cells
            .iter()
            .flat_map(|&c| nbrs(c))
            .filter(|n| !self.cells.contains(n))
            .count()
    }

    pub fn is_simply_connected(&self) -> bool {
        let cells: Vec<_> = self.cells.iter().copied().collect();
        !has_hole(&cells)
    }

    /// Same set with every hole filled.
    pub fn filled(&self) -> Contour {
        let (x0, x1, y0, y1) = bbox(self.cells.iter().copied());
        let outside = exterior(&self.cells.iter().copied().collect::<Vec<_>>(), (x0, x1, y0, y1));
        let mut cells = BTreeSet::new();
        for x in x0..=x1 {
            for y in y0..=y1 {
                if !outside.contains(&(x, y)) {
                    cells.insert((x, y));
                }
            }
        }
        Contour { cells }
    }
}

fn nbrs((x, y): (i64, i64)) -> [(i64, i64); 4] {
    [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
}

fn connected(cells: &BTreeSet<(i64, i64)>) -> bool {
    let Some(&start) = cells.iter().next() else { return true };
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(c) = stack.pop() {
        for n in nbrs(c) {
            if cells.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == cells.len()
}

fn bbox(cells: impl Iterator<Item = (i64, i64)>) -> (i64, i64, i64, i64) {
    cells.fold((i64::MAX, i64::MIN, i64::MAX, i64::MIN), |(a, b, c, d), (x, y)| {
        (a.min(x), b.max(x), c.min(y), d.max(y))
    })
}

/// Cells of the padded bounding box reachable from outside without
/// crossing `cells`.
fn exterior(cells: &[(i64, i64)], (x0, x1, y0, y1): (i64, i64, i64, i64)) -> HashSet<(i64, i64)> {
    let occupied: HashSet<_> = cells.iter().copied().collect();
    let start = (x0 - 1, y0 - 1);
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(c) = stack.pop() {
        for n in nbrs(c) {
            if n.0 < x0 - 1 || n.0 > x1 + 1 || n.1 < y0 - 1 || n.1 > y1 + 1 {
                continue;
            }
            if !occupied.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen
}

fn has_hole(cells: &[(i64, i64)]) -> bool {
    let bb = bbox(cells.iter().copied());
    let area = ((bb.1 - bb.0 + 3) * (bb.3 - bb.2 + 3)) as usize;
    exterior(cells, bb).len() + cells.len() < area
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourCounts {
    pub max_boundary: usize,
    /// `counts[l]`: simply connected sets containing the origin with `|E J'| = l`.
    pub counts: Vec<u64>,
    /// `classes[l]`: the same up to translation.
    pub classes: Vec<u64>,
}

impl ContourCounts {
    pub fn count(&self, l: usize) -> u64 {
        self.counts.get(l).copied().unwrap_or(0)
    }

    /// `l 3^{l-1}`.
    pub fn counting_bound(l: usize) -> f64 {
        if l == 0 {
            return 0.0;
        }
        l as f64 * 3f64.powi(l as i32 - 1)
    }
}

/// Cells needed before every polyomino has boundary longer than `l`.
fn max_cells(l: usize) -> usize {
    // minimal perimeter of n cells is 2 ceil(2 sqrt n)
    let mut n = 1;
    while 2 * ((2.0 * ((n + 1) as f64).sqrt()).ceil() as usize) <= l {
        n += 1;
    }
    n
}

struct Redelmeier {
    max_cells: usize,
    max_boundary: usize,
    width: i64,
    seen: Vec<bool>,
    poly: Vec<(i64, i64)>,
    counts: Vec<u64>,
    classes: Vec<u64>,
}

impl Redelmeier {
    fn slot(&self, (x, y): (i64, i64)) -> usize {
        (y * self.width + x + self.max_cells as i64) as usize
    }

    fn admissible(&self, (x, y): (i64, i64)) -> bool {
        y > 0 || (y == 0 && x >= 0)
    }

    fn record(&mut self) {
        let n = self.poly.len();
        let set: HashSet<_> = self.poly.iter().copied().collect();
        let shared = self
            .poly
            .iter()
            .map(|&c| nbrs(c).iter().filter(|q| set.contains(q)).count())
            .sum::<usize>();
        let l = 4 * n - shared;
        if l <= self.max_boundary && !has_hole(&self.poly) {
            self.counts[l] += n as u64;
            self.classes[l] += 1;
        }
    }

    fn grow(&mut self, mut untried: Vec<(i64, i64)>) {
        while let Some(c) = untried.pop() {
            self.step(c, untried.clone());
        }
    }

    /// Add `c`, then extend with `untried` plus the new neighbours of `c`.
    fn step(&mut self, c: (i64, i64), mut untried: Vec<(i64, i64)>) {
        self.poly.push(c);
        self.record();
        if self.poly.len() < self.max_cells {
            let mut added = Vec::new();
            for n in nbrs(c) {
                if self.admissible(n) {
                    let s = self.slot(n);
                    if !self.seen[s] {
                        self.seen[s] = true;
                        added.push(n);
                    }
                }
            }
            untried.extend_from_slice(&added);
            self.grow(untried);
            for n in added {
                let s = self.slot(n);
                self.seen[s] = false;
            }
        }
        self.poly.pop();
    }
}

/// Exhaustive counts of simply connected origin-containing sets by boundary
/// length, via Redelmeier enumeration of fixed polyominoes.
pub fn enumerate_contours(max_boundary: usize) -> Result<ContourCounts> {
    if max_boundary > MAX_BOUNDARY {
        return Err(Error::BudgetExceeded {
            what: "contour enumeration boundary length",
            needed: max_boundary,
            limit: MAX_BOUNDARY,
        });
    }
    let cells = max_cells(max_boundary);
    let width = 2 * cells as i64 + 1;
    let fresh = || Redelmeier {
        max_cells: cells,
        max_boundary,
        width,
        seen: vec![false; (width * (cells as i64 + 1)) as usize],
        poly: Vec::new(),
        counts: vec![0; max_boundary + 1],
        classes: vec![0; max_boundary + 1],
    };
    let mut counts = vec![0u64; max_boundary + 1];
    let mut classes = vec![0u64; max_boundary + 1];
    if max_boundary >= 4 {
        counts[4] = 1;
        classes[4] = 1;
    }
    let (a, b) = ((0, 1), (1, 0));
    let branches: Vec<(Vec<u64>, Vec<u64>)> = [(a, vec![b]), (b, vec![])]
        .into_par_iter()
        .map(|(first, rest)| {
            let mut r = fresh();
            for c in [(0, 0), a, b] {
                let s = r.slot(c);
                r.seen[s] = true;
            }
            r.poly.push((0, 0));
            if r.max_cells > 1 {
                r.step(first, rest);
            }
            (r.counts, r.classes)
        })
        .collect();
    for (c, k) in branches {
        for l in 0..=max_boundary {
            counts[l] += c[l];
            classes[l] += k[l];
        }
    }
    for (l, &c) in counts.iter().enumerate() {
        debug_assert!(c as f64 <= ContourCounts::counting_bound(l));
    }
    Ok(ContourCounts {
        max_boundary,
        counts,
        classes,
    })
}

fn cached_counts() -> &'static ContourCounts {
    static COUNTS: OnceLock<ContourCounts> = OnceLock::new();
    COUNTS.get_or_init(|| enumerate_contours(MAX_BOUNDARY).expect("within budget"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub partial: f64,
    /// Closed-form remainder after the last summed term.
    pub tail: f64,
    pub terms: usize,
    pub ratio: f64,
}

/// `sum_{l >= start} a_l x^l` where `a_l` is the exact count for `l <= L`
/// when `exact` is given, and `l 3^{l-1}` otherwise.
fn series(series: &'static str, x: f64, exact: Option<&ContourCounts>, tol: f64) -> Result<SeriesValue> {
    let r = 3.0 * x;
    if r >= 1.0 {
        return Err(Error::DivergentSeries { series, ratio: r });
    }
    if x == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            partial: 0.0,
            tail: 0.0,
            terms: 0,
            ratio: r,
        });
    }
    // sum_{l > L} l 3^{l-1} x^l = (1/3) r^{L+1} ((L+1) - L r) / (1-r)^2
    let tail_after = |l: usize| {
        let lf = l as f64;
        r.powi(l as i32 + 1) * ((lf + 1.0) - lf * r) / (1.0 - r).powi(2) / 3.0
    };
    let mut partial = 0.0;
    let mut l = 3;
    let floor = exact.map_or(0, |c| c.max_boundary);
    loop {
        let term = match exact {
            Some(c) if l <= c.max_boundary => c.count(l) as f64 * x.powi(l as i32),
            _ => l as f64 * r.powi(l as i32 - 1) * x,
        };
        partial += term;
        let tail = tail_after(l);
        if l >= floor && (tail < tol || tail <= f64::EPSILON * partial) {
            return Ok(SeriesValue {
                value: partial + tail,
                partial,
                tail,
                terms: l - 2,
                ratio: r,
            });
        }
        l += 1;
    }
}

fn c1_x(p: f64) -> f64 {
    (p / (1.0 - p)).sqrt()
}

fn c2_x(p: f64) -> f64 {
    2.0 * p.powf(0.25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeierlsConstants {
    pub p: f64,
    pub c1: Result<SeriesValue>,
    pub c2: Result<SeriesValue>,
    /// Exact counts up to the enumeration limit, the bound beyond.
    pub c1_sharpened: Result<SeriesValue>,
    pub c2_sharpened: Result<SeriesValue>,
}

/// `c1 = sum_{l>=3} l 3^{l-1} (p/(1-p))^{l/2}`, `c2 = sum_{l>=3} l 3^{l-1} 2^l p^{l/4}`.
pub fn peierls_series(p: f64, tol: f64) -> Result<PeierlsConstants> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let counts = cached_counts();
    Ok(PeierlsConstants {
        p,
        c1: series("c1", c1_x(p), None, tol),
        c2: series("c2", c2_x(p), None, tol),
        c1_sharpened: series("c1", c1_x(p), Some(counts), tol),
        c2_sharpened: series("c2", c2_x(p), Some(counts), tol),
    })
}

/// `(1/3)[r/(1-r)^2 - r - 2r^2]`, the full series at ratio `r < 1`.
pub fn series_closed_form(r: f64) -> f64 {
    (r / (1.0 - r).powi(2) - r - 2.0 * r * r) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowNoiseThreshold {
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Largest `p` with `c1(p) <= 1/4` and `c2(p) <= 1/2`.
pub fn low_noise_threshold(tol: f64) -> Result<LowNoiseThreshold> {
    let ok = |p: f64| {
        let (r1, r2) = (3.0 * c1_x(p), 3.0 * c2_x(p));
        r1 < 1.0 && r2 < 1.0 && series_closed_form(r1) <= 0.25 && series_closed_form(r2) <= 0.5
    };
    let (mut lo, mut hi) = (0.0f64, 1.0 / 1296.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = peierls_series(lo, tol)?;
    Ok(LowNoiseThreshold {
        p: lo,
        c1: s.c1?.value,
        c2: s.c2?.value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourWeight {
    pub lhs: f64,
    pub rhs: f64,
}

impl ContourWeight {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12)
    }
}

/// Window edges with exactly one endpoint in `sites`.
pub fn clipped_boundary_edges(window: &LatticeWindow, sites: &BTreeSet<Site>) -> Vec<usize> {
    window
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| sites.contains(&e.a) != sites.contains(&e.b))
        .map(|(i, _)| i)
        .collect()
}

/// Exact `Sigma^x` probability that `contour` is separated from correctly
/// decoded sites, against `exp(-2 beta sum xi)` over its clipped boundary.
/// Boundary sites always count as correctly decoded.
pub fn contour_weight_check(
    window: &LatticeWindow,
    beta: Coupling,
    disorder: &DisorderField,
    x: &SpinField,
    contour: &[Site],
) -> Result<ContourWeight> {
    let b = beta.finite("contour_weight_check")?;
    let sites: BTreeSet<Site> = contour.iter().copied().collect();
    if sites.is_empty() || sites.iter().any(|s| !window.is_interior(*s)) {
        return Err(Error::InvalidArgument("contour must be a nonempty subset of the window".into()));
    }
    let cells = Contour::new(sites.iter().map(|s| (s.t, s.v)))?;
    let _ = cells;
    let edges = window.edges();
    let boundary = clipped_boundary_edges(window, &sites);
    let rhs = (-2.0 * b * boundary.iter().map(|&e| disorder.get(e) as f64).sum::<f64>()).exp();
    let law = enumerate_conditional(window, beta, disorder, x, &InferenceBudget::default())?;
    let LawTable::Dense(probs) = &law.table else {
        return Err(Error::InvalidArgument("expected a dense law".into()));
    };
    // (interior index, required spin)
    let mut req: Vec<(usize, i8)> = Vec::new();
    for &e in &boundary {
        let edge = edges[e];
        let (inside, outside) = if sites.contains(&edge.a) { (edge.a, edge.b) } else { (edge.b, edge.a) };
        req.push((window.interior_index(inside).expect("interior"), -x.at(inside)));
        if let Some(i) = window.interior_index(outside) {
            req.push((i, x.at(outside)));
        }
    }
    let mut lhs = 0.0;
    for (word, &pr) in probs.iter().enumerate() {
        // bit set means -1
        if req.iter().all(|&(i, s)| ((word >> i) & 1 == 1) == (s < 0)) {
            lhs += pr;
        }
    }
    Ok(ContourWeight { lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstabilityCertificate {
    pub p: f64,
    pub k: usize,
    pub m: usize,
    pub c1: f64,
    pub c2: f64,
    /// Lower bound on the disorder probability of a good realization, `1 - c2`.
    pub disorder_probability: f64,
    /// Lower bound on the conditional mass of the true origin spin, `1 - c1`.
    pub origin_mass: f64,
    /// Uniform lower bound on the order parameter.
    pub order_parameter: f64,
    pub threshold: f64,
}

pub fn instability_probability_bound(p: f64, k: usize, m: usize) -> Result<InstabilityCertificate> {
    LatticeWindow::new(k, m)?;
    beta_from_p(p)?;
    let tol = 1e-15;
    let th = low_noise_threshold(tol)?;
    if p > th.p {
        return Err(Error::CertificateRefused(format!("p = {p} exceeds the low-noise threshold {}", th.p)));
    }
    let s = peierls_series(p, tol)?;
    let (c1, c2) = (s.c1?.value, s.c2?.value);
    if c1 > 0.25 || c2 > 0.5 {
        return Err(Error::CertificateRefused(format!("c1 = {c1}, c2 = {c2}")));
    }
    Ok(InstabilityCertificate {
        p,
        k,
        m,
        c1,
        c2,
        disorder_probability: 1.0 - c2,
        origin_mass: 1.0 - c1,
        order_parameter: 0.25,
        threshold: th.p,
    })
}
