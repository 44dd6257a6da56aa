//! Dobrushin comparison for the filter started from a known versus an
//! unknown initial row.
//!
//! The index set is `I = {0..k} x [-m,m]`. Both laws condition on the
//! observations and on the true signal at the spatial sides `v = +-(m+1)`;
//! `mu` additionally fixes the time-0 row. Interdependence coefficients are
//! computed as exhaustive suprema of single-site conditional differences,
//! either uniformly over all observation signs or for one realization.

use crate::error::{Error, Result};
use crate::model::{beta_from_p, Coupling, LatticeWindow, Observations, Site, SpinField};
use crate::stats::plus_probability;

#[derive(Debug, Clone, PartialEq)]
pub struct DobrushinData {
    window: LatticeWindow,
    /// Sparse rows `j -> [(i, C_ji)]`.
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    target: Vec<usize>,
}

impl DobrushinData {
    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    /// Number of sites in `I`.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Index of `(t, v)` in `I`: `t (2m+1) + (v+m)`.
    pub fn index_of(&self, s: Site) -> Option<usize> {
        index_in(&self.window, s)
    }

    pub fn site_of(&self, i: usize) -> Site {
        let w = self.window.width();
        Site::new((i / w) as i64, (i % w) as i64 - self.window.m() as i64)
    }

    pub fn coefficient(&self, j: usize, i: usize) -> f64 {
        self.rows[j].iter().find(|(c, _)| *c == i).map_or(0.0, |(_, v)| *v)
    }

    pub fn row(&self, j: usize) -> &[(usize, f64)] {
        &self.rows[j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    /// Replace the target set `J` (sites the test function depends on).
    pub fn with_target(mut self, sites: &[Site]) -> Result<Self> {
        let mut t = Vec::with_capacity(sites.len());
        for &s in sites {
            t.push(
                self.index_of(s)
                    .ok_or_else(|| Error::InvalidArgument(format!("{s:?} not in the index set")))?,
            );
        }
        t.sort_unstable();
        t.dedup();
        self.target = t;
        Ok(self)
    }
}

fn index_in(window: &LatticeWindow, s: Site) -> Option<usize> {
    let m = window.m() as i64;
    if s.t < 0 || s.t > window.k() as i64 || s.v < -m || s.v > m {
        return None;
    }
    Some(s.t as usize * window.width() + (s.v + m) as usize)
}

/// One incident term `y * s_n` of a local field.
#[derive(Debug, Clone, Copy)]
struct Term {
    /// Observation sign, `None` to take the sup over both signs.
    y: Option<i8>,
    /// Neighbour spin if it is pinned, `None` if it ranges over `+-1`.
    spin: Option<i8>,
    /// Index in `I` of a free neighbour.
    index: Option<usize>,
}

fn options(v: Option<i8>) -> &'static [i8] {
    match v {
        Some(1) => &[1],
        Some(-1) => &[-1],
        _ => &[1, -1],
    }
}

/// `sup |P(+ | s_i = +1, rest) - P(+ | s_i = -1, rest)|` over every
/// admissible value of the other terms.
fn sensitivity(beta: f64, terms: &[Term], which: usize) -> f64 {
    let mut best = 0.0f64;
    let others: Vec<&Term> = terms.iter().enumerate().filter(|(n, _)| *n != which).map(|(_, t)| t).collect();
    let mut acc = vec![0.0f64];
    for t in &others {
        let mut next = Vec::with_capacity(acc.len() * 4);
        for &h in &acc {
            for &y in options(t.y) {
                for &s in options(t.spin) {
                    next.push(h + (y * s) as f64);
                }
            }
        }
        acc = next;
    }
    for &y in options(terms[which].y) {
        for &h in &acc {
            let d = (plus_probability(beta * (h + y as f64)) - plus_probability(beta * (h - y as f64))).abs();
            best = best.max(d);
        }
    }
    best
}

fn build(window: &LatticeWindow, beta: f64, realized: Option<(&Observations, &SpinField)>) -> DobrushinData {
    let w = window.width();
    let n = (window.k() + 1) * w;
    let mut rows = vec![Vec::new(); n];
    let mut b = vec![0.0; n];
    for bj in b.iter_mut().take(w) {
        *bj = 1.0;
    }
    for j in w..n {
        let site = Site::new((j / w) as i64, (j % w) as i64 - window.m() as i64);
        let terms: Vec<Term> = window
            .incident(site)
            .into_iter()
            .map(|(e, nb)| {
                let index = index_in(window, nb);
                match realized {
                    None => Term { y: None, spin: None, index },
                    Some((obs, x)) => Term {
                        y: Some(obs.get(e)),
                        spin: if index.is_some() { None } else { Some(x.at(nb)) },
                        index,
                    },
                }
            })
            .collect();
        for (which, t) in terms.iter().enumerate() {
            if let Some(i) = t.index {
                let c = sensitivity(beta, &terms, which);
                if c > 0.0 {
                    rows[j].push((i, c));
                }
            }
        }
        rows[j].sort_by_key(|(i, _)| *i);
    }
    let k = window.k();
    DobrushinData {
        window: *window,
        rows,
        b,
        target: (k * w..(k + 1) * w).collect(),
    }
}

/// Coefficients valid for every observation realization.
pub fn build_dobrushin_data(window: &LatticeWindow, beta: Coupling) -> Result<DobrushinData> {
    let beta = beta.finite("build_dobrushin_data")?;
    Ok(build(window, beta, None))
}

/// Sharper coefficients for one realization of observations and side signal.
pub fn build_dobrushin_data_realized(
    window: &LatticeWindow,
    beta: Coupling,
    observations: &Observations,
    x: &SpinField,
) -> Result<DobrushinData> {
    let beta = beta.finite("build_dobrushin_data")?;
    if observations.signs.len() != window.edge_count() || x.window() != *window {
        return Err(Error::ShapeMismatch("observations or signal do not match the window".into()));
    }
    Ok(build(window, beta, Some((observations, x))))
}

/// `(sup_j sum_i C_ji, sup < 1)`.
pub fn dobrushin_condition(data: &DobrushinData) -> (f64, bool) {
    let sup = data
        .rows
        .iter()
        .map(|r| r.iter().map(|(_, c)| c).sum::<f64>())
        .fold(0.0, f64::max);
    (sup, sup < 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonBound {
    /// Certified upper bound: partial sum plus tail.
    pub value: f64,
    pub partial: f64,
    pub tail: f64,
    pub terms: usize,
    pub sup_row_sum: f64,
}

/// `sum_{j in J} sum_i D_ji b_i` with `D = sum_n C^n`, by iterating
/// `v <- C v` from `v = b`. Stops once the geometric tail bound
/// `|J| rho ||v_n||_inf / (1 - rho)` falls below `tol` and adds it.
pub fn comparison_bound(data: &DobrushinData, tol: f64) -> Result<ComparisonBound> {
    let (rho, holds) = dobrushin_condition(data);
    if !holds {
        return Err(Error::DobrushinConditionFails(rho));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let jn = data.target.len() as f64;
    let mut v = data.b.clone();
    let mut partial = 0.0;
    let mut terms = 0;
    loop {
        partial += data.target.iter().map(|&j| v[j]).sum::<f64>();
        terms += 1;
        let norm = v.iter().copied().fold(0.0, f64::max);
        let tail = jn * rho * norm / (1.0 - rho);
        if tail < tol || norm == 0.0 {
            return Ok(ComparisonBound {
                value: partial + tail,
                partial,
                tail,
                terms,
                sup_row_sum: rho,
            });
        }
        v = data
            .rows
            .iter()
            .map(|row| row.iter().map(|&(i, c)| c * v[i]).sum())
            .collect();
    }
}

/// `sup_j sum_i e^{|j-i|_1} C_ji`.
pub fn weighted_norm(data: &DobrushinData) -> f64 {
    (0..data.len())
        .map(|j| {
            let sj = data.site_of(j);
            data.rows[j]
                .iter()
                .map(|&(i, c)| (sj.l1(&data.site_of(i)) as f64).exp() * c)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Crude interdependence bound `4e tanh(4 beta)`.
pub fn crude_norm_bound(beta: f64) -> f64 {
    4.0 * std::f64::consts::E * (4.0 * beta).tanh()
}

/// Root `p^*` of `4e tanh(4 beta(p)) = 1/2`; the crude certificate applies
/// for every `p > p^*`.
pub fn high_noise_threshold() -> f64 {
    let g = |p: f64| match beta_from_p(p).expect("p in range") {
        Coupling::Finite(b) => crude_norm_bound(b) - 0.5,
        Coupling::Infinite => f64::INFINITY,
    };
    let (mut lo, mut hi) = (1e-3, 0.5);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub value: f64,
    /// Set when the value exceeds the trivial bound 2.
    pub vacuous: bool,
}

/// `(8m+4) e^{-k}` for `||f||_inf = 1`.
pub fn analytic_decay_bound(k: usize, m: usize) -> Result<DecayBound> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let value = (8 * m + 4) as f64 * (-(k as f64)).exp();
    Ok(DecayBound {
        value,
        vacuous: value > 2.0,
    })
}

/// Everything the harness reports for one `(p, k, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DobrushinCertificate {
    pub p: f64,
    pub k: usize,
    pub m: usize,
    pub sup_row_sum: f64,
    pub holds: bool,
    pub bound: Option<ComparisonBound>,
    pub tol: f64,
    pub weighted_norm: f64,
    pub analytic: DecayBound,
}

/// Disorder-uniform certificate for a test function of the final row.
pub fn certify(p: f64, k: usize, m: usize, tol: f64) -> Result<DobrushinCertificate> {
    let window = LatticeWindow::new(k, m)?;
    let beta = beta_from_p(p)?;
    let data = build_dobrushin_data(&window, beta)?;
    let (sup_row_sum, holds) = dobrushin_condition(&data);
    let bound = if holds { Some(comparison_bound(&data, tol)?) } else { None };
    Ok(DobrushinCertificate {
        p,
        k,
        m,
        sup_row_sum,
        holds,
        bound,
        tol,
        weighted_norm: weighted_norm(&data),
        analytic: analytic_decay_bound(k, m)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta(p: f64) -> f64 {
        beta_from_p(p).unwrap().finite("t").unwrap()
    }

    #[test]
    fn zero_coupling() {
        let w = LatticeWindow::new(3, 2).unwrap();
        let d = build_dobrushin_data(&w, Coupling::Finite(0.0)).unwrap();
        assert!(d.rows.iter().all(|r| r.is_empty()));
        assert_eq!(dobrushin_condition(&d), (0.0, true));
        assert_eq!(weighted_norm(&d), 0.0);
        assert_eq!(comparison_bound(&d, 1e-12).unwrap().value, 0.0);
        let with_time0 = d.clone().with_target(&[Site::new(0, 0), Site::new(3, 1)]).unwrap();
        assert_eq!(comparison_bound(&with_time0, 1e-12).unwrap().value, 1.0);
        assert!(build_dobrushin_data(&w, Coupling::Infinite).is_err());
    }

    #[test]
    fn closed_form_entries() {
        // p = 0.4: tanh(2b)/2 = 5/26 in the bulk, tanh(b) = 1/5 on the final row
        let w = LatticeWindow::new(3, 2).unwrap();
        let d = build_dobrushin_data(&w, beta_from_p(0.4).unwrap()).unwrap();
        let j = d.index_of(Site::new(1, 0)).unwrap();
        for (_, c) in d.row(j) {
            assert!((c - 5.0 / 26.0).abs() < 1e-14);
        }
        assert_eq!(d.row(j).len(), 4);
        let j = d.index_of(Site::new(3, 0)).unwrap();
        assert_eq!(d.row(j).len(), 3);
        for (_, c) in d.row(j) {
            assert!((c - 0.2).abs() < 1e-14);
        }
        let j = d.index_of(Site::new(0, 1)).unwrap();
        assert!(d.row(j).is_empty());
        let (rho, holds) = dobrushin_condition(&d);
        assert!((rho - 20.0 / 26.0).abs() < 1e-14 && holds);
    }

    #[test]
    fn crude_bounds_dominate() {
        for p in [0.3, 0.4, 0.45, 0.48, 0.49] {
            let b = beta(p);
            let w = LatticeWindow::new(4, 2).unwrap();
            let d = build_dobrushin_data(&w, Coupling::Finite(b)).unwrap();
            for j in 0..d.len() {
                for &(_, c) in d.row(j) {
                    assert!(c <= (4.0 * b).tanh());
                }
            }
            assert!(weighted_norm(&d) <= crude_norm_bound(b));
        }
    }

    #[test]
    fn condition_at_p045() {
        let w = LatticeWindow::new(5, 5).unwrap();
        let d = build_dobrushin_data(&w, beta_from_p(0.45).unwrap()).unwrap();
        let (rho, holds) = dobrushin_condition(&d);
        assert!(holds, "{rho}");
        assert!(4.0 * (4.0 * beta(0.45)).tanh() > 1.0);
        let d = build_dobrushin_data(&w, beta_from_p(1e-4).unwrap()).unwrap();
        assert!(!dobrushin_condition(&d).1);
        assert!(matches!(comparison_bound(&d, 1e-9), Err(Error::DobrushinConditionFails(_))));
    }

    #[test]
    fn weighted_norm_at_p048() {
        let w = LatticeWindow::new(4, 3).unwrap();
        let d = build_dobrushin_data(&w, beta_from_p(0.48).unwrap()).unwrap();
        let n = weighted_norm(&d);
        assert!(n < 0.5, "{n}");
        assert!(crude_norm_bound(beta(0.48)) > 1.0);
    }

    #[test]
    fn tolerance_contract() {
        let w = LatticeWindow::new(6, 3).unwrap();
        let d = build_dobrushin_data(&w, beta_from_p(0.42).unwrap()).unwrap();
        let fine = comparison_bound(&d, 1e-12).unwrap();
        let coarse = comparison_bound(&d, 1e-6).unwrap();
        assert!((fine.value - coarse.value).abs() < 1e-6);
        assert!(fine.value <= coarse.value + 1e-15);
    }

    #[test]
    fn threshold_values() {
        let p = high_noise_threshold();
        let beta_star = (1.0 / (8.0 * std::f64::consts::E)).atanh() / 4.0;
        assert!((beta_star - 0.011504).abs() < 1e-6);
        assert!((p - crate::model::p_from_beta(beta_star)).abs() < 1e-12);
        assert!((crude_norm_bound(beta(p)) - 0.5).abs() < 1e-10);
        assert!(crude_norm_bound(beta(p + 1e-6)) < 0.5);
        assert!(crude_norm_bound(beta(p - 1e-6)) > 0.5);
        assert!((p - 0.4942).abs() < 1e-4);
    }

    #[test]
    fn decay_bound_values() {
        let b = analytic_decay_bound(10, 1).unwrap();
        assert!((b.value - 12.0 * (-10f64).exp()).abs() < 1e-18 && !b.vacuous);
        assert!((b.value - 5.448e-4).abs() < 1e-6);
        let b = analytic_decay_bound(1, 1).unwrap();
        assert!((b.value - 12.0 / std::f64::consts::E).abs() < 1e-12 && b.vacuous);
        let r = analytic_decay_bound(5, 3).unwrap().value / analytic_decay_bound(4, 3).unwrap().value;
        assert!((r - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn row_sums_monotone_in_p() {
        let w = LatticeWindow::new(3, 2).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let p = 0.3 + 0.2 * i as f64 / 49.0;
            let d = build_dobrushin_data(&w, beta_from_p(p).unwrap()).unwrap();
            let rho = dobrushin_condition(&d).0;
            assert!(rho <= last + 1e-15);
            last = rho;
        }
    }
}
