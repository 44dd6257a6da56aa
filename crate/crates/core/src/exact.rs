//! Exact posterior of the window spins given the boundary signal and the
//! edge observations, and the filter-stability order parameter built on it.
//!
//! For boundary signal `x` and edge noise `xi` the posterior on `J` is the
//! random-bond Ising law
//!
//! ```text
//! Sigma^x(z) ∝ exp(beta * [ sum_{q,r in J} xi x^q x^r z^q z^r
//!                         + sum_{q in J, r in bd J} xi x^q z^q ])
//! ```
//!
//! In observation form the couplings are `beta * y_qr` and each interior
//! site next to the boundary carries the field `beta * sum_r y_qr x^r`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ising::{DenseLaw, GridIsing, IsingGraph};
use crate::mcmc::{run_chain, ChainSchedule};
use crate::model::{
    observe, sample_space_time_model, Coupling, Coverage, DisorderField, LatticeWindow, ModelParams,
    Observations, Site, SpinBits, SpinField,
};
use crate::rng::SeedSpec;
use crate::stats::Estimate;

/// Size limits for the exact solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceBudget {
    pub max_enum_sites: usize,
    /// Largest admissible column height `2m+1`.
    pub max_column_height: usize,
}

impl Default for InferenceBudget {
    fn default() -> Self {
        InferenceBudget {
            max_enum_sites: 24,
            max_column_height: 15,
        }
    }
}

impl InferenceBudget {
    pub fn check_enumeration(&self, window: &LatticeWindow) -> Result<()> {
        if window.interior_len() > self.max_enum_sites {
            return Err(Error::BudgetExceeded {
                what: "enumerated sites",
                needed: window.interior_len(),
                limit: self.max_enum_sites,
            });
        }
        Ok(())
    }

    pub fn check_transfer(&self, window: &LatticeWindow) -> Result<()> {
        if window.width() > self.max_column_height {
            return Err(Error::BudgetExceeded {
                what: "transfer-matrix column height",
                needed: window.width(),
                limit: self.max_column_height,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LawTable {
    /// Probabilities indexed by the packed interior state.
    Dense(Vec<f64>),
    /// All mass on one interior configuration (noiseless observations).
    PointMass(SpinBits),
    /// Single-site magnetizations only.
    Magnetizations(Vec<f64>),
}

/// Exactly represented posterior over the interior of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLaw {
    pub window: LatticeWindow,
    pub table: LawTable,
    /// `None` for a point mass, where the coupling is infinite.
    pub log_z: Option<f64>,
}

impl ConditionalLaw {
    fn from_dense(window: LatticeWindow, law: DenseLaw) -> Self {
        let log_z = law.log_z();
        ConditionalLaw {
            window,
            table: LawTable::Dense(law.probs().to_vec()),
            log_z: Some(log_z),
        }
    }

    /// `E[z^site]`.
    pub fn magnetization(&self, site: Site) -> Result<f64> {
        let i = self
            .window
            .interior_index(site)
            .ok_or_else(|| Error::InvalidArgument(format!("{site:?} is not an interior site")))?;
        Ok(match &self.table {
            LawTable::Dense(p) => {
                let plus: f64 = p
                    .iter()
                    .enumerate()
                    .filter(|(s, _)| (s >> i) & 1 == 0)
                    .map(|(_, q)| q)
                    .sum();
                2.0 * plus - 1.0
            }
            LawTable::PointMass(z) => z.get(i) as f64,
            LawTable::Magnetizations(m) => m[i],
        })
    }

    /// Probability of an interior configuration, when the table holds it.
    pub fn probability(&self, z: &SpinField) -> Option<f64> {
        if z.window() != self.window || z.coverage() != Coverage::Interior {
            return None;
        }
        match &self.table {
            LawTable::Dense(p) => Some(p[pack(z.bits())]),
            LawTable::PointMass(s) => Some(if s == z.bits() { 1.0 } else { 0.0 }),
            LawTable::Magnetizations(_) => None,
        }
    }

    pub fn dense(&self) -> Option<&[f64]> {
        match &self.table {
            LawTable::Dense(p) => Some(p),
            _ => None,
        }
    }
}

fn pack(bits: &SpinBits) -> usize {
    let mut s = 0usize;
    for i in 0..bits.len() {
        if bits.is_minus(i) {
            s |= 1 << i;
        }
    }
    s
}

fn check_fields(window: &LatticeWindow, disorder: &DisorderField, x: &SpinField) -> Result<()> {
    if x.window() != *window || x.coverage() != Coverage::Full {
        return Err(Error::ShapeMismatch("x must cover the window and its boundary".into()));
    }
    if disorder.len() != window.edge_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} disorder signs for {} edges",
            disorder.len(),
            window.edge_count()
        )));
    }
    Ok(())
}

/// Unnormalized log-weight of `z` under `Sigma^x`, evaluated term by term.
pub fn sigma_log_weight(
    window: &LatticeWindow,
    beta: Coupling,
    disorder: &DisorderField,
    x: &SpinField,
    z: &SpinField,
) -> Result<f64> {
    let beta = beta.finite("sigma_log_weight")?;
    check_fields(window, disorder, x)?;
    if z.window() != *window || z.coverage() != Coverage::Interior {
        return Err(Error::ShapeMismatch("z must cover the interior".into()));
    }
    let mut sum = 0.0;
    for (e, edge) in window.edges().iter().enumerate() {
        let xi = disorder.get(e) as f64;
        match (window.is_interior(edge.a), window.is_interior(edge.b)) {
            (true, true) => {
                sum += xi * (x.at(edge.a) * x.at(edge.b) * z.at(edge.a) * z.at(edge.b)) as f64;
            }
            (true, false) => sum += xi * (x.at(edge.a) * z.at(edge.a)) as f64,
            (false, true) => sum += xi * (x.at(edge.b) * z.at(edge.b)) as f64,
            (false, false) => unreachable!("window edges always touch the interior"),
        }
    }
    Ok(beta * sum)
}

/// The posterior as a grid Ising model: rows are times `1..=k`, columns are
/// positions `-m..=m`, so the grid index equals the interior index.
pub fn posterior_grid(window: &LatticeWindow, beta: f64, observations: &Observations, x: &SpinField) -> GridIsing {
    let m = window.m() as i64;
    let mut g = GridIsing::new(window.k(), window.width());
    for (e, edge) in window.edges().iter().enumerate() {
        let j = beta * observations.get(e) as f64;
        let (a_in, b_in) = (window.is_interior(edge.a), window.is_interior(edge.b));
        let rc = |s: Site| ((s.t - 1) as usize, (s.v + m) as usize);
        match (a_in, b_in) {
            (true, true) => {
                let (r, c) = rc(edge.a);
                if edge.b.t == edge.a.t {
                    g.set_horizontal(r, c, j);
                } else {
                    g.set_vertical(r, c, j);
                }
            }
            (true, false) => {
                let (r, c) = rc(edge.a);
                g.add_field(r, c, j * x.at(edge.b) as f64);
            }
            (false, true) => {
                let (r, c) = rc(edge.b);
                g.add_field(r, c, j * x.at(edge.a) as f64);
            }
            (false, false) => unreachable!(),
        }
    }
    g
}

/// The posterior in sparse form, built directly from the noise signs.
pub fn posterior_graph(window: &LatticeWindow, beta: f64, disorder: &DisorderField, x: &SpinField) -> IsingGraph {
    let mut g = IsingGraph::new(window.interior_len());
    for (e, edge) in window.edges().iter().enumerate() {
        let xi = disorder.get(e) as f64;
        match (window.interior_index(edge.a), window.interior_index(edge.b)) {
            (Some(a), Some(b)) => g.add_coupling(a, b, beta * xi * (x.at(edge.a) * x.at(edge.b)) as f64),
            (Some(a), None) => g.add_field(a, beta * xi * x.at(edge.a) as f64),
            (None, Some(b)) => g.add_field(b, beta * xi * x.at(edge.b) as f64),
            (None, None) => unreachable!(),
        }
    }
    g
}

/// Dense posterior table by exhaustive enumeration of the interior.
pub fn enumerate_conditional(
    window: &LatticeWindow,
    beta: Coupling,
    disorder: &DisorderField,
    x: &SpinField,
    budget: &InferenceBudget,
) -> Result<ConditionalLaw> {
    let b = beta.finite("enumerate_conditional")?;
    check_fields(window, disorder, x)?;
    budget.check_enumeration(window)?;
    let law = posterior_graph(window, b, disorder, x).enumerate(budget.max_enum_sites)?;
    Ok(ConditionalLaw::from_dense(*window, law))
}

/// Posterior magnetizations and `log Z` by transfer-matrix contraction.
pub fn transfer_matrix_law(
    window: &LatticeWindow,
    beta: Coupling,
    disorder: &DisorderField,
    x: &SpinField,
    budget: &InferenceBudget,
) -> Result<ConditionalLaw> {
    let b = beta.finite("transfer_matrix_magnetization")?;
    check_fields(window, disorder, x)?;
    budget.check_transfer(window)?;
    let obs = observe(window, x, disorder)?;
    if b == 0.0 {
        return Ok(ConditionalLaw {
            window: *window,
            table: LawTable::Magnetizations(vec![0.0; window.interior_len()]),
            log_z: Some(window.interior_len() as f64 * std::f64::consts::LN_2),
        });
    }
    let tm = posterior_grid(window, b, &obs, x).transfer(budget.max_column_height)?;
    Ok(ConditionalLaw {
        window: *window,
        table: LawTable::Magnetizations(tm.magnetizations),
        log_z: Some(tm.log_z),
    })
}

pub fn transfer_matrix_magnetization(
    window: &LatticeWindow,
    beta: Coupling,
    disorder: &DisorderField,
    x: &SpinField,
    site: Site,
    budget: &InferenceBudget,
) -> Result<f64> {
    if !window.is_interior(site) {
        return Err(Error::InvalidArgument(format!("{site:?} is not an interior site")));
    }
    transfer_matrix_law(window, beta, disorder, x, budget)?.magnetization(site)
}

/// Noiseless posterior: propagate `z^q = y_qr z^r` outwards from the
/// boundary (where `z = x`) and check every edge afterwards.
pub fn p0_exact_conditional(window: &LatticeWindow, observations: &Observations, x: &SpinField) -> Result<ConditionalLaw> {
    if x.window() != *window || x.coverage() != Coverage::Full {
        return Err(Error::ShapeMismatch("x must cover the window and its boundary".into()));
    }
    if observations.signs.len() != window.edge_count() {
        return Err(Error::ShapeMismatch("observations do not match window edges".into()));
    }
    let mut known: Vec<Option<i8>> = (0..window.full_len())
        .map(|i| (i >= window.interior_len()).then(|| x.bits().get(i)))
        .collect();
    let edges = window.edges();
    let mut stack: Vec<usize> = (window.interior_len()..window.full_len()).collect();
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); window.full_len()];
    for (e, edge) in edges.iter().enumerate() {
        let a = window.full_index(edge.a).expect("edge endpoint in window");
        let b = window.full_index(edge.b).expect("edge endpoint in window");
        incident[a].push((e, b));
        incident[b].push((e, a));
    }
    while let Some(q) = stack.pop() {
        let zq = known[q].expect("stacked sites are known");
        for &(e, r) in &incident[q] {
            if known[r].is_none() {
                known[r] = Some(zq * observations.get(e));
                stack.push(r);
            }
        }
    }
    for (e, edge) in edges.iter().enumerate() {
        let a = known[window.full_index(edge.a).unwrap()].expect("window is connected");
        let b = known[window.full_index(edge.b).unwrap()].expect("window is connected");
        if a * b != observations.get(e) {
            return Err(Error::InconsistentObservations { edge: e });
        }
    }
    let mut z = SpinBits::all_plus(window.interior_len());
    for (i, v) in known.iter().take(window.interior_len()).enumerate() {
        z.set(i, v.expect("window is connected"));
    }
    Ok(ConditionalLaw {
        window: *window,
        table: LawTable::PointMass(z),
        log_z: None,
    })
}

/// Sweep-coordinate bit that separates chain randomness from the model draw.
const CHAIN_STREAM: u32 = 0x8000_0000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InferenceMethod {
    Enumeration,
    TransferMatrix,
    /// Heat-bath estimate of the inner expectation; approximate.
    Mcmc(ChainSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityEstimate {
    pub estimate: Estimate,
    /// Set when the inner expectation came from a Markov chain.
    pub approximate: bool,
}

fn check_method(method: &InferenceMethod, window: &LatticeWindow, budget: &InferenceBudget) -> Result<()> {
    match method {
        InferenceMethod::Enumeration => budget.check_enumeration(window),
        InferenceMethod::TransferMatrix => budget.check_transfer(window),
        InferenceMethod::Mcmc(s) => s.validate(),
    }
}

/// `E_Sigma[z^origin]` for one replicate of the model.
pub fn origin_magnetization(
    params: &ModelParams,
    window: &LatticeWindow,
    seed: SeedSpec,
    method: &InferenceMethod,
    budget: &InferenceBudget,
) -> Result<f64> {
    let sample = sample_space_time_model(params, window, seed);
    let origin = window.origin();
    match params.beta {
        Coupling::Infinite => p0_exact_conditional(window, &sample.observations, &sample.signal)?.magnetization(origin),
        Coupling::Finite(b) if b == 0.0 => Ok(0.0),
        beta => match method {
            InferenceMethod::Enumeration => {
                enumerate_conditional(window, beta, &sample.disorder, &sample.signal, budget)?.magnetization(origin)
            }
            InferenceMethod::TransferMatrix => {
                transfer_matrix_magnetization(window, beta, &sample.disorder, &sample.signal, origin, budget)
            }
            InferenceMethod::Mcmc(schedule) => {
                let g = posterior_graph(window, beta.finite("mcmc")?, &sample.disorder, &sample.signal);
                let o = window.interior_index(origin).expect("origin is interior");
                let init = SpinBits::all_plus(window.interior_len());
                let run = run_chain(&g, init, schedule, seed.with_sweep(seed.sweep ^ CHAIN_STREAM), &[o])?;
                Ok(run.mean(0).mean)
            }
        },
    }
}

/// Signed origin magnetizations for replicates `0..replicates`, in
/// replicate order.
pub fn origin_magnetizations(
    params: &ModelParams,
    k: usize,
    m: usize,
    replicates: usize,
    seed: SeedSpec,
    method: &InferenceMethod,
    budget: &InferenceBudget,
) -> Result<Vec<f64>> {
    let window = LatticeWindow::new(k, m)?;
    check_method(method, &window, budget)?;
    (0..replicates as u32)
        .into_par_iter()
        .map(|r| origin_magnetization(params, &window, seed.with_replicate(r), method, budget))
        .collect()
}

/// Monte Carlo estimate of `E|E_Sigma[z^(k,0)]|` over sampled signal and
/// noise, with the plain standard error over replicates.
pub fn stability_metric(
    params: &ModelParams,
    k: usize,
    m: usize,
    replicates: usize,
    seed: SeedSpec,
    method: &InferenceMethod,
    budget: &InferenceBudget,
) -> Result<StabilityEstimate> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let window = LatticeWindow::new(k, m)?;
    check_method(method, &window, budget)?;
    let approximate = matches!(method, InferenceMethod::Mcmc(_)) && matches!(params.beta, Coupling::Finite(b) if b > 0.0);
    if params.beta == Coupling::Finite(0.0) {
        return Ok(StabilityEstimate {
            estimate: Estimate {
                mean: 0.0,
                std_error: 0.0,
            },
            approximate: false,
        });
    }
    let abs: Vec<f64> = origin_magnetizations(params, k, m, replicates, seed, method, budget)?
        .into_iter()
        .map(f64::abs)
        .collect();
    Ok(StabilityEstimate {
        estimate: Estimate::from_samples(&abs),
        approximate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryMode {
    /// Every observation outcome on the window edges.
    Exhaustive,
    /// Observation outcomes drawn from the model.
    Sampled { replicates: usize, seed: SeedSpec },
}

/// Largest `|E[X^(k,0) | Y]|` over observation outcomes, where only the
/// window observations are conditioned on and the signal on the whole
/// window and its boundary is integrated out.
pub fn unconditional_filter_symmetry_check(params: &ModelParams, window: &LatticeWindow, mode: SymmetryMode) -> Result<f64> {
    let n = window.full_len();
    let e = window.edge_count();
    if n > 20 {
        return Err(Error::BudgetExceeded {
            what: "jointly enumerated signal sites",
            needed: n,
            limit: 20,
        });
    }
    if params.p == 0.5 {
        return Ok(0.0);
    }
    let edges = window.edges();
    let ends: Vec<(usize, usize)> = edges
        .iter()
        .map(|ed| (window.full_index(ed.a).unwrap(), window.full_index(ed.b).unwrap()))
        .collect();
    let origin = window.full_index(window.origin()).unwrap();
    // None for outcomes of probability zero (possible only at p = 0)
    let posterior_mean = |y: u64| -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for x in 0u64..1 << n {
            let mut flips = 0;
            for (i, &(a, b)) in ends.iter().enumerate() {
                let prod_minus = ((x >> a) ^ (x >> b)) & 1;
                if prod_minus != (y >> i) & 1 {
                    flips += 1;
                }
            }
            let w = params.p.powi(flips) * (1.0 - params.p).powi(e as i32 - flips);
            den += w;
            num += if (x >> origin) & 1 == 0 { w } else { -w };
        }
        (den > 0.0).then(|| num / den)
    };
    let outcomes: Vec<u64> = match mode {
        SymmetryMode::Exhaustive => {
            if e > 20 {
                return Err(Error::BudgetExceeded {
                    what: "exhaustive observation outcomes (edges)",
                    needed: e,
                    limit: 20,
                });
            }
            (0u64..1 << e).collect()
        }
        SymmetryMode::Sampled { replicates, seed } => (0..replicates as u32)
            .map(|r| {
                sample_space_time_model(params, window, seed.with_replicate(r))
                    .observations
                    .signs
                    .to_word()
            })
            .collect(),
    };
    let worst = outcomes
        .par_iter()
        .map(|&y| posterior_mean(y).map_or(0.0, f64::abs))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{beta_from_p, DisorderKind};

    fn fields(window: &LatticeWindow, p: f64, rep: u32) -> (ModelParams, DisorderField, SpinField, Observations) {
        let params = ModelParams::new(p).unwrap();
        let s = sample_space_time_model(&params, window, SeedSpec::new(2024).with_replicate(rep));
        (params, s.disorder, s.signal, s.observations)
    }

    #[test]
    fn singleton_window_weight_and_law() {
        let w = LatticeWindow::new(1, 0).unwrap();
        let beta = beta_from_p(0.25).unwrap();
        let b = beta.finite("test").unwrap();
        let xi = DisorderField::all_plus(DisorderKind::SpaceTime, w.edge_count());
        let x = SpinField::all_plus(w, Coverage::Full);
        let z = SpinField::all_plus(w, Coverage::Interior);
        assert!((sigma_log_weight(&w, beta, &xi, &x, &z).unwrap() - 3.0 * b).abs() < 1e-15);
        let law = enumerate_conditional(&w, beta, &xi, &x, &InferenceBudget::default()).unwrap();
        let want = (3.0 * b).exp() / ((3.0 * b).exp() + (-3.0 * b).exp());
        assert!((law.dense().unwrap()[0] - want).abs() < 1e-15);
        let m = transfer_matrix_magnetization(&w, beta, &xi, &x, w.origin(), &InferenceBudget::default()).unwrap();
        assert!((m - (3.0 * b).tanh()).abs() < 1e-14);
        assert!((m - 13.0 / 14.0).abs() < 1e-14);
    }

    #[test]
    fn beta_zero_is_uniform() {
        let w = LatticeWindow::new(2, 1).unwrap();
        let (_, xi, x, _) = fields(&w, 0.3, 0);
        let law = enumerate_conditional(&w, Coupling::Finite(0.0), &xi, &x, &InferenceBudget::default()).unwrap();
        let p = law.dense().unwrap();
        assert!(p.iter().all(|&q| (q - 1.0 / 64.0).abs() < 1e-15));
        for s in w.interior_sites() {
            let m = transfer_matrix_magnetization(&w, Coupling::Finite(0.0), &xi, &x, s, &InferenceBudget::default()).unwrap();
            assert_eq!(m, 0.0);
        }
    }

    #[test]
    fn weight_formula_matches_observation_form() {
        let w = LatticeWindow::new(2, 1).unwrap();
        let (params, xi, x, obs) = fields(&w, 0.3, 5);
        let b = params.beta.finite("test").unwrap();
        let g = posterior_grid(&w, b, &obs, &x).to_graph();
        let h = posterior_graph(&w, b, &xi, &x);
        let mut diffs = Vec::new();
        for word in 0u64..64 {
            let bits = SpinBits::from_word(6, word);
            let z = SpinField::from_bits(w, Coverage::Interior, bits.clone()).unwrap();
            let direct = sigma_log_weight(&w, params.beta, &xi, &x, &z).unwrap();
            diffs.push((direct - g.log_weight(&bits)).abs());
            diffs.push((direct - h.log_weight(&bits)).abs());
        }
        assert!(diffs.iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn gauge_property_of_weights() {
        let w = LatticeWindow::new(2, 1).unwrap();
        let plus = SpinField::all_plus(w, Coverage::Full);
        for rep in 0..10 {
            let (params, xi, x, _) = fields(&w, 0.2, rep);
            for word in 0u64..64 {
                let z = SpinField::from_bits(w, Coverage::Interior, SpinBits::from_word(6, word)).unwrap();
                let sigma = crate::model::gauge_transform(&x.interior(), &z).unwrap();
                let a = sigma_log_weight(&w, params.beta, &xi, &x, &z).unwrap();
                let b = sigma_log_weight(&w, params.beta, &xi, &plus, &sigma).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn p0_recovers_signal_and_detects_corruption() {
        let w = LatticeWindow::new(4, 2).unwrap();
        let (_, _, x, obs) = fields(&w, 0.0, 1);
        let law = p0_exact_conditional(&w, &obs, &x).unwrap();
        assert_eq!(law.table, LawTable::PointMass(x.interior().into_bits()));
        assert_eq!(law.magnetization(w.origin()).unwrap().abs(), 1.0);
        let mut bad = obs.clone();
        bad.signs.flip(7);
        assert!(matches!(
            p0_exact_conditional(&w, &bad, &x),
            Err(Error::InconsistentObservations { .. })
        ));
    }

    #[test]
    fn infinite_coupling_rejected_by_finite_solvers() {
        let w = LatticeWindow::new(1, 0).unwrap();
        let (_, xi, x, _) = fields(&w, 0.0, 0);
        assert!(matches!(
            enumerate_conditional(&w, Coupling::Infinite, &xi, &x, &InferenceBudget::default()),
            Err(Error::InfiniteCoupling(_))
        ));
        assert!(transfer_matrix_magnetization(&w, Coupling::Infinite, &xi, &x, w.origin(), &InferenceBudget::default()).is_err());
    }

    #[test]
    fn budgets_enforced() {
        let w = LatticeWindow::new(5, 2).unwrap();
        let (params, xi, x, _) = fields(&w, 0.2, 0);
        let tight = InferenceBudget {
            max_enum_sites: 16,
            max_column_height: 3,
        };
        assert!(matches!(
            enumerate_conditional(&w, params.beta, &xi, &x, &tight),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(matches!(
            transfer_matrix_law(&w, params.beta, &xi, &x, &tight),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn transfer_agrees_with_enumeration_k3_m1() {
        let w = LatticeWindow::new(3, 1).unwrap();
        let budget = InferenceBudget::default();
        for rep in 0..5 {
            let (params, xi, x, _) = fields(&w, 0.2, rep);
            let e = enumerate_conditional(&w, params.beta, &xi, &x, &budget).unwrap();
            let t = transfer_matrix_law(&w, params.beta, &xi, &x, &budget).unwrap();
            assert!((e.log_z.unwrap() - t.log_z.unwrap()).abs() < 1e-10);
            for s in w.interior_sites() {
                assert!((e.magnetization(s).unwrap() - t.magnetization(s).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stability_extremes() {
        let budget = InferenceBudget::default();
        let zero = ModelParams::new(0.0).unwrap();
        let r = stability_metric(&zero, 3, 2, 50, SeedSpec::new(1), &InferenceMethod::TransferMatrix, &budget).unwrap();
        assert_eq!((r.estimate.mean, r.estimate.std_error), (1.0, 0.0));
        let half = ModelParams::new(0.5).unwrap();
        let r = stability_metric(&half, 3, 2, 50, SeedSpec::new(1), &InferenceMethod::TransferMatrix, &budget).unwrap();
        assert_eq!((r.estimate.mean, r.estimate.std_error), (0.0, 0.0));
    }

    #[test]
    fn symmetry_check_small() {
        let w = LatticeWindow::new(1, 0).unwrap();
        for p in [0.0, 0.1, 0.3, 0.5] {
            let v = unconditional_filter_symmetry_check(&ModelParams::new(p).unwrap(), &w, SymmetryMode::Exhaustive).unwrap();
            assert!(v < 1e-12, "p={p}: {v}");
        }
    }
}
