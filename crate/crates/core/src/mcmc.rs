//! Single-site heat-bath dynamics and the monotone plus/minus sandwich.
//!
//! Sites are visited in a fixed raster order (index order). Each visit
//! consumes exactly one uniform `u` and sets the spin to `+1` iff
//! `u < P(+1 | rest)`. The sandwich feeds the same `u` to both chains, which
//! keeps `upper >= lower` sitewise whenever the local conditionals are
//! increasing.
//!
//! Forward coalescence of the sandwich is reported as a uniqueness
//! indicator only: the coalesced state is *not* an exact sample from the
//! stationary law (that would need coupling from the past).

use crate::error::{Error, Result};
use crate::ising::IsingGraph;
use crate::model::{Coupling, LatticeWindow, Observations, SpinBits, SpinField};
use crate::rng::{PhiloxStream, SeedSpec};
use crate::stats::{plus_probability, Estimate};

/// Single-site conditionals of a finite spin system.
pub trait LocalSpecification: Sync {
    fn sites(&self) -> usize;

    /// `P(s_site = +1 | all other spins as in state)`.
    fn prob_plus(&self, state: &SpinBits, site: usize) -> f64;

    /// Whether the dynamics is well defined (no hard constraints etc.).
    fn check_sampleable(&self) -> Result<()> {
        Ok(())
    }
}

impl LocalSpecification for IsingGraph {
    fn sites(&self) -> usize {
        self.len()
    }

    #[inline]
    fn prob_plus(&self, state: &SpinBits, site: usize) -> f64 {
        plus_probability(self.local_field(state, site))
    }

    fn check_sampleable(&self) -> Result<()> {
        if self.hard_constraints().is_empty() {
            Ok(())
        } else {
            Err(Error::InfiniteCoupling("heat-bath sampling"))
        }
    }
}

/// Heat-bath probability of `+1` at an interior site of the posterior
/// `Sigma^x`, with neighbours read from `z` (interior) and `x` (boundary).
pub fn heat_bath_probability(
    window: &LatticeWindow,
    beta: Coupling,
    observations: &Observations,
    x: &SpinField,
    z: &SpinField,
    site: crate::model::Site,
) -> Result<f64> {
    let beta = beta.finite("heat_bath_probability")?;
    if !window.is_interior(site) {
        return Err(Error::InvalidArgument(format!("{site:?} is not an interior site")));
    }
    let mut h = 0.0;
    for (e, nb) in window.incident(site) {
        let s = if window.is_interior(nb) { z.at(nb) } else { x.at(nb) };
        h += (observations.get(e) * s) as f64;
    }
    Ok(plus_probability(beta * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSchedule {
    pub burn_in: usize,
    pub measure: usize,
    /// Record every `thin`-th measured sweep.
    pub thin: usize,
}

impl Default for ChainSchedule {
    fn default() -> Self {
        ChainSchedule {
            burn_in: 1_000,
            measure: 10_000,
            thin: 1,
        }
    }
}

impl ChainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thinning interval must be >= 1".into()));
        }
        if self.measure == 0 {
            return Err(Error::InvalidArgument("need at least one measured sweep".into()));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.measure
    }
}

/// One running chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    state: SpinBits,
    sweep: usize,
    rng: PhiloxStream,
}

impl ChainState {
    pub fn new(initial: SpinBits, seed: SeedSpec) -> Self {
        ChainState {
            state: initial,
            sweep: 0,
            rng: seed.stream(),
        }
    }

    pub fn state(&self) -> &SpinBits {
        &self.state
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweep
    }

    /// One raster sweep of heat-bath updates.
    pub fn sweep<S: LocalSpecification + ?Sized>(&mut self, spec: &S) {
        for site in 0..self.state.len() {
            let u = self.rng.next_f64();
            let s = if u < spec.prob_plus(&self.state, site) { 1 } else { -1 };
            self.state.set(site, s);
        }
        self.sweep += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    /// Per tracked site, the spin at each recorded sweep.
    pub traces: Vec<Vec<f64>>,
    pub final_state: SpinBits,
    pub sweeps: usize,
}

impl ChainRun {
    /// Mean of a trace with a batch-means standard error (20 batches).
    pub fn mean(&self, which: usize) -> Estimate {
        Estimate::batch_means(&self.traces[which], 20)
    }
}

pub fn run_chain<S: LocalSpecification + ?Sized>(
    spec: &S,
    initial: SpinBits,
    schedule: &ChainSchedule,
    seed: SeedSpec,
    tracked: &[usize],
) -> Result<ChainRun> {
    schedule.validate()?;
    spec.check_sampleable()?;
    if initial.len() != spec.sites() {
        return Err(Error::ShapeMismatch("initial state does not match the specification".into()));
    }
    if let Some(&bad) = tracked.iter().find(|&&t| t >= spec.sites()) {
        return Err(Error::InvalidArgument(format!("tracked site {bad} out of range")));
    }
    let mut chain = ChainState::new(initial, seed);
    for _ in 0..schedule.burn_in {
        chain.sweep(spec);
    }
    let mut traces = vec![Vec::with_capacity(schedule.measure / schedule.thin + 1); tracked.len()];
    for i in 0..schedule.measure {
        chain.sweep(spec);
        if i % schedule.thin == 0 {
            for (trace, &t) in traces.iter_mut().zip(tracked) {
                trace.push(chain.state.get(t) as f64);
            }
        }
    }
    Ok(ChainRun {
        traces,
        sweeps: chain.sweep,
        final_state: chain.state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichRun {
    /// Fraction of measured sweeps on which the chains differ at each site.
    pub gap_frequency: Vec<f64>,
    /// `E_+[s_v] - E_-[s_v]` estimate per site, `2 * gap_frequency`.
    pub magnetization_gap: Vec<f64>,
    /// Fraction of differing sites after every sweep, burn-in included.
    pub gap_by_sweep: Vec<f64>,
    /// First sweep after which the chains agreed everywhere.
    pub coalesced_at: Option<usize>,
    pub upper: SpinBits,
    pub lower: SpinBits,
}

/// Run the plus chain under `upper_spec` from all-plus and the minus chain
/// under `lower_spec` from all-minus with shared uniforms. Both
/// specifications live on the same sites and typically differ only in their
/// boundary condition.
pub fn sandwich_coupling<U: LocalSpecification + ?Sized, L: LocalSpecification + ?Sized>(
    upper_spec: &U,
    lower_spec: &L,
    schedule: &ChainSchedule,
    seed: SeedSpec,
) -> Result<SandwichRun> {
    schedule.validate()?;
    upper_spec.check_sampleable()?;
    lower_spec.check_sampleable()?;
    let n = upper_spec.sites();
    if lower_spec.sites() != n {
        return Err(Error::ShapeMismatch("sandwich specifications differ in size".into()));
    }
    let mut rng = seed.stream();
    let mut upper = SpinBits::all_plus(n);
    let mut lower = SpinBits::all_minus(n);
    let mut differ = vec![0usize; n];
    let mut gap_by_sweep = Vec::with_capacity(schedule.total_sweeps());
    let mut coalesced_at = None;
    for sweep in 0..schedule.total_sweeps() {
        for site in 0..n {
            let u = rng.next_f64();
            let up = if u < upper_spec.prob_plus(&upper, site) { 1 } else { -1 };
            let lo = if u < lower_spec.prob_plus(&lower, site) { 1 } else { -1 };
            if up < lo {
                return Err(Error::DominationViolated { sweep, site });
            }
            upper.set(site, up);
            lower.set(site, lo);
        }
        let gap = upper.hamming(&lower);
        gap_by_sweep.push(gap as f64 / n.max(1) as f64);
        if gap == 0 && coalesced_at.is_none() {
            coalesced_at = Some(sweep + 1);
        }
        if sweep >= schedule.burn_in {
            for (site, d) in differ.iter_mut().enumerate() {
                if upper.is_minus(site) != lower.is_minus(site) {
                    *d += 1;
                }
            }
        }
    }
    let gap_frequency: Vec<f64> = differ.iter().map(|&d| d as f64 / schedule.measure as f64).collect();
    Ok(SandwichRun {
        magnetization_gap: gap_frequency.iter().map(|f| 2.0 * f).collect(),
        gap_frequency,
        gap_by_sweep,
        coalesced_at,
        upper,
        lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{posterior_graph, transfer_matrix_law, InferenceBudget};
    use crate::model::{beta_from_p, sample_space_time_model, Coverage, ModelParams, Site};

    fn square_ising(l: usize, j: f64, boundary: f64) -> IsingGraph {
        let mut g = IsingGraph::new(l * l);
        for r in 0..l {
            for c in 0..l {
                let i = r * l + c;
                if c + 1 < l {
                    g.add_coupling(i, i + 1, j);
                }
                if r + 1 < l {
                    g.add_coupling(i, i + l, j);
                }
                let ring = [r == 0, r + 1 == l, c == 0, c + 1 == l].iter().filter(|b| **b).count();
                g.add_field(i, boundary * j * ring as f64);
            }
        }
        g
    }

    #[test]
    fn heat_bath_closed_forms() {
        let w = LatticeWindow::new(3, 1).unwrap();
        let params = ModelParams::new(0.25).unwrap();
        let s = sample_space_time_model(&params, &w, SeedSpec::new(3));
        // make every incident term +1 at (1,0): set y = x x on its edges and z = x
        let x = s.signal.clone();
        let mut obs = s.observations.clone();
        let site = Site::new(1, 0);
        for (e, nb) in w.incident(site) {
            obs.signs.set(e, x.at(site) * x.at(nb));
        }
        let mut z = x.interior();
        z.set(site, 1).unwrap();
        let xs = if x.at(site) == 1 { 1.0 } else { -1.0 };
        let p = heat_bath_probability(&w, params.beta, &obs, &x, &z, site).unwrap();
        let want = if xs > 0.0 { 81.0 / 82.0 } else { 1.0 / 82.0 };
        assert!((p - want).abs() < 1e-14);

        let b = beta_from_p(0.1).unwrap().finite("t").unwrap();
        let (lo, hi) = ((-4.0 * b).exp() / ((4.0 * b).exp() + (-4.0 * b).exp()), (4.0 * b).exp() / ((4.0 * b).exp() + (-4.0 * b).exp()));
        let params = ModelParams::new(0.1).unwrap();
        for rep in 0..20 {
            let s = sample_space_time_model(&params, &w, SeedSpec::new(5).with_replicate(rep));
            let z = SpinField::all_plus(w, Coverage::Interior);
            for q in w.interior_sites() {
                let p = heat_bath_probability(&w, params.beta, &s.observations, &s.signal, &z, q).unwrap();
                assert!(p >= lo - 1e-15 && p <= hi + 1e-15);
            }
        }
        let half = ModelParams::new(0.5).unwrap();
        let p = heat_bath_probability(&w, half.beta, &obs, &x, &z, site).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn chain_is_reproducible() {
        let g = square_ising(4, 0.3, 0.0);
        let sched = ChainSchedule {
            burn_in: 10,
            measure: 200,
            thin: 1,
        };
        let a = run_chain(&g, SpinBits::all_plus(16), &sched, SeedSpec::new(8), &[0, 5]).unwrap();
        let b = run_chain(&g, SpinBits::all_plus(16), &sched, SeedSpec::new(8), &[0, 5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_matches_enumeration_on_2x2() {
        let w = LatticeWindow::new(2, 0).unwrap();
        let params = ModelParams::new(0.3).unwrap();
        let s = sample_space_time_model(&params, &w, SeedSpec::new(12));
        let g = posterior_graph(&w, params.beta.finite("t").unwrap(), &s.disorder, &s.signal);
        let law = g.enumerate(24).unwrap();
        let sched = ChainSchedule {
            burn_in: 100,
            measure: 200_000,
            thin: 1,
        };
        let mut chain = ChainState::new(SpinBits::all_plus(2), SeedSpec::new(99));
        for _ in 0..sched.burn_in {
            chain.sweep(&g);
        }
        let mut counts = [0usize; 4];
        for _ in 0..sched.measure {
            chain.sweep(&g);
            counts[chain.state().to_word() as usize] += 1;
        }
        for (s, &c) in counts.iter().enumerate() {
            let f = c as f64 / sched.measure as f64;
            let p = law.prob(s as u64);
            // generous SE for mild autocorrelation
            let se = (p * (1.0 - p) / sched.measure as f64).sqrt() * 3.0;
            assert!((f - p).abs() < 4.0 * se + 1e-4, "state {s}: {f} vs {p}");
        }
    }

    #[test]
    fn chain_mean_matches_transfer() {
        let w = LatticeWindow::new(3, 1).unwrap();
        let params = ModelParams::new(0.25).unwrap();
        let s = sample_space_time_model(&params, &w, SeedSpec::new(31));
        let tm = transfer_matrix_law(&w, params.beta, &s.disorder, &s.signal, &InferenceBudget::default()).unwrap();
        let g = posterior_graph(&w, params.beta.finite("t").unwrap(), &s.disorder, &s.signal);
        let o = w.interior_index(w.origin()).unwrap();
        let run = run_chain(&g, SpinBits::all_plus(9), &ChainSchedule::default(), SeedSpec::new(4), &[o]).unwrap();
        let est = run.mean(0);
        assert!(est.within(tm.magnetization(w.origin()).unwrap(), 3.0), "{est:?}");
    }

    #[test]
    fn sandwich_coalesces_immediately_at_beta_zero() {
        let g = square_ising(5, 0.0, 0.0);
        let sched = ChainSchedule {
            burn_in: 0,
            measure: 3,
            thin: 1,
        };
        let run = sandwich_coupling(&g, &g, &sched, SeedSpec::new(2)).unwrap();
        assert_eq!(run.coalesced_at, Some(1));
        assert!(run.gap_frequency.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn sandwich_gap_matches_exact_on_3x3() {
        let j = 0.25;
        let up = square_ising(3, j, 1.0);
        let lo = square_ising(3, j, -1.0);
        let exact_gap = up.enumerate(24).unwrap().magnetization(4) - lo.enumerate(24).unwrap().magnetization(4);
        let sched = ChainSchedule {
            burn_in: 100,
            measure: 100_000,
            thin: 1,
        };
        let run = sandwich_coupling(&up, &lo, &sched, SeedSpec::new(17)).unwrap();
        assert!((run.magnetization_gap[4] - exact_gap).abs() < 0.02, "{} vs {exact_gap}", run.magnetization_gap[4]);
        assert!(run.upper.dominates(&run.lower));
    }

    #[test]
    fn sandwich_detects_antiferromagnet() {
        let up = square_ising(3, -0.8, 1.0);
        let lo = square_ising(3, -0.8, -1.0);
        let r = sandwich_coupling(&up, &lo, &ChainSchedule::default(), SeedSpec::new(1));
        assert!(matches!(r, Err(Error::DominationViolated { .. })));
    }

    #[test]
    fn hard_constraints_cannot_be_sampled() {
        let mut g = IsingGraph::new(2);
        g.add_hard_constraint(0, 1, 1);
        assert!(run_chain(&g, SpinBits::all_plus(2), &ChainSchedule::default(), SeedSpec::new(1), &[]).is_err());
    }
}
