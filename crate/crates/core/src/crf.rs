//! Nearest-neighbour specifications on a finite box of `Z^2`, their
//! conditional specifications under vertex or edge observations, and exact
//! and sampled uniqueness / mixing experiments.
//!
//! Sites are `r * cols + c`. The ring of outside neighbours (no corners) is
//! indexed top `0..cols`, bottom `cols..2cols`, left `2cols..2cols+rows`,
//! right `2cols+rows..2(cols+rows)`. Potential tables are indexed by spin
//! with `0` for `+1` and `1` for `-1`; the unnormalized log-weight is
//! `sum psi_v(s_v) + sum phi_vw(s_v, s_w)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ising::{DenseLaw, IsingGraph};
use crate::mcmc::{run_chain, sandwich_coupling, ChainSchedule, SandwichRun};
use crate::model::SpinBits;
use crate::rng::{PhiloxStream, SeedSpec};
use crate::stats::Estimate;

pub type SiteTable = [f64; 2];
/// `table[a][b]` for the pair `(s_first, s_second)`.
pub type PairTable = [[f64; 2]; 2];

fn spin_slot(s: i8) -> usize {
    if s > 0 {
        0
    } else {
        1
    }
}

/// `(h_first, h_second, J)` with `phi(a, b) = const + h1 a + h2 b + J a b`.
pub fn decompose_pair(t: &PairTable) -> (f64, f64, f64) {
    let (pp, pm, mp, mm) = (t[0][0], t[0][1], t[1][0], t[1][1]);
    ((pp + pm - mp - mm) / 4.0, (pp - pm + mp - mm) / 4.0, (pp + mm - pm - mp) / 4.0)
}

/// `beta J s s'`.
pub fn ising_pair(j: f64) -> PairTable {
    [[j, -j], [-j, j]]
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    Free,
    Plus,
    Minus,
    /// One spin per ring position.
    Fixed(Vec<i8>),
}

impl BoundaryCondition {
    fn spin(&self, ring: usize) -> Option<i8> {
        match self {
            BoundaryCondition::Free => None,
            BoundaryCondition::Plus => Some(1),
            BoundaryCondition::Minus => Some(-1),
            BoundaryCondition::Fixed(v) => Some(v[ring]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Site(usize),
    Ring(usize),
}

/// One incident pair potential of a site, oriented `table[s_site][s_nbr]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub neighbor: Neighbor,
    /// Index into the box edge list for internal edges.
    pub edge: Option<usize>,
    pub table: PairTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NNSpecification {
    rows: usize,
    cols: usize,
    psi: Vec<SiteTable>,
    /// Internal edges `(a, b, phi)` with `a < b`: horizontal, then vertical.
    edges: Vec<(usize, usize, PairTable)>,
    /// `(site, ring, phi)` oriented `phi[s_site][s_ring]`.
    ring: Vec<(usize, usize, PairTable)>,
}

impl NNSpecification {
    /// All potentials zero: the i.i.d. uniform field.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("box must be nonempty".into()));
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols - 1 {
                edges.push((r * cols + c, r * cols + c + 1, [[0.0; 2]; 2]));
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols {
                edges.push((r * cols + c, (r + 1) * cols + c, [[0.0; 2]; 2]));
            }
        }
        let mut ring = Vec::new();
        for c in 0..cols {
            ring.push((c, c, [[0.0; 2]; 2]));
            ring.push(((rows - 1) * cols + c, cols + c, [[0.0; 2]; 2]));
        }
        for r in 0..rows {
            ring.push((r * cols, 2 * cols + r, [[0.0; 2]; 2]));
            ring.push((r * cols + cols - 1, 2 * cols + rows + r, [[0.0; 2]; 2]));
        }
        Ok(NNSpecification {
            rows,
            cols,
            psi: vec![[0.0; 2]; rows * cols],
            edges,
            ring,
        })
    }

    /// `exp(sum J s s' + h sum s)` including the ring edges.
    pub fn ising(rows: usize, cols: usize, j: f64, h: f64) -> Result<Self> {
        let mut s = NNSpecification::new(rows, cols)?;
        for p in &mut s.psi {
            *p = [h, -h];
        }
        for e in &mut s.edges {
            e.2 = ising_pair(j);
        }
        for e in &mut s.ring {
            e.2 = ising_pair(j);
        }
        Ok(s)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn ring_len(&self) -> usize {
        2 * (self.rows + self.cols)
    }

    pub fn edges(&self) -> &[(usize, usize, PairTable)] {
        &self.edges
    }

    pub fn set_site_potential(&mut self, site: usize, t: SiteTable) {
        self.psi[site] = t;
    }

    pub fn set_edge_potential(&mut self, edge: usize, t: PairTable) {
        self.edges[edge].2 = t;
    }

    /// Set every pair potential touching ring position `ring`.
    pub fn set_ring_potential(&mut self, ring: usize, t: PairTable) {
        for e in self.ring.iter_mut().filter(|e| e.1 == ring) {
            e.2 = t;
        }
    }

    pub fn neighborhood(&self, site: usize) -> Vec<Slot> {
        let mut out = Vec::with_capacity(4);
        for (i, &(a, b, t)) in self.edges.iter().enumerate() {
            if a == site {
                out.push(Slot {
                    neighbor: Neighbor::Site(b),
                    edge: Some(i),
                    table: t,
                });
            } else if b == site {
                out.push(Slot {
                    neighbor: Neighbor::Site(a),
                    edge: Some(i),
                    table: [[t[0][0], t[1][0]], [t[0][1], t[1][1]]],
                });
            }
        }
        for &(s, r, t) in &self.ring {
            if s == site {
                out.push(Slot {
                    neighbor: Neighbor::Ring(r),
                    edge: None,
                    table: t,
                });
            }
        }
        out
    }

    /// `log P(+)/P(-)` at `site` given neighbour spins per slot; `None`
    /// drops the slot.
    pub fn log_odds(&self, site: usize, slots: &[Slot], nbr: &[Option<i8>]) -> f64 {
        let mut l = self.psi[site][0] - self.psi[site][1];
        for (slot, n) in slots.iter().zip(nbr) {
            if let Some(s) = n {
                let j = spin_slot(*s);
                l += slot.table[0][j] - slot.table[1][j];
            }
        }
        l
    }

    /// `gamma_{site}(+1 | config, boundary)`.
    pub fn local_conditional(&self, config: &SpinBits, bc: &BoundaryCondition, site: usize) -> f64 {
        let slots = self.neighborhood(site);
        let nbr = read_neighbors(&slots, config, bc);
        logistic(self.log_odds(site, &slots, &nbr))
    }

    pub fn to_graph(&self, bc: &BoundaryCondition) -> Result<IsingGraph> {
        self.check_boundary(bc)?;
        let mut g = IsingGraph::new(self.sites());
        for (i, p) in self.psi.iter().enumerate() {
            g.add_field(i, (p[0] - p[1]) / 2.0);
        }
        for &(a, b, t) in &self.edges {
            let (ha, hb, j) = decompose_pair(&t);
            g.add_field(a, ha);
            g.add_field(b, hb);
            if j != 0.0 {
                g.add_coupling(a, b, j);
            }
        }
        for &(s, r, t) in &self.ring {
            if let Some(x) = bc.spin(r) {
                let k = spin_slot(x);
                g.add_field(s, (t[0][k] - t[1][k]) / 2.0);
            }
        }
        Ok(g)
    }

    fn check_boundary(&self, bc: &BoundaryCondition) -> Result<()> {
        match bc {
            BoundaryCondition::Fixed(v) if v.len() != self.ring_len() || v.iter().any(|s| s.abs() != 1) => Err(
                Error::ShapeMismatch(format!("boundary needs {} spins of +-1", self.ring_len())),
            ),
            _ => Ok(()),
        }
    }
}

fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

fn read_neighbors(slots: &[Slot], config: &SpinBits, bc: &BoundaryCondition) -> Vec<Option<i8>> {
    slots
        .iter()
        .map(|s| match s.neighbor {
            Neighbor::Site(j) => Some(config.get(j)),
            Neighbor::Ring(r) => bc.spin(r),
        })
        .collect()
}

fn coupling_of(p: f64) -> f64 {
    0.5 * ((1.0 - p) / p).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationChannel {
    /// `Y_v = X_v xi_v` with per-site flip probability.
    Vertex { p: Vec<f64> },
    /// `Y_vw = X_v X_w xi_vw` on the internal box edges.
    Edge { p: f64 },
}

impl ObservationChannel {
    pub fn vertex_uniform(sites: usize, p: f64) -> Self {
        ObservationChannel::Vertex { p: vec![p; sites] }
    }

    fn validate(&self, base: &NNSpecification) -> Result<()> {
        match self {
            ObservationChannel::Vertex { p } => {
                if p.len() != base.sites() {
                    return Err(Error::ShapeMismatch("one flip probability per site".into()));
                }
                if let Some(&bad) = p.iter().find(|&&q| !(q > 0.0 && q <= 0.5)) {
                    return Err(Error::ProbabilityOutOfRange(bad));
                }
            }
            ObservationChannel::Edge { p } => {
                if !(0.0..=0.5).contains(p) {
                    return Err(Error::ProbabilityOutOfRange(*p));
                }
            }
        }
        Ok(())
    }

    pub fn observation_len(&self, base: &NNSpecification) -> usize {
        match self {
            ObservationChannel::Vertex { .. } => base.sites(),
            ObservationChannel::Edge { .. } => base.edges().len(),
        }
    }

    /// `beta_v = log sqrt((1 - p_v) / p_v)` per site (vertex mode).
    pub fn vertex_couplings(&self) -> Option<Vec<f64>> {
        match self {
            ObservationChannel::Vertex { p } => Some(p.iter().map(|&q| coupling_of(q)).collect()),
            ObservationChannel::Edge { .. } => None,
        }
    }

    /// Draw observations of `x`, one Bernoulli flip per observed unit in order.
    pub fn sample(&self, base: &NNSpecification, x: &SpinBits, rng: &mut PhiloxStream) -> Vec<i8> {
        match self {
            ObservationChannel::Vertex { p } => (0..base.sites())
                .map(|v| if rng.bernoulli(p[v]) { -x.get(v) } else { x.get(v) })
                .collect(),
            ObservationChannel::Edge { p } => base
                .edges()
                .iter()
                .map(|&(a, b, _)| {
                    let clean = x.get(a) * x.get(b);
                    if rng.bernoulli(*p) {
                        -clean
                    } else {
                        clean
                    }
                })
                .collect(),
        }
    }

    /// `log P(y | x)`.
    pub fn log_likelihood(&self, base: &NNSpecification, x: &SpinBits, y: &[i8]) -> f64 {
        let term = |p: f64, agree: bool| if agree { (1.0 - p).ln() } else { p.ln() };
        match self {
            ObservationChannel::Vertex { p } => (0..base.sites()).map(|v| term(p[v], x.get(v) == y[v])).sum(),
            ObservationChannel::Edge { p } => base
                .edges()
                .iter()
                .zip(y)
                .map(|(&(a, b, _), &o)| term(*p, x.get(a) * x.get(b) == o))
                .sum(),
        }
    }
}

/// `gamma^y`: the base specification reweighted by the observation densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSpecification {
    base: NNSpecification,
    channel: ObservationChannel,
    y: Vec<i8>,
}

impl ConditionalSpecification {
    pub fn new(base: NNSpecification, channel: ObservationChannel, y: Vec<i8>) -> Result<Self> {
        channel.validate(&base)?;
        if y.len() != channel.observation_len(&base) || y.iter().any(|s| s.abs() != 1) {
            return Err(Error::ShapeMismatch("observations do not match the channel".into()));
        }
        Ok(ConditionalSpecification { base, channel, y })
    }

    pub fn base(&self) -> &NNSpecification {
        &self.base
    }

    pub fn channel(&self) -> &ObservationChannel {
        &self.channel
    }

    pub fn observations(&self) -> &[i8] {
        &self.y
    }

    pub fn with_observations(&self, y: Vec<i8>) -> Result<Self> {
        ConditionalSpecification::new(self.base.clone(), self.channel.clone(), y)
    }

    fn edge_coupling(&self) -> Option<Coupling> {
        match self.channel {
            ObservationChannel::Edge { p } if p == 0.0 => Some(Coupling::Hard),
            ObservationChannel::Edge { p } => Some(Coupling::Soft(coupling_of(p))),
            ObservationChannel::Vertex { .. } => None,
        }
    }

    /// Slots of `site` with the channel folded into the pair tables.
    fn slots(&self, site: usize) -> Result<Vec<Slot>> {
        let mut slots = self.base.neighborhood(site);
        match self.edge_coupling() {
            Some(Coupling::Hard) => return Err(Error::InfiniteCoupling("local conditionals of a noiseless edge channel")),
            Some(Coupling::Soft(b)) => {
                for s in &mut slots {
                    if let Some(e) = s.edge {
                        let add = ising_pair(b * self.y[e] as f64);
                        for (row, extra) in s.table.iter_mut().zip(add) {
                            row[0] += extra[0];
                            row[1] += extra[1];
                        }
                    }
                }
            }
            None => {}
        }
        Ok(slots)
    }

    fn vertex_field(&self, site: usize) -> f64 {
        match &self.channel {
            ObservationChannel::Vertex { p } => 2.0 * coupling_of(p[site]) * self.y[site] as f64,
            ObservationChannel::Edge { .. } => 0.0,
        }
    }

    /// `gamma^y_{site}(+1 | config, boundary)`.
    pub fn local_conditional(&self, config: &SpinBits, bc: &BoundaryCondition, site: usize) -> Result<f64> {
        let slots = self.slots(site)?;
        let nbr = read_neighbors(&slots, config, bc);
        Ok(logistic(self.base.log_odds(site, &slots, &nbr) + self.vertex_field(site)))
    }

    pub fn to_graph(&self, bc: &BoundaryCondition) -> Result<IsingGraph> {
        let mut g = self.base.to_graph(bc)?;
        match &self.channel {
            ObservationChannel::Vertex { p } => {
                for (v, &q) in p.iter().enumerate() {
                    g.add_field(v, coupling_of(q) * self.y[v] as f64);
                }
            }
            ObservationChannel::Edge { .. } => {
                for (e, &(a, b, _)) in self.base.edges().iter().enumerate() {
                    match self.edge_coupling() {
                        Some(Coupling::Hard) => g.add_hard_constraint(a, b, self.y[e]),
                        Some(Coupling::Soft(beta)) => g.add_coupling(a, b, beta * self.y[e] as f64),
                        None => unreachable!(),
                    }
                }
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy)]
enum Coupling {
    Soft(f64),
    Hard,
}

/// A model whose single-site conditionals can be probed with arbitrary
/// neighbour spins.
pub trait LocalModel {
    fn base(&self) -> &NNSpecification;
    fn local_slots(&self, site: usize) -> Result<Vec<Slot>>;
    fn extra_field(&self, site: usize) -> f64;
}

impl LocalModel for NNSpecification {
    fn base(&self) -> &NNSpecification {
        self
    }

    fn local_slots(&self, site: usize) -> Result<Vec<Slot>> {
        Ok(self.neighborhood(site))
    }

    fn extra_field(&self, _site: usize) -> f64 {
        0.0
    }
}

impl LocalModel for ConditionalSpecification {
    fn base(&self) -> &NNSpecification {
        &self.base
    }

    fn local_slots(&self, site: usize) -> Result<Vec<Slot>> {
        self.slots(site)
    }

    fn extra_field(&self, site: usize) -> f64 {
        self.vertex_field(site)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityWitness {
    pub site: usize,
    pub lower: Vec<i8>,
    pub upper: Vec<i8>,
    pub p_lower: f64,
    pub p_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub monotone: bool,
    pub witness: Option<MonotonicityWitness>,
    /// For vertex channels: whether conditionals also increase with `y_v`.
    pub increasing_in_y: Option<bool>,
}

/// Checks, at every site and for every ordered pair of neighbour
/// configurations (ring neighbours included), that the probability of `+1`
/// does not decrease.
pub fn monotonicity_check<M: LocalModel + ?Sized>(model: &M) -> Result<MonotonicityReport> {
    let base = model.base();
    let mut witness = None;
    'sites: for site in 0..base.sites() {
        let slots = model.local_slots(site)?;
        let d = slots.len();
        let h = model.extra_field(site);
        let prob = |word: usize| {
            let nbr: Vec<Option<i8>> = (0..d).map(|i| Some(if (word >> i) & 1 == 1 { -1 } else { 1 })).collect();
            logistic(base.log_odds(site, &slots, &nbr) + h)
        };
        for lo in 0..1usize << d {
            // upper configurations have a subset of the minus bits of `lo`
            let mut up = lo;
            loop {
                let (pl, pu) = (prob(lo), prob(up));
                if pl > pu + 1e-12 {
                    let spins = |w: usize| (0..d).map(|i| if (w >> i) & 1 == 1 { -1 } else { 1 }).collect();
                    witness = Some(MonotonicityWitness {
                        site,
                        lower: spins(lo),
                        upper: spins(up),
                        p_lower: pl,
                        p_upper: pu,
                    });
                    break 'sites;
                }
                if up == 0 {
                    break;
                }
                up = (up - 1) & lo;
            }
        }
    }
    Ok(MonotonicityReport {
        monotone: witness.is_none(),
        witness,
        increasing_in_y: None,
    })
}

/// Monotonicity of a conditional specification, plus monotonicity in the
/// observation for vertex channels.
pub fn conditional_monotonicity_check(spec: &ConditionalSpecification) -> Result<MonotonicityReport> {
    let mut report = monotonicity_check(spec)?;
    if let ObservationChannel::Vertex { p } = spec.channel() {
        let base = spec.base();
        let mut increasing = true;
        for site in 0..base.sites() {
            let slots = base.neighborhood(site);
            let b = coupling_of(p[site]);
            for word in 0..1usize << slots.len() {
                let nbr: Vec<Option<i8>> =
                    (0..slots.len()).map(|i| Some(if (word >> i) & 1 == 1 { -1 } else { 1 })).collect();
                let l = base.log_odds(site, &slots, &nbr);
                if logistic(l - 2.0 * b) > logistic(l + 2.0 * b) + 1e-12 {
                    increasing = false;
                }
            }
        }
        report.increasing_in_y = Some(increasing);
    }
    Ok(report)
}

fn require_monotone(spec: &ConditionalSpecification) -> Result<()> {
    let r = monotonicity_check(spec)?;
    match r.witness {
        None => Ok(()),
        Some(w) => Err(Error::NotMonotone(format!(
            "site {}: P(+) drops from {} to {} when raising neighbours {:?} -> {:?}",
            w.site, w.p_lower, w.p_upper, w.lower, w.upper
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlusMinusResult {
    /// `E_+[X_v] - E_-[X_v]` per site.
    pub site_gaps: Vec<f64>,
    /// Mean over sites.
    pub global_gap: f64,
    pub run: SandwichRun,
}

/// Sandwich coupling under `gamma^y` with plus and minus boundary conditions.
pub fn plus_minus_experiment(
    spec: &ConditionalSpecification,
    schedule: &ChainSchedule,
    seed: SeedSpec,
) -> Result<PlusMinusResult> {
    require_monotone(spec)?;
    let upper = spec.to_graph(&BoundaryCondition::Plus)?;
    let lower = spec.to_graph(&BoundaryCondition::Minus)?;
    let run = sandwich_coupling(&upper, &lower, schedule, seed)?;
    let site_gaps = run.magnetization_gap.clone();
    let global_gap = site_gaps.iter().sum::<f64>() / site_gaps.len() as f64;
    Ok(PlusMinusResult {
        site_gaps,
        global_gap,
        run,
    })
}

/// Exact `E_+[X_v] - E_-[X_v]` per site by enumeration.
pub fn exact_plus_minus_gap(spec: &ConditionalSpecification, max_sites: usize) -> Result<Vec<f64>> {
    let plus = spec.to_graph(&BoundaryCondition::Plus)?.enumerate(max_sites)?;
    let minus = spec.to_graph(&BoundaryCondition::Minus)?.enumerate(max_sites)?;
    Ok(plus
        .magnetizations()
        .iter()
        .zip(minus.magnetizations())
        .map(|(a, b)| a - b)
        .collect())
}

/// `gamma_V(. | eta)` as a dense law over all box configurations, zero off
/// `{sigma : sigma = eta outside V}`.
pub fn kernel(graph: &IsingGraph, v_mask: u64, eta: u64) -> Result<Vec<f64>> {
    let n = graph.len();
    if n > 16 {
        return Err(Error::BudgetExceeded {
            what: "specification kernel sites",
            needed: n,
            limit: 16,
        });
    }
    let full = (1u64 << n) - 1;
    let v_mask = v_mask & full;
    let base = eta & !v_mask;
    let mut words = Vec::new();
    // enumerate subsets of V
    let mut sub = v_mask;
    loop {
        words.push(base | sub);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & v_mask;
    }
    let lw: Vec<f64> = words
        .iter()
        .map(|&w| graph.log_weight(&SpinBits::from_word(n, w)))
        .collect();
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("boundary condition has zero weight".into()));
    }
    let z: f64 = lw.iter().map(|&l| (l - max).exp()).sum();
    let mut out = vec![0.0; 1usize << n];
    for (&w, &l) in words.iter().zip(&lw) {
        out[w as usize] = (l - max).exp() / z;
    }
    Ok(out)
}

/// `max_sigma |(gamma_V gamma_W)(sigma | eta) - gamma_V(sigma | eta)|` for `W`
/// inside `V`.
pub fn specification_consistency(graph: &IsingGraph, v_mask: u64, w_mask: u64, eta: u64) -> Result<f64> {
    if w_mask & !v_mask != 0 {
        return Err(Error::InvalidArgument("W must be a subset of V".into()));
    }
    let gv = kernel(graph, v_mask, eta)?;
    let mut composed = vec![0.0; gv.len()];
    for (tau, &pt) in gv.iter().enumerate() {
        if pt == 0.0 {
            continue;
        }
        let gw = kernel(graph, w_mask, tau as u64)?;
        for (s, q) in gw.iter().enumerate() {
            composed[s] += pt * q;
        }
    }
    Ok(gv.iter().zip(&composed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Positive-weighted sums of products of plus-indicators.
pub fn random_increasing_function(n: usize, rng: &mut PhiloxStream) -> impl Fn(u64) -> f64 {
    let terms: Vec<(f64, u64)> = (0..1 + rng.below(4))
        .map(|_| {
            let mut mask = 0u64;
            for _ in 0..1 + rng.below(n.min(4)) {
                mask |= 1 << rng.below(n);
            }
            (rng.next_f64(), mask)
        })
        .collect();
    // a word has a set bit for -1, so all plus on `mask` means no overlap
    move |w: u64| terms.iter().filter(|(_, m)| w & m == 0).map(|(c, _)| c).sum()
}

/// `min_f E_upper[f] - E_lower[f]` over `count` random increasing functions.
pub fn domination_margin(upper: &DenseLaw, lower: &DenseLaw, count: usize, seed: SeedSpec) -> f64 {
    let mut rng = seed.stream();
    let n = upper.sites();
    (0..count)
        .map(|_| {
            let f = random_increasing_function(n, &mut rng);
            upper.expectation(&f) - lower.expectation(&f)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollmerReport {
    pub max_discrepancy: f64,
    pub observations_checked: usize,
    /// Plus boundary stands in for the infinite-volume plus state.
    pub finite_volume: bool,
}

/// Compares, for every observation vector, the conditional law of `X` given
/// `Y` under the plus-boundary Gibbs measure with the plus-boundary Gibbs law
/// of `gamma^Y`.
pub fn follmer_check(base: &NNSpecification, p: f64) -> Result<FollmerReport> {
    let n = base.sites();
    if n > 9 {
        return Err(Error::BudgetExceeded {
            what: "follmer check sites",
            needed: n,
            limit: 9,
        });
    }
    if !monotonicity_check(base)?.monotone {
        return Err(Error::NotMonotone("base specification".into()));
    }
    let channel = ObservationChannel::vertex_uniform(n, p);
    channel.validate(base)?;
    let prior = base.to_graph(&BoundaryCondition::Plus)?.enumerate(n)?;
    let worst = (0..1u64 << n)
        .into_par_iter()
        .map(|yw| -> Result<f64> {
            let y = SpinBits::from_word(n, yw).spins();
            let joint: Vec<f64> = (0..1u64 << n)
                .map(|xw| prior.prob(xw) * channel.log_likelihood(base, &SpinBits::from_word(n, xw), &y).exp())
                .collect();
            let py: f64 = joint.iter().sum();
            let spec = ConditionalSpecification::new(base.clone(), channel.clone(), y)?;
            let post = spec.to_graph(&BoundaryCondition::Plus)?.enumerate(n)?;
            Ok(joint
                .iter()
                .enumerate()
                .map(|(xw, &q)| (q / py - post.prob(xw as u64)).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(FollmerReport {
        max_discrepancy: worst,
        observations_checked: 1 << n,
        finite_volume: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MixingMode {
    /// Exact inner conditionals; `X` drawn exactly from the base law.
    Exact,
    /// Inner conditionals and `X` by heat-bath chains.
    Mcmc(ChainSchedule),
}

/// `E |P[X_V in A | X_{W^c}, Y] - P[X_V in A | Y]|`, maximized over
/// singleton `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingQuery {
    pub base: NNSpecification,
    pub boundary: BoundaryCondition,
    pub channel: ObservationChannel,
    /// Sites of `V`.
    pub inner: Vec<usize>,
    /// Sites of `W`; must contain `V`. Everything else in the box is `W^c`.
    pub outer: Vec<usize>,
    pub replicates: usize,
    pub mode: MixingMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingEstimate {
    pub estimate: Estimate,
    pub exact_inner: bool,
}

/// Largest box for [`MixingMode::Exact`].
pub const MAX_EXACT_MIXING_SITES: usize = 16;

fn sample_dense(law: &DenseLaw, u: f64) -> u64 {
    let mut acc = 0.0;
    let probs = law.probs();
    for (w, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return w as u64;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u64
}

/// Restrict `graph` to `keep` with every other site clamped to `state`.
fn clamp(graph: &IsingGraph, keep: &[usize], state: &SpinBits) -> IsingGraph {
    let mut pos = vec![usize::MAX; graph.len()];
    for (i, &s) in keep.iter().enumerate() {
        pos[s] = i;
    }
    let mut g = IsingGraph::new(keep.len());
    for (i, &s) in keep.iter().enumerate() {
        g.add_field(i, graph.field()[s]);
    }
    for &(a, b, j) in graph.edges() {
        match (pos[a], pos[b]) {
            (usize::MAX, usize::MAX) => {}
            (usize::MAX, ib) => g.add_field(ib, j * state.get(a) as f64),
            (ia, usize::MAX) => g.add_field(ia, j * state.get(b) as f64),
            (ia, ib) => g.add_coupling(ia, ib, j),
        }
    }
    g
}

pub fn conditional_mixing_metric(query: &MixingQuery, seed: SeedSpec) -> Result<MixingEstimate> {
    let base = &query.base;
    let n = base.sites();
    query.channel.validate(base)?;
    if query.inner.is_empty() || query.inner.iter().chain(&query.outer).any(|&s| s >= n) {
        return Err(Error::InvalidArgument("V must be a nonempty set of box sites".into()));
    }
    if query.inner.iter().any(|v| !query.outer.contains(v)) {
        return Err(Error::InvalidArgument("V must lie inside W".into()));
    }
    if query.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be positive".into()));
    }
    let v_count = query.inner.len();
    let w_mask: u64 = query.outer.iter().fold(0, |m, &s| m | 1 << s);
    let exact = matches!(query.mode, MixingMode::Exact);
    if exact && n > MAX_EXACT_MIXING_SITES {
        return Err(Error::BudgetExceeded {
            what: "exact mixing metric sites",
            needed: n,
            limit: MAX_EXACT_MIXING_SITES,
        });
    }
    if !exact && v_count != 1 {
        return Err(Error::InvalidArgument("MCMC mode supports a single inner site".into()));
    }
    let prior_graph = base.to_graph(&query.boundary)?;
    let prior = if exact { Some(prior_graph.enumerate(n)?) } else { None };
    let per_rep: Vec<Vec<f64>> = (0..query.replicates)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let rep_seed = seed.with_replicate(rep as u32);
            let mut rng = rep_seed.stream();
            let x = match (&prior, &query.mode) {
                (Some(law), _) => SpinBits::from_word(n, sample_dense(law, rng.next_f64())),
                (None, MixingMode::Mcmc(s)) => {
                    let sched = ChainSchedule { measure: 1, ..*s };
                    run_chain(&prior_graph, SpinBits::all_plus(n), &sched, rep_seed.with_sweep(1), &[])?.final_state
                }
                _ => unreachable!(),
            };
            let y = query.channel.sample(base, &x, &mut rng);
            let post = ConditionalSpecification::new(base.clone(), query.channel.clone(), y)?.to_graph(&query.boundary)?;
            if exact {
                let law = post.enumerate(n)?;
                let mut given_y = vec![0.0; 1 << v_count];
                let mut given_xw = vec![0.0; 1 << v_count];
                let xw = x.to_word();
                for (w, &p) in law.probs().iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let w = w as u64;
                    let key = query.inner.iter().enumerate().fold(0usize, |k, (i, &s)| k | (((w >> s) & 1) as usize) << i);
                    given_y[key] += p;
                    if (w ^ xw) & !w_mask & ((1u64 << n) - 1) == 0 {
                        given_xw[key] += p;
                    }
                }
                let zw: f64 = given_xw.iter().sum();
                Ok(given_y.iter().zip(&given_xw).map(|(a, b)| (b / zw - a).abs()).collect())
            } else {
                let MixingMode::Mcmc(s) = &query.mode else { unreachable!() };
                let v = query.inner[0];
                let free = run_chain(&post, SpinBits::all_plus(n), s, rep_seed.with_sweep(2), &[v])?;
                let keep: Vec<usize> = query.outer.clone();
                let local = keep.iter().position(|&k| k == v).expect("V inside W");
                let clamped = clamp(&post, &keep, &x);
                let cl = run_chain(&clamped, SpinBits::all_plus(keep.len()), s, rep_seed.with_sweep(3), &[local])?;
                let d = ((cl.mean(0).mean - free.mean(0).mean) / 2.0).abs();
                Ok(vec![d, d])
            }
        })
        .collect::<Result<_>>()?;
    let best = (0..1usize << v_count)
        .map(|a| Estimate::from_samples(&per_rep.iter().map(|r| r[a]).collect::<Vec<_>>()))
        .fold(None::<Estimate>, |acc, e| match acc {
            Some(b) if b.mean >= e.mean => Some(b),
            _ => Some(e),
        })
        .expect("at least one singleton");
    Ok(MixingEstimate {
        estimate: best,
        exact_inner: exact,
    })
}

/// Sites of the `rows x cols` box on its outer ring.
pub fn box_border(rows: usize, cols: usize) -> Vec<usize> {
    (0..rows * cols)
        .filter(|&i| {
            let (r, c) = (i / cols, i % cols);
            r == 0 || c == 0 || r + 1 == rows || c + 1 == cols
        })
        .collect()
}
