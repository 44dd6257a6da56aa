//! Dry-run feasibility checks, shared by `validate` and every run.

use condphase::entropy::{MAX_INTERMEDIATE_SITES, MAX_STATE_BITS, MAX_TABLE_BITS};
use condphase::crf::MAX_EXACT_MIXING_SITES;

use crate::config::{ChannelKind, ExperimentConfig, ExperimentId, Method};
use crate::error::{HarnessError, Result};

/// Size of one grid point's work.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanItem {
    pub label: String,
    /// `log2` of the largest state space enumerated or swept.
    pub state_bits: usize,
    pub memory_bytes: u128,
}

#[derive(Debug, Default)]
pub struct ValidationReport {
    pub items: Vec<PlanItem>,
    pub problems: Vec<HarnessError>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }

    /// First problem, config errors before budget errors.
    pub fn into_result(mut self) -> Result<Vec<PlanItem>> {
        if self.problems.is_empty() {
            return Ok(self.items);
        }
        self.problems.sort_by_key(|e| e.exit_code());
        Err(self.problems.swap_remove(0))
    }

    fn config(&mut self, msg: impl Into<String>) {
        self.problems.push(HarnessError::Config(msg.into()));
    }

    fn budget(&mut self, msg: impl Into<String>) {
        self.problems.push(HarnessError::Budget(msg.into()));
    }

    fn item(&mut self, label: String, state_bits: usize, memory_bytes: u128) {
        self.items.push(PlanItem {
            label,
            state_bits,
            memory_bytes,
        });
    }
}

fn pow2(bits: usize) -> u128 {
    1u128.checked_shl(bits as u32).unwrap_or(u128::MAX)
}

pub fn validate(config: &ExperimentConfig, id: ExperimentId) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if config.replicates == 0 {
        rep.config("replicates must be positive");
    }
    if !(config.tol > 0.0) {
        rep.config("tol must be positive");
    }
    for &p in &config.p {
        if !(0.0..=0.5).contains(&p) {
            rep.config(format!("p = {p} outside [0, 1/2]"));
        }
    }
    if config.k.contains(&0) {
        rep.config("k must be >= 1");
    }
    if let Some(s) = config.schedule {
        if s.measure == 0 || s.thin == 0 {
            rep.config("schedule needs measure >= 1 and thin >= 1");
        }
    }
    let need = |rep: &mut ValidationReport, name: &str, empty: bool| {
        if empty {
            rep.config(format!("{name} grid is empty"));
        }
    };
    match id {
        ExperimentId::StabilitySweep => {
            need(&mut rep, "p", config.p.is_empty());
            need(&mut rep, "k", config.k.is_empty());
            need(&mut rep, "m", config.m.is_empty());
            let budget = config.inference_budget();
            for &k in &config.k {
                for &m in &config.m {
                    let w = 2 * m + 1;
                    let label = format!("k={k} m={m}");
                    match config.method {
                        Method::Enumeration => {
                            let n = k * w;
                            if n > budget.max_enum_sites.min(30) {
                                rep.budget(format!("{label}: enumeration of {n} sites exceeds {}", budget.max_enum_sites));
                            }
                            rep.item(label, n, 8 * pow2(n));
                        }
                        Method::TransferMatrix => {
                            if w > budget.max_column_height.min(24) {
                                rep.budget(format!("{label}: column height {w} exceeds {}", budget.max_column_height));
                            }
                            rep.item(label, w, 8 * 2 * (k as u128 + 1) * pow2(w));
                        }
                        Method::Mcmc => rep.item(label, 0, (k * w) as u128 * 16),
                    }
                }
            }
        }
        ExperimentId::DobrushinCert => {
            need(&mut rep, "p", config.p.is_empty());
            need(&mut rep, "k", config.k.is_empty());
            need(&mut rep, "m", config.m.is_empty());
            if config.p.contains(&0.0) {
                rep.config("dobrushin-cert needs p > 0");
            }
            for &k in &config.k {
                for &m in &config.m {
                    let n = (k + 1) * (2 * m + 1);
                    rep.item(format!("k={k} m={m}"), 0, n as u128 * 4 * 16);
                }
            }
        }
        ExperimentId::PeierlsCert => {
            need(&mut rep, "p", config.p.is_empty());
            rep.item("contour enumeration l<=14".into(), 0, 1 << 20);
        }
        ExperimentId::EntropySuite => {
            need(&mut rep, "p", config.p.is_empty());
            need(&mut rep, "k", config.k.is_empty());
            if config.r == 0 || config.r > MAX_STATE_BITS {
                rep.config(format!("r = {} outside 1..={MAX_STATE_BITS}", config.r));
            }
            if !(0.0..=1.0).contains(&config.flip_rate) {
                rep.config(format!("flip_rate = {} outside [0, 1]", config.flip_rate));
            }
            for &k in &config.k {
                let bits = config.r * (2 * k + 1);
                if bits > MAX_TABLE_BITS {
                    rep.budget(format!("k={k}: joint table needs {bits} bits, limit {MAX_TABLE_BITS}"));
                }
                rep.item(format!("k={k}"), bits, 8 * pow2(bits));
                for &m in &config.m {
                    let sites = k * (2 * m + 1);
                    if sites > MAX_INTERMEDIATE_SITES {
                        rep.budget(format!("k={k} m={m}: intermediate gap needs {sites} sites, limit {MAX_INTERMEDIATE_SITES}"));
                    }
                    let bits = ((k + 1) * (2 * m + 1)).min(MAX_TABLE_BITS);
                    rep.item(format!("intermediate k={k} m={m}"), bits, 8 * pow2(MAX_TABLE_BITS));
                }
            }
        }
        ExperimentId::CrfUniqueness => {
            need(&mut rep, "p", config.p.is_empty());
            need(&mut rep, "coupling", config.coupling.is_empty());
            need(&mut rep, "boxes", config.boxes.is_empty());
            if config.p.contains(&0.0) {
                rep.config("vertex channel needs p > 0");
            }
            if config.coupling.iter().any(|&j| !(j >= 0.0)) {
                rep.config("couplings must be >= 0 for a monotone specification");
            }
            for &[r, c] in &config.boxes {
                if r == 0 || c == 0 {
                    rep.config("boxes must be nonempty");
                }
                rep.item(format!("box {r}x{c}"), (r * c).min(16), 16 * (r * c) as u128);
            }
        }
        ExperimentId::CrfMixing => {
            need(&mut rep, "p", config.p.is_empty());
            need(&mut rep, "boxes", config.boxes.is_empty());
            if config.channel == ChannelKind::Vertex && config.p.contains(&0.0) {
                rep.config("vertex channel needs p > 0");
            }
            for &[r, c] in &config.boxes {
                if r < 3 || c < 3 {
                    rep.config(format!("box {r}x{c} has no interior"));
                }
                let n = r * c;
                if n > MAX_EXACT_MIXING_SITES && config.p.contains(&0.0) {
                    rep.budget(format!("box {r}x{c}: noiseless edge channel needs exact mode (<= {MAX_EXACT_MIXING_SITES} sites)"));
                }
                let bits = if n <= MAX_EXACT_MIXING_SITES { n } else { 0 };
                rep.item(format!("box {r}x{c}"), bits, 8 * pow2(bits));
            }
        }
        ExperimentId::BlackwellDemo => {
            need(&mut rep, "k", config.k.is_empty());
            for &k in &config.k {
                let bits = 2 * k + 1;
                if bits > MAX_TABLE_BITS {
                    rep.budget(format!("k={k}: joint table needs {bits} bits"));
                }
                rep.item(format!("k={k}"), bits, 8 * pow2(bits));
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn transfer_budget_is_column_height() {
        let c = config(r#"{"p": [0.3], "k": [40], "m": [7]}"#);
        assert!(validate(&c, ExperimentId::StabilitySweep).is_ok());
        let c = config(r#"{"p": [0.3], "k": [2], "m": [8]}"#);
        let err = validate(&c, ExperimentId::StabilitySweep).into_result().unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn config_errors_come_first() {
        let c = config(r#"{"p": [0.7], "k": [6], "m": [2], "method": "enumeration"}"#);
        let rep = validate(&c, ExperimentId::StabilitySweep);
        assert_eq!(rep.problems.len(), 2);
        assert_eq!(rep.into_result().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn mixing_needs_an_interior() {
        let c = config(r#"{"p": [0.1], "boxes": [[2, 5]]}"#);
        assert_eq!(validate(&c, ExperimentId::CrfMixing).into_result().unwrap_err().exit_code(), 2);
        let c = config(r#"{"p": [0.0], "boxes": [[5, 5]]}"#);
        assert_eq!(validate(&c, ExperimentId::CrfMixing).into_result().unwrap_err().exit_code(), 3);
    }
}
