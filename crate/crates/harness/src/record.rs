//! Output rows and their CSV encoding.

use std::io::Write;

use condphase::SeedSpec;

use crate::config::ExperimentId;
use crate::error::Result;

pub const HEADER: [&str; 13] = [
    "experiment",
    "p",
    "beta",
    "k",
    "m",
    "box",
    "replicates",
    "estimate",
    "std_error",
    "cert_value",
    "cert_holds",
    "seed",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub experiment: ExperimentId,
    pub p: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub box_label: Option<String>,
    pub replicates: Option<usize>,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub cert_value: Option<f64>,
    pub cert_holds: Option<bool>,
    pub seed: SeedSpec,
    pub wall_ms: Option<u128>,
}

impl SweepRecord {
    pub fn new(experiment: ExperimentId, seed: SeedSpec) -> Self {
        SweepRecord {
            experiment,
            p: None,
            beta: None,
            k: None,
            m: None,
            box_label: None,
            replicates: None,
            estimate: None,
            std_error: None,
            cert_value: None,
            cert_holds: None,
            seed,
            wall_ms: None,
        }
    }

    pub fn fields(&self) -> [String; 13] {
        fn num(x: Option<f64>) -> String {
            // both forms print the shortest string that round-trips
            x.map(|v| match v.abs() {
                0.0 => "0".to_string(),
                a if (1e-4..1e9).contains(&a) || !a.is_finite() => v.to_string(),
                _ => format!("{v:e}"),
            })
            .unwrap_or_default()
        }
        fn int<T: ToString>(x: Option<T>) -> String {
            x.map(|v| v.to_string()).unwrap_or_default()
        }
        [
            self.experiment.name().to_string(),
            num(self.p),
            num(self.beta),
            int(self.k),
            int(self.m),
            self.box_label.clone().unwrap_or_default(),
            int(self.replicates),
            num(self.estimate),
            num(self.std_error),
            num(self.cert_value),
            int(self.cert_holds),
            format!("{}:{}:{}", self.seed.master, self.seed.experiment, self.seed.sweep),
            int(self.wall_ms),
        ]
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let f = self.fields();
        HEADER
            .iter()
            .zip(f.iter())
            .filter(|(h, v)| !v.is_empty() && **h != "experiment" && **h != "seed")
            .map(|(h, v)| format!("{h}={v}"))
            .fold(self.experiment.name().to_string(), |acc, s| acc + " " + &s)
    }
}

pub fn write_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[SweepRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        let mut r = SweepRecord::new(ExperimentId::PeierlsCert, SeedSpec::new(3).with_experiment(3));
        r.p = Some(6.832005507119649e-5);
        r.estimate = Some(-0.0);
        r.cert_value = Some(0.1 + 0.2);
        r.beta = Some(f64::INFINITY);
        let f = r.fields();
        assert_eq!(f[1].parse::<f64>().unwrap(), 6.832005507119649e-5);
        assert_eq!(f[2], "inf");
        assert_eq!(f[7], "0");
        assert_eq!(f[9].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(f[11], "3:3:0");
    }

    #[test]
    fn csv_has_header_and_unix_newlines() {
        let r = SweepRecord::new(ExperimentId::BlackwellDemo, SeedSpec::new(0));
        let s = to_csv_string(&[r]).unwrap();
        assert!(s.starts_with("experiment,p,"));
        assert!(!s.contains('\r'));
        assert_eq!(s.lines().count(), 2);
    }
}
