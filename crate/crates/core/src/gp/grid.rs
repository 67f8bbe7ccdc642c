use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NAMES: [&str; 5] = ["theta0", "theta1", "theta2", "theta3", "sigma_n2"];

/// Candidate hyperparameter values for the grid stage of fitting.
///
/// `theta1` applies to standardized inputs. The amplitude parameters
/// (`theta0`, `theta2`, `theta3`, `sigma_n2`) are relative to the sample
/// variance of the targets, so one grid serves targets of any scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub theta3: Vec<f64>,
    pub sigma_n2: Vec<f64>,
    /// Multiplicative step of each coordinate-descent sweep.
    pub refine_steps: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            theta0: vec![0.0, 0.1, 1.0],
            theta1: vec![0.3, 3.0],
            theta2: vec![0.0, 1.0],
            theta3: vec![0.0, 1.0],
            sigma_n2: vec![1e-4, 1e-2, 0.1, 0.5],
            refine_steps: vec![2.0, 1.25, 1.06],
        }
    }
}

impl GridSpec {
    pub(crate) fn axis(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.theta0,
            1 => &self.theta1,
            2 => &self.theta2,
            3 => &self.theta3,
            _ => &self.sigma_n2,
        }
    }

    fn axis_mut(&mut self, i: usize) -> &mut Vec<f64> {
        match i {
            0 => &mut self.theta0,
            1 => &mut self.theta1,
            2 => &mut self.theta2,
            3 => &mut self.theta3,
            _ => &mut self.sigma_n2,
        }
    }

    pub fn size(&self) -> usize {
        (0..5).map(|i| self.axis(i).len()).product()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, name) in NAMES.iter().enumerate() {
            let axis = self.axis(i);
            if axis.is_empty() {
                return Err(Error::InvalidParameter(format!("grid axis {name} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "grid axis {name} must be finite and nonnegative"
                )));
            }
        }
        if self.refine_steps.iter().any(|s| !(*s > 1.0)) {
            return Err(Error::InvalidParameter("refine steps must exceed 1".into()));
        }
        Ok(())
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Parses `name=v1,v2,...` or `name=log:lo:hi:n` clauses separated by `;`.
/// Axes that are not mentioned keep their default values; `steps=` sets
/// the refinement schedule.
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = GridSpec::default();
        for clause in s.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let (name, values) = clause
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("bad grid clause `{clause}`")))?;
            let values = parse_values(values.trim())?;
            match name.trim() {
                "steps" => spec.refine_steps = values,
                other => {
                    let i = NAMES.iter().position(|n| *n == other).ok_or_else(|| {
                        Error::InvalidParameter(format!("unknown grid axis `{other}`"))
                    })?;
                    *spec.axis_mut(i) = values;
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("bad grid values `{s}`"));
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(bad());
        }
        return Ok(log_spaced(lo, hi, n));
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        for (i, name) in NAMES.iter().enumerate() {
            write!(f, "{name}={};", join(self.axis(i)))?;
        }
        write!(f, "steps={}", join(&self.refine_steps))
    }
}
