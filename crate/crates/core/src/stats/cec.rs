//! Fixed-coefficient residential electricity baseline (natural logs).
//!
//! Only these seven terms are implemented. The full model has further
//! variables whose coefficients are unavailable, so this evaluator is partial.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONSTANT: f64 = 7.1881;
pub const LN_PPH: f64 = 0.3935;
pub const LN_PCI: f64 = 0.1419;
pub const UNEMP_RATE: f64 = -0.0042;
pub const RES_ELEC_RATE: f64 = -0.0870;
pub const LN_COOL_DAYS: f64 = 0.0323;
pub const LN_HEAT_DAYS: f64 = 0.0181;
pub const LADWP: f64 = -0.5784;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CecCovariates {
    /// Persons per household.
    pub pph: f64,
    /// Per-capita income, $/person.
    pub pci: f64,
    /// Unemployment rate, percent.
    pub unemp_rate: f64,
    /// Residential electricity rate, cents/kWh.
    pub res_elec_rate: f64,
    /// Cooling degree days.
    pub cool_days: f64,
    /// Heating degree days.
    pub heat_days: f64,
    /// 1 inside the LADWP planning area, else 0.
    pub ladwp: u8,
}

impl CecCovariates {
    /// Persons per household from the two income measures.
    pub fn pph_from_income(phi: f64, pci: f64) -> f64 {
        phi / pci
    }
}

/// Natural-log household consumption predicted by the baseline.
pub fn cec_model_eval(c: &CecCovariates) -> Result<f64> {
    for (name, v) in [
        ("pph", c.pph),
        ("pci", c.pci),
        ("cool_days", c.cool_days),
        ("heat_days", c.heat_days),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DomainViolation {
                row: 0,
                detail: format!("{name} must be positive, got {v}"),
            });
        }
    }
    if c.ladwp > 1 {
        return Err(Error::DomainViolation {
            row: 0,
            detail: format!("ladwp indicator must be 0 or 1, got {}", c.ladwp),
        });
    }
    Ok(CONSTANT
        + LN_PPH * c.pph.ln()
        + LN_PCI * c.pci.ln()
        + UNEMP_RATE * c.unemp_rate
        + RES_ELEC_RATE * c.res_elec_rate
        + LN_COOL_DAYS * c.cool_days.ln()
        + LN_HEAT_DAYS * c.heat_days.ln()
        + LADWP * f64::from(c.ladwp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> CecCovariates {
        CecCovariates {
            pph: 1.0,
            pci: 1.0,
            unemp_rate: 0.0,
            res_elec_rate: 0.0,
            cool_days: 1.0,
            heat_days: 1.0,
            ladwp: 0,
        }
    }

    #[test]
    fn log_terms_vanish_at_one() {
        assert_eq!(cec_model_eval(&unit()).unwrap(), 7.1881);
    }

    #[test]
    fn ladwp_offset() {
        let base = cec_model_eval(&unit()).unwrap();
        let la = cec_model_eval(&CecCovariates { ladwp: 1, ..unit() }).unwrap();
        assert!((la - base + 0.5784).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_point() {
        // 7.1881 + 0.3935 ln 3 + 0.1419 ln 30000 - 0.0042*5 - 0.0870*15
        //   + 0.0323 ln 1000 + 0.0181 ln 500 - 0.5784
        let c = CecCovariates {
            pph: 3.0,
            pci: 30000.0,
            unemp_rate: 5.0,
            res_elec_rate: 15.0,
            cool_days: 1000.0,
            heat_days: 500.0,
            ladwp: 1,
        };
        assert!((cec_model_eval(&c).unwrap() - 7.514_449_220_228_892).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_logged_inputs() {
        assert!(cec_model_eval(&CecCovariates { pph: 0.0, ..unit() }).is_err());
        assert!(cec_model_eval(&CecCovariates { heat_days: -3.0, ..unit() }).is_err());
        assert!(cec_model_eval(&CecCovariates { ladwp: 2, ..unit() }).is_err());
        // unemployment is not logged
        assert!(cec_model_eval(&CecCovariates { unemp_rate: -1.0, ..unit() }).is_ok());
    }
}
