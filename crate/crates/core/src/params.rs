use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensionless parameters of the kicked oscillator.
///
/// `k` is the kick strength, `eta` the Lamb-Dicke parameter (the effective
/// Planck constant is `2·eta²` and is always derived, never stored),
/// `nu_tau` the harmonic rotation angle per kick and `tau` the kick period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub eta: f64,
    #[serde(default = "default_nu_tau")]
    pub nu_tau: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_nu_tau() -> f64 {
    PI / 3.0
}

fn default_tau() -> f64 {
    1.0
}

impl SystemParams {
    /// Kick strength `k` and Lamb-Dicke parameter `eta` with the stochastic-web
    /// rotation `ντ = π/3` and unit period.
    pub fn new(k: f64, eta: f64) -> Self {
        SystemParams {
            k,
            eta,
            nu_tau: default_nu_tau(),
            tau: default_tau(),
        }
    }

    pub fn with_rotation(mut self, nu_tau: f64) -> Self {
        self.nu_tau = nu_tau;
        self
    }

    pub fn hbar_eff(&self) -> f64 {
        2.0 * self.eta * self.eta
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!("K = {} must be >= 0", self.k)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta = {} must be > 0", self.eta)));
        }
        if !self.nu_tau.is_finite() {
            return Err(Error::InvalidParameter("nu_tau must be finite".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau = {} must be > 0", self.tau)));
        }
        Ok(())
    }

    /// Additionally requires `eta < 1`, the semiclassical regime.
    pub fn validate_semiclassical(&self) -> Result<()> {
        self.validate()?;
        if self.eta >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "eta = {} is not semiclassical (needs eta < 1)",
                self.eta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hbar_is_derived() {
        let p = SystemParams::new(2.0, 0.3);
        assert!((p.hbar_eff() - 0.18).abs() < 1e-15);
        assert!((p.nu_tau - PI / 3.0).abs() < 1e-15);
        assert_eq!(p.tau, 1.0);
    }

    #[test]
    fn validation() {
        assert!(SystemParams::new(2.0, 0.3).validate_semiclassical().is_ok());
        assert!(SystemParams::new(2.0, 1.5).validate().is_ok());
        assert!(SystemParams::new(2.0, 1.5).validate_semiclassical().is_err());
        assert!(SystemParams::new(-1.0, 0.3).validate().is_err());
        assert!(SystemParams::new(1.0, 0.0).validate().is_err());
    }

    #[test]
    fn deserializes_with_defaults() {
        let p: SystemParams = toml::from_str("K = 2.0\neta = 0.04").unwrap();
        assert_eq!(p, SystemParams::new(2.0, 0.04));
    }
}
