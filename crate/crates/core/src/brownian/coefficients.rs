//! Diffusion coefficients of the Brownian-limit master equation and the
//! thermal minimum-uncertainty spreads that fix them.

use crate::error::{invalid, Result};
use crate::physics::{UnitSystem, Validate};

/// Thermal momentum and position spreads of a particle of mass M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalSpreads {
    /// √(M/β)
    pub dp_th: f64,
    /// ħ√(β/4M), stored as ħ/(2 dp_th)
    pub dx_th: f64,
}

impl ThermalSpreads {
    pub fn new(mass: f64, beta: f64, units: &UnitSystem) -> Result<Self> {
        positive("particle_mass_M", mass)?;
        positive("inverse_temperature_beta", beta)?;
        units.validate()?;
        let dp_th = (mass / beta).sqrt();
        Ok(Self {
            dp_th,
            dx_th: units.hbar / (2.0 * dp_th),
        })
    }

    pub fn uncertainty_product(&self) -> f64 {
        self.dp_th * self.dx_th
    }
}

/// η, D_pp and D_xx of the diffusive master equation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Coefficients {
    pub eta: f64,
    /// Mη/β
    pub d_pp: f64,
    /// βħ²η/(16M)
    pub d_xx: f64,
}

impl Coefficients {
    pub fn new(eta: f64, mass: f64, beta: f64, units: &UnitSystem) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(invalid("eta", format!("must be finite and >= 0, got {eta}")));
        }
        let spreads = ThermalSpreads::new(mass, beta, units)?;
        Ok(Self::from_spreads(eta, &spreads))
    }

    /// D_pp = η dp_th², D_xx = (η/4) dx_th².
    pub fn from_spreads(eta: f64, spreads: &ThermalSpreads) -> Self {
        Self {
            eta,
            d_pp: eta * spreads.dp_th * spreads.dp_th,
            d_xx: 0.25 * eta * spreads.dx_th * spreads.dx_th,
        }
    }

    /// |D_pp D_xx − (ħη/4)²| relative to (ħη/4)² (zero when η = 0).
    pub fn minimal_invasiveness_residual(&self, units: &UnitSystem) -> f64 {
        let target = (units.hbar * self.eta / 4.0).powi(2);
        if target == 0.0 {
            return (self.d_pp * self.d_xx).abs();
        }
        (self.d_pp * self.d_xx - target).abs() / target
    }
}

pub fn coefficients(eta: f64, mass: f64, beta: f64, units: &UnitSystem) -> Result<Coefficients> {
    Coefficients::new(eta, mass, beta, units)
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}
