//! Physical parameters of the gas, the test particle and the collision
//! potential, plus the unit convention shared by every other module.
//!
//! All quantities are plain `f64` in a user-chosen unit system. Only ħ is
//! carried explicitly; masses, energies and momenta must be consistent with it.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Checked construction contract shared by the parameter types.
pub trait Validate {
    /// Reports the first violated invariant, naming the offending field.
    fn validate(&self) -> Result<()>;
}

fn positive_finite(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(invalid(field, format!("must be finite, got {value}")));
    }
    if value <= 0.0 {
        return Err(invalid(field, format!("must be > 0, got {value}")));
    }
    Ok(())
}

/// Ideal Maxwell-Boltzmann gas forming the medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasSpec {
    pub mass: f64,
    pub beta: f64,
    pub density: f64,
}

impl GasSpec {
    pub fn new(mass: f64, beta: f64, density: f64) -> Result<Self> {
        let gas = Self {
            mass,
            beta,
            density,
        };
        gas.validate()?;
        Ok(gas)
    }
}

impl Validate for GasSpec {
    fn validate(&self) -> Result<()> {
        positive_finite("mass_m", self.mass)?;
        positive_finite("inverse_temperature_beta", self.beta)?;
        positive_finite("number_density_n", self.density)
    }
}

/// The (heavy) test particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSpec {
    pub mass: f64,
}

impl ParticleSpec {
    pub fn new(mass: f64) -> Result<Self> {
        let p = Self { mass };
        p.validate()?;
        Ok(p)
    }

    /// Gas-to-particle mass ratio m/M; small values mean the Brownian regime.
    pub fn mass_ratio(&self, gas: &GasSpec) -> f64 {
        gas.mass / self.mass
    }
}

impl Validate for ParticleSpec {
    fn validate(&self) -> Result<()> {
        positive_finite("mass_M", self.mass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self { hbar: 1.0 }
    }
}

impl UnitSystem {
    pub fn new(hbar: f64) -> Result<Self> {
        let u = Self { hbar };
        u.validate()?;
        Ok(u)
    }

    /// (2πħ)³, the momentum-space volume per state.
    pub fn phase_space_cell(&self) -> f64 {
        (2.0 * PI * self.hbar).powi(3)
    }
}

impl Validate for UnitSystem {
    fn validate(&self) -> Result<()> {
        positive_finite("hbar", self.hbar)
    }
}

/// Samples of t̃(|q|), linearly interpolated and zero outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    q: Vec<f64>,
    t: Vec<f64>,
}

impl PotentialTable {
    pub fn new(q: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        let table = Self { q, t };
        table.validate()?;
        Ok(table)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.q
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }

    fn eval(&self, q: f64) -> f64 {
        let (first, last) = (self.q[0], self.q[self.q.len() - 1]);
        if q < first || q > last {
            return 0.0;
        }
        // index of the first node strictly greater than q
        let hi = self.q.partition_point(|&x| x <= q);
        if hi == self.q.len() {
            return self.t[self.t.len() - 1];
        }
        let lo = hi - 1;
        let w = (q - self.q[lo]) / (self.q[hi] - self.q[lo]);
        self.t[lo] + w * (self.t[hi] - self.t[lo])
    }
}

impl Validate for PotentialTable {
    fn validate(&self) -> Result<()> {
        if self.q.len() != self.t.len() {
            return Err(invalid(
                "potential.table",
                format!("{} nodes but {} values", self.q.len(), self.t.len()),
            ));
        }
        if self.q.len() < 2 {
            return Err(invalid("potential.table", "need at least two samples"));
        }
        if let Some(bad) = self.q.iter().find(|q| !q.is_finite() || **q < 0.0) {
            return Err(invalid(
                "potential.table",
                format!("momentum nodes must be finite and >= 0, got {bad}"),
            ));
        }
        if self.q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                "potential.table",
                "ordering: momentum nodes must be strictly increasing",
            ));
        }
        if let Some(bad) = self.t.iter().find(|t| !t.is_finite()) {
            return Err(invalid(
                "potential.table",
                format!("values must be finite, got {bad}"),
            ));
        }
        Ok(())
    }
}

/// Fourier transform t̃(q) of the isotropic collision potential.
///
/// The Gaussian form is `g exp(-q² r² / 2ħ²) / (2πħ)³`, i.e. the (2πħ)³
/// normalization of the momentum-space kernel is already included.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Gaussian { strength: f64, range: f64 },
    Tabulated(PotentialTable),
}

impl PotentialSpec {
    pub fn gaussian(strength: f64, range: f64) -> Result<Self> {
        let p = PotentialSpec::Gaussian { strength, range };
        p.validate()?;
        Ok(p)
    }

    pub fn tabulated(q: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        Ok(PotentialSpec::Tabulated(PotentialTable::new(q, t)?))
    }

    /// t̃(q) for a momentum magnitude `q >= 0`.
    pub fn ft(&self, q: f64, units: &UnitSystem) -> f64 {
        let q = q.abs();
        match self {
            PotentialSpec::Gaussian { strength, range } => {
                let x = q * range / units.hbar;
                strength * (-0.5 * x * x).exp() / units.phase_space_cell()
            }
            PotentialSpec::Tabulated(table) => table.eval(q),
        }
    }

    /// |t̃(q)|².
    pub fn ft_sq(&self, q: f64, units: &UnitSystem) -> f64 {
        let t = self.ft(q, units);
        t * t
    }

    /// True when t̃ vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Gaussian { strength, .. } => *strength == 0.0,
            PotentialSpec::Tabulated(table) => table.t.iter().all(|&t| t == 0.0),
        }
    }

    /// Momentum beyond which t̃ is exactly zero, if any.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            PotentialSpec::Gaussian { .. } => None,
            PotentialSpec::Tabulated(table) => table.q.last().copied(),
        }
    }

    /// Points where t̃ is not smooth; quadratures split their ranges there.
    pub fn kinks(&self) -> &[f64] {
        match self {
            PotentialSpec::Gaussian { .. } => &[],
            PotentialSpec::Tabulated(table) => &table.q,
        }
    }

    /// Momentum scale over which t̃ varies.
    pub fn momentum_scale(&self, units: &UnitSystem) -> Option<f64> {
        match self {
            PotentialSpec::Gaussian { range, .. } if *range > 0.0 => Some(units.hbar / range),
            PotentialSpec::Gaussian { .. } => None,
            PotentialSpec::Tabulated(table) => {
                let span = table.q[table.q.len() - 1] - table.q[0];
                Some(span / 4.0)
            }
        }
    }
}

impl Validate for PotentialSpec {
    fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Gaussian { strength, range } => {
                if !strength.is_finite() {
                    return Err(invalid("potential.g", "strength must be finite"));
                }
                if !range.is_finite() || *range < 0.0 {
                    return Err(invalid(
                        "potential.r",
                        format!("range must be finite and >= 0, got {range}"),
                    ));
                }
                Ok(())
            }
            PotentialSpec::Tabulated(table) => table.validate(),
        }
    }
}

/// Free function form of [`PotentialSpec::ft`].
pub fn potential_ft(spec: &PotentialSpec, q: f64, units: &UnitSystem) -> f64 {
    spec.ft(q, units)
}
