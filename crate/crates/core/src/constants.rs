//! CODATA-2018 constants (exact SI definitions for `e` and `h`).

use serde::{Deserialize, Serialize};

/// The three constants entering the Simmons prefactor and decay constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Elementary charge, C.
    pub e: f64,
    /// Planck constant, J s.
    pub h: f64,
    /// Electron rest mass, kg.
    pub m_e: f64,
}

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    e: ELEMENTARY_CHARGE,
    h: PLANCK,
    m_e: ELECTRON_MASS,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA_2018
    }
}

impl PhysicalConstants {
    /// `e^2 / (2 pi h)` in siemens. Multiplied by the dimensionless `A / t^2`
    /// and a bracket in volts this yields amperes.
    pub fn current_prefactor(&self) -> f64 {
        (self.e / self.h) * self.e / (2.0 * std::f64::consts::PI)
    }

    /// Decay coefficient per nm of thickness per sqrt(volt):
    /// `K / (t sqrt(V)) = 4 pi sqrt(2 m_e e) / h`, expressed for `t` in nm.
    pub fn decay_per_nm(&self) -> f64 {
        4.0 * std::f64::consts::PI * (2.0 * self.m_e * self.e).sqrt() / self.h * 1e-9
    }
}
