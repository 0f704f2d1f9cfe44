use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Masses `m_1 > ... > m_N`, total energy and the quantities derived from them.
///
/// Balls are stored bottom to top: index 0 is the ball touching the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MassConfigSpec", into = "MassConfigSpec")]
pub struct MassConfig {
    masses: Vec<f64>,
    gammas: Vec<f64>,
    tail_sums: Vec<f64>,
    energy: f64,
    v_max: f64,
}

#[derive(Serialize, Deserialize)]
struct MassConfigSpec {
    masses: Vec<f64>,
    energy: f64,
}

impl TryFrom<MassConfigSpec> for MassConfig {
    type Error = Error;
    fn try_from(spec: MassConfigSpec) -> Result<Self> {
        MassConfig::new(&spec.masses, spec.energy)
    }
}

impl From<MassConfig> for MassConfigSpec {
    fn from(cfg: MassConfig) -> Self {
        MassConfigSpec {
            masses: cfg.masses,
            energy: cfg.energy,
        }
    }
}

impl MassConfig {
    pub fn new(masses: &[f64], energy: f64) -> Result<Self> {
        if masses.len() < 2 {
            return Err(Error::TooFewBalls(masses.len()));
        }
        for (index, &value) in masses.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveMass { index, value });
            }
        }
        for (index, w) in masses.windows(2).enumerate() {
            if !(w[0] > w[1]) {
                return Err(Error::NonDecreasingMasses {
                    index: index + 1,
                    upper: w[0],
                    lower: w[1],
                });
            }
        }
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::NonPositiveEnergy(energy));
        }
        let gammas = masses
            .windows(2)
            .map(|w| (w[0] - w[1]) / (w[0] + w[1]))
            .collect();
        let mut tail_sums = vec![0.0; masses.len()];
        let mut acc = 0.0;
        for i in (0..masses.len()).rev() {
            acc += masses[i];
            tail_sums[i] = acc;
        }
        let m_top = masses[masses.len() - 1];
        Ok(MassConfig {
            masses: masses.to_vec(),
            gammas,
            tail_sums,
            energy,
            v_max: (2.0 * energy / m_top).sqrt(),
        })
    }

    /// Same masses, different energy.
    pub fn with_energy(&self, energy: f64) -> Result<Self> {
        MassConfig::new(&self.masses, energy)
    }

    pub fn n(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, ball: usize) -> f64 {
        self.masses[ball]
    }

    /// `gamma(i)` for the pair `(i, i+1)` in 1-based pair numbering.
    pub fn gamma(&self, pair: usize) -> f64 {
        self.gammas[pair - 1]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// `M_i = m_i + ... + m_N`, 0-based.
    pub fn tail_sums(&self) -> &[f64] {
        &self.tail_sums
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Coefficient `alpha_i` of the pair derivative for a pre-collision
    /// velocity gap `v_i - v_{i+1}`.
    pub fn alpha(&self, pair: usize, gap: f64) -> f64 {
        let (mi, mj) = (self.masses[pair - 1], self.masses[pair]);
        let s = mi + mj;
        2.0 * mi * mj * (mi - mj) * gap / (s * s)
    }

    /// Coefficient `beta` of the floor derivative for the pre-collision velocity `v_1`.
    pub fn beta(&self, v1_pre: f64) -> f64 {
        -2.0 / (self.masses[0] * v1_pre)
    }
}
