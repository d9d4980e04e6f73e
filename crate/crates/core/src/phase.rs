use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One conductor of a three-phase feeder. Ordered `A < B < C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Phase> {
        Phase::ALL.get(i).copied()
    }

    /// Nominal phasor angle of a positive-sequence set, in radians.
    pub fn nominal_angle(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * std::f64::consts::FRAC_PI_3,
            Phase::C => 2.0 * std::f64::consts::FRAC_PI_3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Phase::A),
            "b" => Ok(Phase::B),
            "c" => Ok(Phase::C),
            other => Err(format!("unknown phase '{other}'")),
        }
    }
}

/// Per-phase values for a bus or branch, indexed by [`Phase::index`].
pub type PerPhase<T> = [T; 3];

/// 3×3 series impedance of a line section (per unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseImpedance(pub [[Complex64; 3]; 3]);

impl PhaseImpedance {
    pub fn zero() -> Self {
        PhaseImpedance([[Complex64::new(0.0, 0.0); 3]; 3])
    }

    pub fn diagonal(z: PerPhase<Complex64>) -> Self {
        let mut m = Self::zero();
        for (i, zi) in z.into_iter().enumerate() {
            m.0[i][i] = zi;
        }
        m
    }

    /// Symmetric matrix with the given self impedances and one shared mutual term
    /// between every pair of phases.
    pub fn transposed(self_z: PerPhase<Complex64>, mutual: Complex64) -> Self {
        let mut m = Self::diagonal(self_z);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    m.0[i][j] = mutual;
                }
            }
        }
        m
    }

    pub fn get(&self, row: Phase, col: Phase) -> Complex64 {
        self.0[row.index()][col.index()]
    }

    pub fn self_impedance(&self, phase: Phase) -> Complex64 {
        self.get(phase, phase)
    }

    /// A phase is carried by the section when its self impedance is nonzero.
    pub fn has_phase(&self, phase: Phase) -> bool {
        let z = self.self_impedance(phase);
        z.re != 0.0 || z.im != 0.0
    }

    pub fn phases(&self) -> PerPhase<bool> {
        Phase::ALL.map(|p| self.has_phase(p))
    }

    /// Off-diagonal entries `(ab, ac, bc)`.
    pub fn mutuals(&self) -> [Complex64; 3] {
        [self.0[0][1], self.0[0][2], self.0[1][2]]
    }

    /// Largest elementwise asymmetry `|z_ij − z_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).norm());
            }
        }
        worst
    }

    /// `z · i` for a three-phase current vector.
    pub fn mul(&self, current: &PerPhase<Complex64>) -> PerPhase<Complex64> {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (row, o) in self.0.iter().zip(out.iter_mut()) {
            *o = row[0] * current[0] + row[1] * current[1] + row[2] * current[2];
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        PhaseImpedance(self.0.map(|row| row.map(|z| z * factor)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_order_and_parse() {
        assert!(Phase::A < Phase::B && Phase::B < Phase::C);
        assert_eq!("B".parse::<Phase>().unwrap(), Phase::B);
        assert!("d".parse::<Phase>().is_err());
        for p in Phase::ALL {
            assert_eq!(Phase::from_index(p.index()), Some(p));
        }
    }

    #[test]
    fn transposed_matrix_is_symmetric() {
        let zs = Complex64::new(0.03, 0.06);
        let zm = Complex64::new(0.01, 0.02);
        let z = PhaseImpedance::transposed([zs; 3], zm);
        assert_eq!(z.asymmetry(), 0.0);
        assert_eq!(z.mutuals(), [zm; 3]);
        let i = [Complex64::new(1.0, 0.0); 3];
        assert_eq!(z.mul(&i)[0], zs + zm * 2.0);
    }
}
