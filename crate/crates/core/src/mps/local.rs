//! Single-qubit objects: pure states and one-site reduced density matrices.

use std::f64::consts::LN_2;

use crate::error::{Result, TncsError};

/// Eigenvalues below this contribute nothing to `-λ ln λ`.
pub const EIGEN_CLIP: f64 = 1e-14;

/// Eigenvalue gaps below this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Eigenvector components below this are rounding residue.
pub const AMPLITUDE_SNAP: f64 = 1e-12;

const NORM_TOL: f64 = 1e-12;

/// A normalized real qubit state `a|0> + b|1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    amps: [f64; 2],
}

impl QubitState {
    pub const ZERO: QubitState = QubitState { amps: [1.0, 0.0] };
    pub const ONE: QubitState = QubitState { amps: [0.0, 1.0] };

    /// Builds a state from amplitudes that must already be normalized.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let norm2 = a * a + b * b;
        if !norm2.is_finite() || (norm2 - 1.0).abs() > NORM_TOL {
            return Err(TncsError::arg(format!(
                "qubit amplitudes ({a}, {b}) are not normalized"
            )));
        }
        Ok(QubitState { amps: [a, b] })
    }

    /// Builds a state by rescaling `(a, b)` to unit norm.
    pub fn normalized(a: f64, b: f64) -> Result<Self> {
        let norm = a.hypot(b);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(TncsError::arg("cannot normalize a zero qubit vector"));
        }
        Ok(QubitState {
            amps: [a / norm, b / norm],
        })
    }

    pub fn basis(bit: u8) -> Self {
        if bit == 0 {
            Self::ZERO
        } else {
            Self::ONE
        }
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.amps[0]
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.amps[1]
    }

    #[inline]
    pub fn amplitudes(&self) -> [f64; 2] {
        self.amps
    }

    pub fn overlap(&self, other: &QubitState) -> f64 {
        self.amps[0] * other.amps[0] + self.amps[1] * other.amps[1]
    }
}

/// A 2x2 real symmetric density matrix of one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix1 {
    m: [[f64; 2]; 2],
}

impl DensityMatrix1 {
    /// Symmetrizes and divides by the trace.
    pub fn from_unnormalized(m: [[f64; 2]; 2]) -> Result<Self> {
        let trace = m[0][0] + m[1][1];
        if !(trace > 0.0 && trace.is_finite()) {
            return Err(TncsError::Internal(format!(
                "reduced density matrix has trace {trace}"
            )));
        }
        let off = 0.5 * (m[0][1] + m[1][0]) / trace;
        Ok(DensityMatrix1 {
            m: [[m[0][0] / trace, off], [off, m[1][1] / trace]],
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[row][col]
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    /// `<x|rho|x>` for a basis bit.
    pub fn probability(&self, bit: u8) -> f64 {
        let i = usize::from(bit != 0);
        self.m[i][i]
    }

    fn gap(&self) -> f64 {
        let [[a, b], [_, d]] = self.m;
        (a - d).hypot(2.0 * b)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_trace = 0.5 * self.trace();
        let half_gap = 0.5 * self.gap();
        [half_trace + half_gap, half_trace - half_gap]
    }

    /// Eigenvector of the largest eigenvalue. A degenerate spectrum yields `|0>`.
    pub fn dominant_eigenstate(&self) -> QubitState {
        let gap = self.gap();
        if gap < DEGENERACY_TOL {
            return QubitState::ZERO;
        }
        let [[a, b], [_, d]] = self.m;
        let lambda = 0.5 * (a + d + gap);
        let (v0, v1) = if a >= d {
            (lambda - d, b)
        } else {
            (b, lambda - a)
        };
        let norm = v0.hypot(v1);
        let (mut v0, mut v1) = (v0 / norm, v1 / norm);
        // rounding residue must not turn a basis state into a gray pixel
        if v0.abs() < AMPLITUDE_SNAP {
            (v0, v1) = (0.0, v1.signum());
        } else if v1.abs() < AMPLITUDE_SNAP {
            (v0, v1) = (v0.signum(), 0.0);
        }
        if v0 < 0.0 || (v0 == 0.0 && v1 < 0.0) {
            v0 = -v0;
            v1 = -v1;
        }
        QubitState { amps: [v0, v1] }
    }

    /// Von Neumann entropy in nats, clipped to `[0, ln 2]`.
    pub fn entropy(&self) -> f64 {
        let s: f64 = self
            .eigenvalues()
            .iter()
            .filter(|&&l| l > EIGEN_CLIP)
            .map(|&l| -l * l.ln())
            .sum();
        if s > 0.0 {
            s.min(LN_2)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qubit_rejects_unnormalized() {
        assert!(QubitState::new(1.0, 1.0).is_err());
        assert!(QubitState::normalized(0.0, 0.0).is_err());
        let s = QubitState::normalized(3.0, 4.0).unwrap();
        assert_abs_diff_eq!(s.a(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn identity_half_is_degenerate() {
        let rho = DensityMatrix1::from_unnormalized([[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(rho.dominant_eigenstate(), QubitState::ZERO);
        assert_abs_diff_eq!(rho.entropy(), LN_2, epsilon = 1e-15);
    }

    #[test]
    fn diagonal_quarter_three_quarters() {
        let rho = DensityMatrix1::from_unnormalized([[0.25, 0.0], [0.0, 0.75]]).unwrap();
        assert_eq!(rho.dominant_eigenstate(), QubitState::ONE);
        let expected = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert_abs_diff_eq!(rho.entropy(), expected, epsilon = 1e-15);
    }

    #[test]
    fn dominant_eigenstate_of_pure_state() {
        let s = QubitState::normalized(0.3, -0.8).unwrap();
        let m = [
            [s.a() * s.a(), s.a() * s.b()],
            [s.b() * s.a(), s.b() * s.b()],
        ];
        let rho = DensityMatrix1::from_unnormalized(m).unwrap();
        let v = rho.dominant_eigenstate();
        assert_abs_diff_eq!(v.overlap(&s).abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.entropy(), 0.0, epsilon = 1e-12);
    }
}
