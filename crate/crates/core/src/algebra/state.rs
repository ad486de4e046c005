use std::f64::consts::FRAC_1_SQRT_2;

use super::ComplexMatrix;
use crate::error::{Error, Result};
use crate::rng::NormalStream;
use crate::C64;

/// Tolerance on `|‖ψ‖² - 1|` for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Complex state vector ψ.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps amplitudes as-is; no normalization is applied.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Dimension("state vector must be non-empty".into()));
        }
        Ok(Self { amps })
    }

    /// Wraps amplitudes, rejecting vectors that are not unit norm.
    pub fn normalized_from(amps: Vec<C64>) -> Result<Self> {
        let s = Self::new(amps)?;
        s.check_normalized()?;
        Ok(s)
    }

    pub fn basis(d: usize, k: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); d];
        amps[k] = C64::new(1.0, 0.0);
        Self { amps }
    }

    /// `(|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Self {
        Self {
            amps: vec![C64::new(FRAC_1_SQRT_2, 0.0); 2],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let defect = (self.norm_sqr() - 1.0).abs();
        if defect > NORM_TOLERANCE {
            return Err(Error::Validation(format!(
                "state not normalized: |‖ψ‖² - 1| = {defect:.3e}"
            )));
        }
        Ok(())
    }

    pub fn normalize(&self) -> Self {
        let inv = 1.0 / self.norm_sqr().sqrt();
        self.scale(C64::new(inv, 0.0))
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            amps: self.amps.iter().map(|z| z * factor).collect(),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        let applied = op.mul_vec(&self.amps)?;
        Ok(self.amps.iter().zip(&applied).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amps, &self.amps)
    }

    pub fn apply(&self, op: &ComplexMatrix) -> Result<Self> {
        Ok(Self {
            amps: op.mul_vec(&self.amps)?,
        })
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Self, factor: C64) -> Self {
        Self {
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b * factor)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Real Bloch vector `n` with `ρ = (I + n·σ)/2`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlochVector(pub [f64; 3]);

impl BlochVector {
    pub const NORTH: Self = Self([0.0, 0.0, 1.0]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `(I + n·σ)/2`.
    pub fn to_matrix(&self) -> ComplexMatrix {
        let [x, y, z] = self.0;
        ComplexMatrix::from_vec(
            2,
            2,
            vec![
                C64::new((1.0 + z) / 2.0, 0.0),
                C64::new(x / 2.0, -y / 2.0),
                C64::new(x / 2.0, y / 2.0),
                C64::new((1.0 - z) / 2.0, 0.0),
            ],
        )
        .expect("2x2 shape")
    }

    /// Bloch components `tr(σₖ A)` of a 2×2 operator (real parts).
    pub fn from_matrix(a: &ComplexMatrix) -> Result<Self> {
        if a.rows() != 2 || a.cols() != 2 {
            return Err(Error::Dimension(format!(
                "Bloch vector needs a 2x2 operator, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let x = (a[(0, 1)] + a[(1, 0)]).re;
        let y = (a[(1, 0)] - a[(0, 1)]).im;
        let z = (a[(0, 0)] - a[(1, 1)]).re;
        Ok(Self([x, y, z]))
    }
}

/// Pauli matrix σₖ for `k ∈ {1, 2, 3}`.
pub fn pauli(k: usize) -> Result<ComplexMatrix> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let data = match k {
        1 => vec![z, one, one, z],
        2 => vec![z, -i, i, z],
        3 => vec![one, z, z, -one],
        _ => {
            return Err(Error::Usage(format!(
                "Pauli index must be 1, 2 or 3, got {k}"
            )))
        }
    };
    ComplexMatrix::from_vec(2, 2, data)
}

/// All three Pauli matrices, `[σ₁, σ₂, σ₃]`.
pub fn paulis() -> [ComplexMatrix; 3] {
    [1, 2, 3].map(|k| pauli(k).expect("valid index"))
}

/// `nₖ = ⟨ψ|σₖ|ψ⟩` for a normalized qubit state.
pub fn bloch_from_state(psi: &StateVector) -> Result<BlochVector> {
    if psi.dim() != 2 {
        return Err(Error::Dimension(format!(
            "Bloch vector requires a qubit state, got dimension {}",
            psi.dim()
        )));
    }
    psi.check_normalized()?;
    Ok(bloch_unchecked(psi.amplitudes()))
}

#[inline]
pub(crate) fn bloch_unchecked(a: &[C64]) -> BlochVector {
    let cross = a[0].conj() * a[1];
    BlochVector([
        2.0 * cross.re,
        2.0 * cross.im,
        a[0].norm_sqr() - a[1].norm_sqr(),
    ])
}

/// A pure state with Bloch vector `n / ‖n‖`, with the first amplitude real and
/// non-negative.
pub fn state_from_bloch(n: &BlochVector) -> Result<StateVector> {
    let r = n.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Validation(
            "cannot build a pure state from a zero Bloch vector".into(),
        ));
    }
    let [x, y, z] = n.0.map(|c| c / r);
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    let (s, c) = (theta / 2.0).sin_cos();
    StateVector::new(vec![C64::new(c, 0.0), C64::from_polar(s, phi)])
}

/// Haar-random pure state of dimension `d`, drawn from `stream` at positions
/// `[2·d·index, 2·d·(index+1))`.
///
/// Each amplitude is a standard complex Gaussian and the vector is then
/// normalized; the result depends only on the stream key and `index`.
pub fn random_state(stream: &mut NormalStream, index: u64, d: usize) -> Result<StateVector> {
    if d < 2 {
        return Err(Error::Dimension(format!(
            "random states need d >= 2, got {d}"
        )));
    }
    stream.seek(2 * d as u64 * index);
    let amps: Vec<C64> = (0..d)
        .map(|_| {
            let re = stream.next_normal();
            let im = stream.next_normal();
            C64::new(re, im)
        })
        .collect();
    Ok(StateVector { amps }.normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn pauli_z_and_involution() {
        let z = pauli(3).unwrap();
        assert_eq!(
            z,
            ComplexMatrix::diagonal(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])
        );
        let x = pauli(1).unwrap();
        assert_eq!(&x * &x, ComplexMatrix::identity(2));
        assert!(matches!(pauli(0), Err(Error::Usage(_))));
        assert!(matches!(pauli(4), Err(Error::Usage(_))));
    }

    #[test]
    fn pauli_commutator() {
        let [x, y, z] = paulis();
        let comm = x.commutator(&y);
        assert_eq!(comm, z.scale(C64::new(0.0, 2.0)));
    }

    #[test]
    fn pauli_anticommutation() {
        let s = paulis();
        for j in 0..3 {
            for k in 0..3 {
                let anti = s[j].anticommutator(&s[k]);
                let expected = if j == k {
                    ComplexMatrix::identity(2).scale_real(2.0)
                } else {
                    ComplexMatrix::zeros(2, 2)
                };
                assert!(anti.max_abs_diff(&expected) <= 1e-15);
            }
            assert!(s[j].trace().norm() == 0.0);
            assert_eq!(s[j].hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn bloch_of_reference_states() {
        let h = FRAC_1_SQRT_2;
        let cases = [
            (vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [0.0, 0.0, 1.0]),
            (vec![C64::new(h, 0.0), C64::new(h, 0.0)], [1.0, 0.0, 0.0]),
            (vec![C64::new(h, 0.0), C64::new(0.0, h)], [0.0, 1.0, 0.0]),
        ];
        for (amps, expected) in cases {
            let n = bloch_from_state(&StateVector::new(amps).unwrap()).unwrap();
            assert!(n.max_abs_diff(&BlochVector(expected)) < 1e-15, "{n:?}");
        }
    }

    #[test]
    fn bloch_rejects_wrong_dimension() {
        let psi = StateVector::basis(3, 0);
        assert!(matches!(bloch_from_state(&psi), Err(Error::Dimension(_))));
    }

    #[test]
    fn bloch_matches_pauli_expectations() {
        let mut stream = CounterRng::new(11).stream(0);
        let s = paulis();
        for i in 0..50 {
            let psi = random_state(&mut stream, i, 2).unwrap();
            let n = bloch_from_state(&psi).unwrap();
            for k in 0..3 {
                let e = psi.expectation(&s[k]).unwrap();
                assert!((e.re - n.0[k]).abs() < 1e-14 && e.im.abs() < 1e-14);
            }
            assert!((n.norm() - 1.0).abs() < 1e-12);
            let back = BlochVector::from_matrix(&psi.projector()).unwrap();
            assert!(back.max_abs_diff(&n) < 1e-14);
        }
    }

    #[test]
    fn bloch_state_round_trip() {
        let mut stream = CounterRng::new(5).stream(1);
        for i in 0..200 {
            let psi = random_state(&mut stream, i, 2).unwrap();
            let n = bloch_from_state(&psi).unwrap();
            let back = bloch_from_state(&state_from_bloch(&n).unwrap()).unwrap();
            assert!(back.max_abs_diff(&n) <= 1e-12);
        }
        for n in [BlochVector::NORTH, BlochVector::new(0.0, 0.0, -1.0)] {
            let back = bloch_from_state(&state_from_bloch(&n).unwrap()).unwrap();
            assert!(back.max_abs_diff(&n) <= 1e-12);
        }
    }

    #[test]
    fn random_state_contract() {
        let rng = CounterRng::new(2024);
        let a = random_state(&mut rng.stream(3), 17, 4).unwrap();
        let b = random_state(&mut rng.stream(3), 17, 4).unwrap();
        assert_eq!(a, b);
        assert!((a.norm_sqr() - 1.0).abs() <= 1e-14);
        assert!(random_state(&mut rng.stream(3), 0, 1).is_err());
    }

    #[test]
    fn haar_mean_bloch_vector_is_small() {
        let mut stream = CounterRng::new(99).stream(0);
        let n = 10_000u64;
        let mut mean = [0.0; 3];
        for i in 0..n {
            let b = bloch_from_state(&random_state(&mut stream, i, 2).unwrap()).unwrap();
            for k in 0..3 {
                mean[k] += b.0[k] / n as f64;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= 0.04, "mean Bloch norm {norm}");
    }
}
