use super::SseModel;
use crate::algebra::{paulis, ComplexMatrix, StateVector};
use crate::error::{Error, Result};
use crate::master::{MasterGenerator, RateVector};
use crate::param::{map_noise_unchecked, NoiseMatrix};
use crate::C64;

const HAMILTONIAN_TOL: f64 = 1e-12;

/// General diffusive SSE
///
/// `dψ = [-iH dt + Σₖ Σⱼ uₖⱼ (Lⱼ - ⟨Lⱼ⟩) dWₖ
///        - ½ Σⱼ (Lⱼ†Lⱼ - 2⟨Lⱼ⟩* Lⱼ + |⟨Lⱼ⟩|²) dt] ψ`
///
/// with `N` real noises `dWₖ` and an isometric `N×n` noise matrix `u`. The
/// ensemble average obeys the Lindblad equation with operators `Lⱼ`.
#[derive(Clone, Debug)]
pub struct GeneralDiffusiveModel {
    hamiltonian: ComplexMatrix,
    lindblads: Vec<ComplexMatrix>,
    lindblad_squares: Vec<ComplexMatrix>,
    noise: NoiseMatrix,
}

impl GeneralDiffusiveModel {
    pub fn new(
        hamiltonian: ComplexMatrix,
        lindblads: Vec<ComplexMatrix>,
        noise: NoiseMatrix,
    ) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::Dimension("Hamiltonian must be square".into()));
        }
        let d = hamiltonian.rows();
        let herm = hamiltonian.hermitian_defect();
        if herm > HAMILTONIAN_TOL {
            return Err(Error::Validation(format!(
                "Hamiltonian not Hermitian: {herm:.3e}"
            )));
        }
        if lindblads.iter().any(|l| l.rows() != d || l.cols() != d) {
            return Err(Error::Dimension(format!(
                "all Lindblad operators must be {d}x{d}"
            )));
        }
        if lindblads.len() != noise.channel_count() {
            return Err(Error::Dimension(format!(
                "{} Lindblad operators but noise matrix has n = {}",
                lindblads.len(),
                noise.channel_count()
            )));
        }
        let lindblad_squares = lindblads.iter().map(|l| &l.adjoint() * l).collect();
        Ok(Self {
            hamiltonian,
            lindblads,
            lindblad_squares,
            noise,
        })
    }

    /// `H = 0`, `Lₖ = √cₖ σₖ`, `u = I₃`; requires non-negative rates.
    pub fn pauli(rates: RateVector) -> Result<Self> {
        if rates.0.iter().any(|&c| c < 0.0) {
            return Err(Error::Validation(format!(
                "Lindblad operators √cₖ σₖ need cₖ >= 0, got {:?}",
                rates.0
            )));
        }
        let lindblads = paulis()
            .into_iter()
            .zip(rates.0)
            .map(|(s, c)| s.scale_real(c.sqrt()))
            .collect();
        Self::new(ComplexMatrix::zeros(2, 2), lindblads, NoiseMatrix::identity(3))
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn lindblads(&self) -> &[ComplexMatrix] {
        &self.lindblads
    }

    pub fn noise_matrix(&self) -> &NoiseMatrix {
        &self.noise
    }

    /// The Lindblad generator this SSE unravels.
    pub fn master_generator(&self) -> Result<MasterGenerator> {
        MasterGenerator::lindblad(self.hamiltonian.clone(), &self.lindblads)
    }
}

impl SseModel for GeneralDiffusiveModel {
    fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    fn noise_channels(&self) -> usize {
        self.noise.noise_count()
    }

    fn advance(&self, psi: &StateVector, dw: &[f64], dt: f64) -> Result<StateVector> {
        general_increment(psi, self, dw, dt)
    }
}

/// `ψ + dψ` for the general diffusive SSE, coefficients at `ψ` (Itô).
pub fn general_increment(
    psi: &StateVector,
    m: &GeneralDiffusiveModel,
    dw: &[f64],
    dt: f64,
) -> Result<StateVector> {
    let d = m.hamiltonian.rows();
    if psi.dim() != d {
        return Err(Error::Dimension(format!(
            "state has dimension {}, model has {d}",
            psi.dim()
        )));
    }
    if dw.len() != m.noise.noise_count() {
        return Err(Error::Dimension(format!(
            "got {} noise increments, model has N = {}",
            dw.len(),
            m.noise.noise_count()
        )));
    }
    let a = psi.amplitudes();
    let xi_star = map_noise_unchecked(m.noise.matrix(), dw);

    let h_psi = m.hamiltonian.mul_vec_unchecked(a);
    let mut next: Vec<C64> = a
        .iter()
        .zip(&h_psi)
        .map(|(x, hx)| x - C64::new(0.0, dt) * hx)
        .collect();

    for (j, l) in m.lindblads.iter().enumerate() {
        let l_psi = l.mul_vec_unchecked(a);
        let ll_psi = m.lindblad_squares[j].mul_vec_unchecked(a);
        let mean: C64 = a.iter().zip(&l_psi).map(|(x, y)| x.conj() * y).sum();
        let half_dt = 0.5 * dt;
        for r in 0..d {
            let centred = l_psi[r] - mean * a[r];
            let drift = ll_psi[r] - mean.conj() * l_psi[r] * 2.0 + a[r] * mean.norm_sqr();
            next[r] += xi_star[j] * centred - drift * half_dt;
        }
    }
    StateVector::new(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::pauli;

    #[test]
    fn eigenstate_of_single_lindblad_is_frozen() {
        let c: f64 = 0.8;
        let m = GeneralDiffusiveModel::new(
            ComplexMatrix::zeros(2, 2),
            vec![pauli(3).unwrap().scale_real(c.sqrt())],
            NoiseMatrix::identity(1),
        )
        .unwrap();
        let psi = StateVector::basis(2, 0);
        let next = general_increment(&psi, &m, &[0.4], 1e-2).unwrap();
        assert!(next.max_abs_diff(&psi) < 1e-15);
    }

    #[test]
    fn closed_system_limit() {
        let m = GeneralDiffusiveModel::new(
            pauli(3).unwrap(),
            vec![ComplexMatrix::zeros(2, 2)],
            NoiseMatrix::identity(1),
        )
        .unwrap();
        let psi = StateVector::plus();
        let dt = 1e-3;
        let next = general_increment(&psi, &m, &[0.0], dt).unwrap();
        let want = psi.add_scaled(&psi.apply(&pauli(3).unwrap()).unwrap(), C64::new(0.0, -dt));
        assert!(next.max_abs_diff(&want) < 1e-16);
    }

    #[test]
    fn shape_checks() {
        let h = ComplexMatrix::zeros(2, 2);
        assert!(GeneralDiffusiveModel::new(h.clone(), vec![pauli(1).unwrap()], NoiseMatrix::identity(2))
            .is_err());
        assert!(GeneralDiffusiveModel::new(
            h.clone(),
            vec![ComplexMatrix::identity(3)],
            NoiseMatrix::identity(1)
        )
        .is_err());
        let bad_h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(GeneralDiffusiveModel::new(bad_h, vec![], NoiseMatrix::identity(0)).is_err());
        let m = GeneralDiffusiveModel::pauli(RateVector::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(general_increment(&StateVector::plus(), &m, &[0.0; 2], 1e-3).is_err());
        assert!(general_increment(&StateVector::basis(3, 0), &m, &[0.0; 3], 1e-3).is_err());
        assert!(GeneralDiffusiveModel::pauli(RateVector::NON_CP).is_err());
    }

    #[test]
    fn noise_enters_through_u_transpose() {
        // Two noises, one channel: u = (p, iq)ᵀ mixes them as p dW₁ + iq dW₂.
        let (p, q) = (0.8f64, 0.6f64);
        let u = NoiseMatrix::new(
            ComplexMatrix::from_vec(2, 1, vec![C64::new(p, 0.0), C64::new(0.0, q)]).unwrap(),
        )
        .unwrap();
        let l = pauli(1).unwrap();
        let m = GeneralDiffusiveModel::new(ComplexMatrix::zeros(2, 2), vec![l.clone()], u).unwrap();
        let psi = StateVector::basis(2, 0);
        let dw = [0.01, -0.02];
        let next = general_increment(&psi, &m, &dw, 0.0).unwrap();
        let xi = C64::new(p * dw[0], q * dw[1]);
        let want = psi.add_scaled(&psi.apply(&l).unwrap(), xi);
        assert!(next.max_abs_diff(&want) < 1e-16);
    }
}
