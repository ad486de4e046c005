use std::f64::consts::SQRT_2;

use super::SseModel;
use crate::algebra::{bloch_from_state, bloch_unchecked, paulis, ComplexMatrix, StateVector};
use crate::error::{Error, Result};
use crate::master::RateVector;
use crate::C64;

/// Below this value of `1 - n₃²` the orthogonal complement falls back to
/// `(-ψ̄₂, ψ̄₁)`.
pub const DEFAULT_POLE_TOL: f64 = 1e-12;

/// Qubit SSE
///
/// `dψ = -½ Σₖ cₖ (σₖ - nₖ)² ψ dt + √2 n₃ ψ⊥ dW`, `nₖ = ⟨ψ|σₖ|ψ⟩`,
///
/// whose ensemble average obeys `dρ/dt = Σₖ cₖ (σₖ ρ σₖ - ρ)` when
/// `c = (1, 1, -1)`.
#[derive(Clone, Debug)]
pub struct NonCpQubitModel {
    pub rates: RateVector,
    pub pole_tolerance: f64,
    /// Constant phase `α` applied to the complement, `ψ⊥ → e^{iα} ψ⊥`.
    pub perp_phase: f64,
}

impl NonCpQubitModel {
    pub fn new(rates: RateVector) -> Self {
        Self {
            rates,
            pole_tolerance: DEFAULT_POLE_TOL,
            perp_phase: 0.0,
        }
    }

    pub fn with_perp_phase(mut self, alpha: f64) -> Self {
        self.perp_phase = alpha;
        self
    }
}

impl Default for NonCpQubitModel {
    fn default() -> Self {
        Self::new(RateVector::NON_CP)
    }
}

impl SseModel for NonCpQubitModel {
    fn dim(&self) -> usize {
        2
    }

    fn noise_channels(&self) -> usize {
        1
    }

    fn advance(&self, psi: &StateVector, dw: &[f64], dt: f64) -> Result<StateVector> {
        if dw.len() != 1 {
            return Err(Error::Dimension(format!(
                "qubit SSE takes one noise, got {}",
                dw.len()
            )));
        }
        noncp_increment(psi, self, dw[0], dt)
    }
}

#[inline]
fn sigma_apply(k: usize, a: [C64; 2]) -> [C64; 2] {
    let i = C64::new(0.0, 1.0);
    match k {
        0 => [a[1], a[0]],
        1 => [-i * a[1], i * a[0]],
        _ => [a[0], -a[1]],
    }
}

/// Unit vector orthogonal to `ψ`: `(n₂σ₁ - n₁σ₂)ψ / √(1 - n₃²)` away from the
/// poles, `(-ψ̄₂, ψ̄₁)` when `1 - n₃² < pole_tolerance`.
pub fn perp_state(psi: &StateVector, pole_tolerance: f64) -> Result<StateVector> {
    bloch_from_state(psi)?;
    let a = [psi.amplitudes()[0], psi.amplitudes()[1]];
    StateVector::new(perp_unchecked(a, pole_tolerance).to_vec())
}

#[inline]
fn perp_unchecked(a: [C64; 2], pole_tolerance: f64) -> [C64; 2] {
    let n = bloch_unchecked(&a).0;
    // n₁² + n₂² equals 1 - n₃² for pure states and keeps its relative
    // precision near the poles.
    let equatorial = n[0] * n[0] + n[1] * n[1];
    if equatorial < pole_tolerance {
        return [-a[1].conj(), a[0].conj()];
    }
    let x = sigma_apply(0, a);
    let y = sigma_apply(1, a);
    let v = [x[0] * n[1] - y[0] * n[0], x[1] * n[1] - y[1] * n[0]];
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / norm, v[1] / norm]
}

/// `ψ + dψ` for the qubit SSE, coefficients at `ψ` (Itô).
pub fn noncp_increment(
    psi: &StateVector,
    model: &NonCpQubitModel,
    dw: f64,
    dt: f64,
) -> Result<StateVector> {
    if psi.dim() != 2 {
        return Err(Error::Dimension(format!(
            "qubit SSE needs d = 2, got {}",
            psi.dim()
        )));
    }
    let a = [psi.amplitudes()[0], psi.amplitudes()[1]];
    let n = bloch_unchecked(&a).0;
    let c = model.rates.0;

    // (σₖ - nₖ)² ψ = (1 + nₖ²) ψ - 2 nₖ σₖ ψ
    let mut drift = [C64::new(0.0, 0.0); 2];
    for k in 0..3 {
        if c[k] == 0.0 {
            continue;
        }
        let s = sigma_apply(k, a);
        for r in 0..2 {
            drift[r] += (a[r] * (1.0 + n[k] * n[k]) - s[r] * (2.0 * n[k])) * c[k];
        }
    }
    let perp = perp_unchecked(a, model.pole_tolerance);
    let noise = C64::from_polar(SQRT_2 * n[2] * dw, model.perp_phase);
    StateVector::new(vec![
        a[0] - drift[0] * (0.5 * dt) + perp[0] * noise,
        a[1] - drift[1] * (0.5 * dt) + perp[1] * noise,
    ])
}

/// Max entrywise residual of `2n₃² |ψ⊥⟩⟨ψ⊥| = Σₖ cₖ (σₖ - nₖ)|ψ⟩⟨ψ|(σₖ - nₖ)`.
///
/// The identity holds for every pure qubit state when `c = (1, 1, -1)`; for
/// other rates the residual is simply reported.
pub fn identity_check(psi: &StateVector, c: &RateVector) -> Result<f64> {
    let n = bloch_from_state(psi)?.0;
    let perp = perp_state(psi, DEFAULT_POLE_TOL)?;
    let lhs = perp.projector().scale_real(2.0 * n[2] * n[2]);

    let p = psi.projector();
    let id = ComplexMatrix::identity(2);
    let mut rhs = ComplexMatrix::zeros(2, 2);
    for (k, s) in paulis().iter().enumerate() {
        let shifted = id.scale_real(-n[k]).add_scaled(s, C64::new(1.0, 0.0));
        let term = &(&shifted * &p) * &shifted;
        rhs = rhs.add_scaled(&term, C64::new(c.0[k], 0.0));
    }
    Ok(lhs.max_abs_diff(&rhs))
}
