//! Stochastic trajectory engine.
//!
//! Itô SSEs are integrated with Euler–Maruyama followed by renormalization.
//! Noise for trajectory `id` is read from counter stream `id` of the run seed,
//! so every increment is a pure function of `(seed, id, step, channel)`.

mod ensemble;
mod general;
mod qubit;

pub use ensemble::{ensemble_density, report_steps, EnsembleEstimate, EnsembleSpec};
pub use general::{general_increment, GeneralDiffusiveModel};
pub use qubit::{identity_check, noncp_increment, perp_state, NonCpQubitModel, DEFAULT_POLE_TOL};

use crate::algebra::StateVector;
use crate::error::{Error, Result};
use crate::master::step_count;
use crate::rng::{CounterRng, NormalStream};
use crate::C64;

/// Pre-normalization norms below this abort the step.
pub const STEP_FAILURE_NORM: f64 = 0.1;

/// Wiener increments for one trajectory.
///
/// The increment of channel `k` at step `s` is `√(dt/r) Σ_{m<r} z[(s·r + m)·N + k]`
/// where `z` is the trajectory's Gaussian stream, `N` the channel count and
/// `r` the refinement. With `r = 1` this is a plain `N(0, dt)` draw; larger
/// `r` yields the coarse-grid increments of a run at step `dt/r`, which is how
/// step-size studies share one Brownian path.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    stream: NormalStream,
    trajectory_id: u64,
    channels: usize,
    refinement: usize,
    scale: f64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory_id: u64, channels: usize, dt: f64) -> Self {
        Self::refined(seed, trajectory_id, channels, dt, 1)
    }

    pub fn refined(
        seed: u64,
        trajectory_id: u64,
        channels: usize,
        dt: f64,
        refinement: usize,
    ) -> Self {
        let refinement = refinement.max(1);
        Self {
            stream: CounterRng::new(seed).stream(trajectory_id),
            trajectory_id,
            channels,
            refinement,
            scale: (dt / refinement as f64).sqrt(),
        }
    }

    pub fn trajectory_id(&self) -> u64 {
        self.trajectory_id
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Fills `out` (length = channel count) with the increments of `step`.
    pub fn increments(&mut self, step: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        let per_step = (self.refinement * self.channels) as u64;
        self.stream.seek(step as u64 * per_step);
        out.iter_mut().for_each(|x| *x = 0.0);
        for _ in 0..self.refinement {
            for x in out.iter_mut() {
                *x += self.stream.next_normal();
            }
        }
        for x in out.iter_mut() {
            *x *= self.scale;
        }
    }
}

/// An Itô SSE `dψ = a(ψ) dt + Σₖ bₖ(ψ) dWₖ`.
pub trait SseModel: Sync {
    fn dim(&self) -> usize;

    /// Number of real Wiener processes driving the equation.
    fn noise_channels(&self) -> usize;

    /// `ψ + dψ` with coefficients evaluated at `ψ`; not normalized.
    fn advance(&self, psi: &StateVector, dw: &[f64], dt: f64) -> Result<StateVector>;
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: StateVector,
    /// `|‖ψ + dψ‖² - 1|` before renormalization.
    pub norm_drift: f64,
}

/// One Euler–Maruyama step with renormalization.
pub fn step<M: SseModel + ?Sized>(
    psi: &StateVector,
    model: &M,
    dw: &[f64],
    dt: f64,
) -> Result<StepOutcome> {
    let next = model.advance(psi, dw, dt)?;
    let norm_sqr = next.norm_sqr();
    if !(norm_sqr.sqrt() >= STEP_FAILURE_NORM) {
        return Err(Error::StepFailure {
            step: 0,
            trajectory: 0,
            norm: norm_sqr.sqrt(),
        });
    }
    Ok(StepOutcome {
        norm_drift: (norm_sqr - 1.0).abs(),
        state: next.scale(C64::new(1.0 / norm_sqr.sqrt(), 0.0)),
    })
}

/// `e^{-iΔχ} ψ`.
pub fn apply_gauge(psi: &StateVector, delta_chi: f64) -> StateVector {
    psi.scale(C64::from_polar(1.0, -delta_chi))
}

/// Stored realization of one trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// One entry per step.
    pub norm_drift: Vec<f64>,
}

fn validate_run<M: SseModel + ?Sized>(model: &M, psi0: &StateVector, t_final: f64, dt: f64) -> Result<()> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Usage(format!("final time must be >= 0, got {t_final}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Usage(format!("time step must be > 0, got {dt}")));
    }
    if psi0.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, model has {}",
            psi0.dim(),
            model.dim()
        )));
    }
    psi0.check_normalized()
}

/// Integrates one trajectory over `⌈T/dt⌉` steps.
pub fn simulate_trajectory<M: SseModel + ?Sized>(
    model: &M,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    seed: u64,
    trajectory_id: u64,
) -> Result<Trajectory> {
    simulate_gauged_trajectory(model, psi0, t_final, dt, seed, trajectory_id, |_, _, _| 0.0)
}

/// As [`simulate_trajectory`], multiplying the state by `e^{-iΔχ}` after each
/// step, where `Δχ = gauge(ψ_before, dW, dt)`.
pub fn simulate_gauged_trajectory<M, G>(
    model: &M,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    seed: u64,
    trajectory_id: u64,
    gauge: G,
) -> Result<Trajectory>
where
    M: SseModel + ?Sized,
    G: Fn(&StateVector, &[f64], f64) -> f64,
{
    validate_run(model, psi0, t_final, dt)?;
    let steps = if t_final == 0.0 { 0 } else { step_count(t_final, dt) };
    let h = if steps == 0 { dt } else { t_final / steps as f64 };
    let mut noise = NoiseStream::new(seed, trajectory_id, model.noise_channels(), h);
    let mut dw = vec![0.0; model.noise_channels()];

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut norm_drift = Vec::with_capacity(steps);
    times.push(0.0);
    states.push(psi0.clone());
    let mut psi = psi0.clone();
    for k in 0..steps {
        noise.increments(k, &mut dw);
        let out = step(&psi, model, &dw, h).map_err(|e| with_location(e, k, trajectory_id))?;
        let chi = gauge(&psi, &dw, h);
        psi = if chi == 0.0 { out.state } else { apply_gauge(&out.state, chi) };
        norm_drift.push(out.norm_drift);
        times.push((k + 1) as f64 * h);
        states.push(psi.clone());
    }
    Ok(Trajectory {
        times,
        states,
        norm_drift,
    })
}

pub(crate) fn with_location(e: Error, step: usize, trajectory: u64) -> Error {
    match e {
        Error::StepFailure { norm, .. } => Error::StepFailure {
            step,
            trajectory,
            norm,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::RateVector;

    #[test]
    fn noise_is_keyed_and_scaled() {
        let dt = 1e-3;
        let mut a = NoiseStream::new(42, 3, 2, dt);
        let mut b = NoiseStream::new(42, 3, 2, dt);
        let (mut x, mut y) = ([0.0; 2], [0.0; 2]);
        a.increments(10, &mut x);
        for k in [0, 5, 10] {
            b.increments(k, &mut y);
        }
        assert_eq!(x, y);

        let mut s = NoiseStream::new(1, 0, 1, dt);
        let n = 100_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        let mut w = [0.0];
        for k in 0..n {
            s.increments(k, &mut w);
            m1 += w[0];
            m2 += w[0] * w[0];
        }
        let mean = m1 / n as f64;
        let var = m2 / n as f64 - mean * mean;
        assert!(mean.abs() <= 4.0 * (dt / n as f64).sqrt());
        assert!((var / dt - 1.0).abs() <= 0.05);
    }

    #[test]
    fn refined_increments_sum_fine_ones() {
        let h = 5e-4;
        let mut fine = NoiseStream::new(8, 1, 3, h);
        let mut coarse = NoiseStream::refined(8, 1, 3, 4.0 * h, 4);
        let mut acc = [0.0; 3];
        let mut buf = [0.0; 3];
        for k in 8..12 {
            fine.increments(k, &mut buf);
            for c in 0..3 {
                acc[c] += buf[c];
            }
        }
        coarse.increments(2, &mut buf);
        for c in 0..3 {
            assert!((acc[c] - buf[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_step_keeps_state() {
        let m = NonCpQubitModel::new(RateVector::NON_CP);
        let psi = StateVector::plus();
        let out = step(&psi, &m, &[0.0], 0.0).unwrap();
        assert!(out.state.max_abs_diff(&psi) <= 1e-16);
        assert!(out.norm_drift <= 1e-15);
    }

    #[test]
    fn pole_drift_only_shrinks() {
        let m = NonCpQubitModel::new(RateVector::NON_CP);
        let psi = StateVector::basis(2, 0);
        let out = step(&psi, &m, &[0.0], 1e-3).unwrap();
        assert!(out.state.max_abs_diff(&psi) < 1e-15);
        assert!((out.norm_drift - (1.0 - (1.0 - 1e-3f64).powi(2))).abs() < 1e-15);
    }

    #[test]
    fn oversized_step_fails() {
        let m = NonCpQubitModel::new(RateVector::NON_CP);
        let err = step(&StateVector::basis(2, 0), &m, &[0.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
    }

    struct Collapsing;

    impl SseModel for Collapsing {
        fn dim(&self) -> usize {
            2
        }

        fn noise_channels(&self) -> usize {
            1
        }

        fn advance(&self, psi: &StateVector, _dw: &[f64], _dt: f64) -> Result<StateVector> {
            Ok(psi.scale(C64::new(0.05, 0.0)))
        }
    }

    #[test]
    fn failure_reports_step_and_trajectory() {
        let err = simulate_trajectory(&Collapsing, &StateVector::plus(), 1.0, 0.1, 0, 7).unwrap_err();
        match err {
            Error::StepFailure { step, trajectory, norm } => {
                assert_eq!((step, trajectory), (0, 7));
                assert!(norm < STEP_FAILURE_NORM);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_repeated_runs() {
        let m = NonCpQubitModel::new(RateVector::NON_CP);
        let psi = StateVector::plus();
        let t = simulate_trajectory(&m, &psi, 0.0, 1e-3, 1, 0).unwrap();
        assert_eq!(t.states, vec![psi.clone()]);

        let a = simulate_trajectory(&m, &psi, 0.1, 1e-3, 5, 2).unwrap();
        let b = simulate_trajectory(&m, &psi, 0.1, 1e-3, 5, 2).unwrap();
        assert_eq!(a.states.len(), 101);
        for (x, y) in a.states.iter().zip(&b.states) {
            for (p, q) in x.amplitudes().iter().zip(y.amplitudes()) {
                assert_eq!(p.re.to_bits(), q.re.to_bits());
                assert_eq!(p.im.to_bits(), q.im.to_bits());
            }
        }
        for s in &a.states {
            assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn norm_drift_is_first_order_small() {
        let m = NonCpQubitModel::new(RateVector::NON_CP);
        let dt = 1e-3;
        let t = simulate_trajectory(&m, &StateVector::plus(), 1.0, dt, 3, 0).unwrap();
        let mean = t.norm_drift.iter().sum::<f64>() / t.norm_drift.len() as f64;
        // |‖ψ+dψ‖² - 1| is O(dt) per step: ±(2n₃²)(dW² - dt) plus O(dt²).
        assert!(mean <= 4.0 * dt, "mean drift {mean}");
    }

    #[test]
    fn gauge_leaves_projectors_alone() {
        let m = NonCpQubitModel::new(RateVector::NON_CP);
        let psi = StateVector::basis(2, 0);
        let a = simulate_trajectory(&m, &psi, 0.2, 1e-3, 4, 1).unwrap();
        let b = simulate_gauged_trajectory(&m, &psi, 0.2, 1e-3, 4, 1, |p, dw, dt| {
            p.amplitudes()[0].re * 3.0 + dw[0] * 50.0 + dt
        })
        .unwrap();
        let mut moved = 0.0f64;
        for (x, y) in a.states.iter().zip(&b.states) {
            moved = moved.max(x.max_abs_diff(y));
            let d = (&x.projector() - &y.projector()).frobenius_norm();
            assert!(d <= 1e-13);
        }
        assert!(moved > 1e-3);
        assert_eq!(apply_gauge(&psi, 0.0), psi);
    }
}
