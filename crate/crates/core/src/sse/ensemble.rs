use std::ops::Range;

use super::{step, with_location, NoiseStream, SseModel};
use crate::algebra::{bloch_unchecked, BlochVector, ComplexMatrix, StateVector};
use crate::error::{Error, Result};
use crate::exec::{add_vectors, tree_reduce, Parallelism};
use crate::master::{step_count, DensityMatrix};
use crate::C64;

/// Parameters of an ensemble run.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub dt: f64,
    /// Ascending step indices at which the ensemble is sampled.
    pub report_steps: Vec<usize>,
    pub trajectories: usize,
    pub seed: u64,
    /// See [`NoiseStream::refined`].
    pub noise_refinement: usize,
    pub parallelism: Parallelism,
}

impl EnsembleSpec {
    /// `grid_points` evenly spaced report times in `(0, T]`; `T = 0` reports
    /// the initial state only.
    pub fn uniform(t_final: f64, dt: f64, grid_points: usize, trajectories: usize, seed: u64) -> Self {
        Self {
            dt,
            report_steps: report_steps(t_final, dt, grid_points),
            trajectories,
            seed,
            noise_refinement: 1,
            parallelism: Parallelism::default(),
        }
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        self.report_steps.iter().map(|&s| s as f64 * self.dt).collect()
    }
}

/// Step indices of `grid_points` evenly spaced times in `(0, T]`, rounded to
/// the step grid and deduplicated. `[0]` when `T = 0` or `grid_points = 0`.
pub fn report_steps(t_final: f64, dt: f64, grid_points: usize) -> Vec<usize> {
    if !(t_final > 0.0) || !(dt > 0.0) || grid_points == 0 {
        return vec![0];
    }
    let total = step_count(t_final, dt);
    let mut steps: Vec<usize> = (1..=grid_points)
        .map(|k| ((k as f64 * total as f64) / grid_points as f64).round() as usize)
        .filter(|&s| s > 0)
        .collect();
    steps.dedup();
    if steps.is_empty() {
        steps.push(total);
    }
    steps
}

/// Ensemble means on the report grid.
#[derive(Clone, Debug)]
pub struct EnsembleEstimate {
    pub times: Vec<f64>,
    pub mean_density: Vec<DensityMatrix>,
    /// Qubit models only.
    pub mean_bloch: Option<Vec<BlochVector>>,
    /// Per Bloch component, qubit models only. With a single trajectory the
    /// trivial bound `1/√1 = 1` is reported, since each component lies in [-1, 1].
    pub standard_error: Option<Vec<[f64; 3]>>,
    pub trajectories: usize,
}

struct Layout {
    d: usize,
    qubit: bool,
    stride: usize,
}

impl Layout {
    fn new(d: usize) -> Self {
        let qubit = d == 2;
        Self {
            d,
            qubit,
            stride: 2 * d * d + if qubit { 6 } else { 0 },
        }
    }

    fn accumulate(&self, slot: &mut [f64], psi: &StateVector) {
        let a = psi.amplitudes();
        let d = self.d;
        for i in 0..d {
            for j in 0..d {
                let z = a[i] * a[j].conj();
                slot[2 * (i * d + j)] += z.re;
                slot[2 * (i * d + j) + 1] += z.im;
            }
        }
        if self.qubit {
            let n = bloch_unchecked(a).0;
            let base = 2 * d * d;
            for k in 0..3 {
                slot[base + k] += n[k];
                slot[base + 3 + k] += n[k] * n[k];
            }
        }
    }
}

fn run_trajectory<M: SseModel + ?Sized>(
    model: &M,
    psi0: &StateVector,
    spec: &EnsembleSpec,
    id: u64,
    layout: &Layout,
    acc: &mut [f64],
) -> Result<()> {
    let channels = model.noise_channels();
    let mut noise = NoiseStream::refined(spec.seed, id, channels, spec.dt, spec.noise_refinement);
    let mut dw = vec![0.0; channels];
    let mut psi = psi0.clone();
    let mut done = 0usize;
    for (g, &target) in spec.report_steps.iter().enumerate() {
        while done < target {
            noise.increments(done, &mut dw);
            psi = step(&psi, model, &dw, spec.dt)
                .map_err(|e| with_location(e, done, id))?
                .state;
            done += 1;
        }
        layout.accumulate(&mut acc[g * layout.stride..(g + 1) * layout.stride], &psi);
    }
    Ok(())
}

/// `E|ψ(t)⟩⟨ψ(t)|` over `spec.trajectories` independent trajectories.
///
/// Trajectory `i` uses noise stream `i` of `spec.seed`; sums are reduced by a
/// fixed pairwise tree over trajectory index, so the result is bitwise
/// independent of `spec.parallelism`.
pub fn ensemble_density<M: SseModel + ?Sized>(
    model: &M,
    psi0: &StateVector,
    spec: &EnsembleSpec,
) -> Result<EnsembleEstimate> {
    if spec.trajectories == 0 {
        return Err(Error::Usage("ensemble needs at least one trajectory".into()));
    }
    if !(spec.dt > 0.0) || !spec.dt.is_finite() {
        return Err(Error::Usage(format!("time step must be > 0, got {}", spec.dt)));
    }
    if spec.report_steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("report steps must be ascending".into()));
    }
    if psi0.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, model has {}",
            psi0.dim(),
            model.dim()
        )));
    }
    psi0.check_normalized()?;

    let layout = Layout::new(model.dim());
    let width = layout.stride * spec.report_steps.len();
    let leaf = |range: Range<usize>| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; width];
        for id in range {
            run_trajectory(model, psi0, spec, id as u64, &layout, &mut acc)?;
        }
        Ok(acc)
    };
    let combine = |a: Result<Vec<f64>>, b: Result<Vec<f64>>| Ok(add_vectors(a?, b?));
    let sums = spec
        .parallelism
        .run(|par| tree_reduce(0..spec.trajectories, par, &leaf, &combine))?;

    let n = spec.trajectories as f64;
    let d = layout.d;
    let mut mean_density = Vec::with_capacity(spec.report_steps.len());
    let mut mean_bloch = Vec::new();
    let mut standard_error = Vec::new();
    for slot in sums.chunks(layout.stride) {
        let m = ComplexMatrix::from_fn(d, d, |i, j| {
            C64::new(slot[2 * (i * d + j)], slot[2 * (i * d + j) + 1]) / n
        });
        mean_density.push(DensityMatrix::new_unchecked(m.hermitian_part()));
        if layout.qubit {
            let base = 2 * d * d;
            let mut mean = [0.0; 3];
            let mut se = [0.0; 3];
            for k in 0..3 {
                mean[k] = slot[base + k] / n;
                se[k] = if spec.trajectories == 1 {
                    1.0
                } else {
                    let var = (slot[base + 3 + k] - n * mean[k] * mean[k]) / (n - 1.0);
                    (var.max(0.0) / n).sqrt()
                };
            }
            mean_bloch.push(BlochVector(mean));
            standard_error.push(se);
        }
    }
    Ok(EnsembleEstimate {
        times: spec.times(),
        mean_density,
        mean_bloch: layout.qubit.then_some(mean_bloch),
        standard_error: layout.qubit.then_some(standard_error),
        trajectories: spec.trajectories,
    })
}
