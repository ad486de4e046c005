//! Deterministic master-equation engine.
//!
//! Generators of the form `-i[H, ρ] + Σₖ cₖ (Aₖ ρ Aₖ† - ½{Aₖ†Aₖ, ρ})` with
//! real, possibly negative rates `cₖ`, classical RK4 integration, the
//! closed-form Pauli-channel solution, map tomography, Choi matrices and
//! complete-positivity / positivity diagnostics.

use crate::algebra::{
    hermitian_eigen, paulis, random_state, BlochVector, ComplexMatrix, StateVector,
};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::rng::NormalStream;
use crate::C64;

/// Default tolerance on the minimal Choi eigenvalue for a CP verdict.
pub const DEFAULT_CP_TOL: f64 = 1e-9;

const DENSITY_TOL: f64 = 1e-11;
const HAMILTONIAN_TOL: f64 = 1e-12;
const POSITIVE_TOL: f64 = 1e-9;

/// Pauli rates `(c₁, c₂, c₃)`, in units of 1/time. Signs are unrestricted.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RateVector(pub [f64; 3]);

impl RateVector {
    /// The signed pattern `c₁ = c₂ = -c₃ = 1`.
    pub const NON_CP: Self = Self([1.0, 1.0, -1.0]);

    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let c = [c1, c2, c3];
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("rates must be finite, got {c:?}")));
        }
        Ok(Self(c))
    }

    /// `C = c₁ + c₂ + c₃`.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Bloch-component decay rates `2(C - cⱼ)`.
    pub fn bloch_decay_rates(&self) -> [f64; 3] {
        let total = self.total();
        self.0.map(|c| 2.0 * (total - c))
    }

    pub fn is_non_cp_pattern(&self) -> bool {
        *self == Self::NON_CP
    }
}

/// Hermitian, unit-trace density matrix. Positivity is not enforced; see
/// [`DensityMatrix::min_eigenvalue`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        let herm = matrix.hermitian_defect();
        if herm > DENSITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian: {herm:.3e}"
            )));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        Ok(Self(matrix))
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self(matrix)
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        psi.check_normalized()?;
        Ok(Self(psi.projector()))
    }

    pub fn from_bloch(n: &BlochVector) -> Self {
        Self(n.to_matrix())
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn bloch(&self) -> Result<BlochVector> {
        BlochVector::from_matrix(&self.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigen(&self.0)?.min())
    }

    /// Errors unless all eigenvalues are at least `-1e-9`.
    pub fn check_physical(&self) -> Result<()> {
        let min = self.min_eigenvalue()?;
        if min < -POSITIVE_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Channel {
    rate: f64,
    op: ComplexMatrix,
    adj: ComplexMatrix,
    half_ata: ComplexMatrix,
}

/// `ρ ↦ -i[H, ρ] + Σₖ cₖ (Aₖ ρ Aₖ† - ½{Aₖ†Aₖ, ρ})`.
#[derive(Clone, Debug)]
pub struct MasterGenerator {
    hamiltonian: ComplexMatrix,
    channels: Vec<Channel>,
}

impl MasterGenerator {
    pub fn new(hamiltonian: ComplexMatrix, channels: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
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
        let channels = channels
            .into_iter()
            .map(|(rate, op)| {
                if op.rows() != d || op.cols() != d {
                    return Err(Error::Dimension(format!(
                        "channel operator is {}x{}, expected {d}x{d}",
                        op.rows(),
                        op.cols()
                    )));
                }
                if !rate.is_finite() {
                    return Err(Error::Validation("channel rate must be finite".into()));
                }
                let adj = op.adjoint();
                let half_ata = (&adj * &op).scale_real(0.5);
                Ok(Channel {
                    rate,
                    op,
                    adj,
                    half_ata,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hamiltonian,
            channels,
        })
    }

    /// `H = 0` with channels `(cₖ, σₖ)`.
    pub fn pauli(rates: RateVector) -> Self {
        let channels = rates.0.into_iter().zip(paulis()).collect();
        Self::new(ComplexMatrix::zeros(2, 2), channels).expect("Pauli generator is valid")
    }

    /// Unit-rate Lindblad generator with operators `Lⱼ`.
    pub fn lindblad(hamiltonian: ComplexMatrix, lindblads: &[ComplexMatrix]) -> Result<Self> {
        Self::new(
            hamiltonian,
            lindblads.iter().map(|l| (1.0, l.clone())).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    /// Applies the generator to an arbitrary operator.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim();
        if rho.rows() != d || rho.cols() != d {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, generator acts on {d}x{d}",
                rho.rows(),
                rho.cols()
            )));
        }
        Ok(self.apply_unchecked(rho))
    }

    fn apply_unchecked(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self
            .hamiltonian
            .commutator(rho)
            .scale(C64::new(0.0, -1.0));
        for ch in &self.channels {
            if ch.rate == 0.0 {
                continue;
            }
            let sandwich = &(&ch.op * rho) * &ch.adj;
            let anti = ch.half_ata.anticommutator(rho);
            out = out.add_scaled(&(&sandwich - &anti), C64::new(ch.rate, 0.0));
        }
        out
    }
}

/// `dρ/dt` at `ρ`; traceless and Hermitian for Hermitian `ρ`.
pub fn lindblad_rhs(rho: &DensityMatrix, g: &MasterGenerator) -> Result<ComplexMatrix> {
    g.apply(rho.matrix())
}

/// Number of uniform steps of size at most `dt` covering `[0, t]`, i.e.
/// `⌈t/dt⌉` with a little slack so that `0.25 / 1e-3` counts as 250.
pub(crate) fn step_count(t: f64, dt: f64) -> usize {
    let ratio = t / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

fn check_time_args(t: f64, dt: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Usage(format!("final time must be >= 0, got {t}")));
    }
    if t > 0.0 && !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Usage(format!("time step must be > 0, got {dt}")));
    }
    Ok(())
}

fn rk4_step(g: &MasterGenerator, rho: &ComplexMatrix, h: f64, hermitian: bool) -> ComplexMatrix {
    let half = C64::new(h / 2.0, 0.0);
    let k1 = g.apply_unchecked(rho);
    let k2 = g.apply_unchecked(&rho.add_scaled(&k1, half));
    let k3 = g.apply_unchecked(&rho.add_scaled(&k2, half));
    let k4 = g.apply_unchecked(&rho.add_scaled(&k3, C64::new(h, 0.0)));
    let sum = &(&k1 + &k4) + &(&k2 + &k3).scale_real(2.0);
    let next = rho.add_scaled(&sum, C64::new(h / 6.0, 0.0));
    if hermitian {
        next.hermitian_part()
    } else {
        next
    }
}

/// RK4 over `⌈t/dt⌉` uniform steps for an arbitrary operator. When
/// `hermitian` is set the state is symmetrized after every step.
pub fn integrate_operator(
    rho0: &ComplexMatrix,
    g: &MasterGenerator,
    t: f64,
    dt: f64,
    hermitian: bool,
) -> Result<ComplexMatrix> {
    check_time_args(t, dt)?;
    g.apply(rho0)?;
    let steps = if t == 0.0 { 0 } else { step_count(t, dt) };
    let mut rho = rho0.clone();
    if steps == 0 {
        return Ok(rho);
    }
    let h = t / steps as f64;
    for _ in 0..steps {
        rho = rk4_step(g, &rho, h, hermitian);
    }
    Ok(rho)
}

/// Integrates the master equation from `ρ₀` to time `t`.
pub fn integrate_master(
    rho0: &DensityMatrix,
    g: &MasterGenerator,
    t: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    integrate_operator(rho0.matrix(), g, t, dt, true).map(DensityMatrix::new_unchecked)
}

/// Integrates with fixed step `dt` and returns the state after each entry of
/// `report_steps` (ascending step indices).
pub fn integrate_master_at(
    rho0: &DensityMatrix,
    g: &MasterGenerator,
    dt: f64,
    report_steps: &[usize],
) -> Result<Vec<DensityMatrix>> {
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("time step must be > 0, got {dt}")));
    }
    g.apply(rho0.matrix())?;
    let mut out = Vec::with_capacity(report_steps.len());
    let mut rho = rho0.matrix().clone();
    let mut done = 0usize;
    for &target in report_steps {
        if target < done {
            return Err(Error::Usage("report steps must be ascending".into()));
        }
        while done < target {
            rho = rk4_step(g, &rho, dt, true);
            done += 1;
        }
        out.push(DensityMatrix::new_unchecked(rho.clone()));
    }
    Ok(out)
}

/// Closed-form Bloch solution of the Pauli master equation:
/// `nⱼ(t) = exp(-2(C - cⱼ)t) nⱼ(0)`.
pub fn analytic_pauli_solution(n0: &BlochVector, c: &RateVector, t: f64) -> BlochVector {
    let rates = c.bloch_decay_rates();
    BlochVector([0, 1, 2].map(|j| (-rates[j] * t).exp() * n0.0[j]))
}

/// Pauli-channel eigenvalues `λⱼ(t) = exp(-2(C - cⱼ)t)`.
pub fn pauli_channel_eigenvalues(c: &RateVector, t: f64) -> [f64; 3] {
    c.bloch_decay_rates().map(|r| (-r * t).exp())
}

/// Choi spectrum, normalized to unit trace, of the qubit map acting on the
/// Bloch vector as `diag(λ₁, λ₂, λ₃)`.
pub fn pauli_channel_choi_spectrum(lambda: [f64; 3]) -> [f64; 4] {
    let [l1, l2, l3] = lambda;
    [
        (1.0 + l1 + l2 + l3) / 4.0,
        (1.0 + l1 - l2 - l3) / 4.0,
        (1.0 - l1 + l2 - l3) / 4.0,
        (1.0 - l1 - l2 + l3) / 4.0,
    ]
}

/// Linear map on `d×d` operators as a `d²×d²` superoperator acting on
/// row-major vectorizations, `vec(ρ)[i·d + j] = ρᵢⱼ`.
#[derive(Clone, Debug)]
pub struct DynamicalMap {
    superoperator: ComplexMatrix,
    dim: usize,
    time: f64,
}

impl DynamicalMap {
    pub fn new(superoperator: ComplexMatrix, time: f64) -> Result<Self> {
        let n = superoperator.rows();
        let dim = (n as f64).sqrt().round() as usize;
        if !superoperator.is_square() || dim * dim != n {
            return Err(Error::Dimension(format!(
                "superoperator must be d²×d², got {}x{}",
                superoperator.rows(),
                superoperator.cols()
            )));
        }
        Ok(Self {
            superoperator,
            dim,
            time,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            superoperator: ComplexMatrix::identity(d * d),
            dim: d,
            time: 0.0,
        }
    }

    /// Qubit map `(I + n·σ)/2 ↦ (I + (R n + shift)·σ)/2`.
    pub fn from_bloch(block: [[f64; 3]; 3], shift: [f64; 3], time: f64) -> Self {
        let s = paulis();
        let mut images: Vec<ComplexMatrix> = Vec::with_capacity(4);
        // Λ(I) = I + shift·σ
        let mut img_id = ComplexMatrix::identity(2);
        for k in 0..3 {
            img_id = img_id.add_scaled(&s[k], C64::new(shift[k], 0.0));
        }
        images.push(img_id);
        for l in 0..3 {
            let mut img = ComplexMatrix::zeros(2, 2);
            for k in 0..3 {
                img = img.add_scaled(&s[k], C64::new(block[k][l], 0.0));
            }
            images.push(img);
        }
        let basis = std::iter::once(ComplexMatrix::identity(2))
            .chain(s)
            .collect::<Vec<_>>();
        let mut sup = ComplexMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                // E_ij = ½ Σ_μ (σ_μ)_ji σ_μ
                let mut img = ComplexMatrix::zeros(2, 2);
                for (mu, b) in basis.iter().enumerate() {
                    img = img.add_scaled(&images[mu], b[(j, i)] * 0.5);
                }
                sup.set_column(i * 2 + j, img.as_slice());
            }
        }
        Self {
            superoperator: sup,
            dim: 2,
            time,
        }
    }

    pub fn superoperator(&self) -> &ComplexMatrix {
        &self.superoperator
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "map acts on {0}x{0} operators",
                self.dim
            )));
        }
        let out = self.superoperator.mul_vec_unchecked(rho.as_slice());
        ComplexMatrix::from_vec(self.dim, self.dim, out)
    }

    /// `Λ(Eᵢⱼ)`.
    pub fn image_of_unit(&self, i: usize, j: usize) -> ComplexMatrix {
        let col = self.superoperator.column(i * self.dim + j);
        ComplexMatrix::from_vec(self.dim, self.dim, col).expect("square image")
    }

    /// Largest deviation of `tr Λ(Eᵢⱼ)` from `δᵢⱼ`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let tr = self.image_of_unit(i, j).trace();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((tr - C64::new(want, 0.0)).norm());
            }
        }
        worst
    }

    /// Largest deviation of `Λ(Eⱼᵢ)` from `Λ(Eᵢⱼ)†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let a = self.image_of_unit(j, i);
                let b = self.image_of_unit(i, j).adjoint();
                worst = worst.max(a.max_abs_diff(&b));
            }
        }
        worst
    }

    /// Qubit maps only: `R[k][l] = ½ tr(σₖ Λ(σₗ))`.
    pub fn bloch_block(&self) -> Result<[[f64; 3]; 3]> {
        if self.dim != 2 {
            return Err(Error::Dimension("Bloch block needs a qubit map".into()));
        }
        let s = paulis();
        let mut r = [[0.0; 3]; 3];
        for l in 0..3 {
            let img = self.apply(&s[l])?;
            for k in 0..3 {
                r[k][l] = 0.5 * (&s[k] * &img).trace().re;
            }
        }
        Ok(r)
    }
}

/// Hermitian operator basis: `Eᵢᵢ`, then for `i < j` the pair
/// `Eᵢⱼ + Eⱼᵢ`, `-i(Eᵢⱼ - Eⱼᵢ)`.
fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut e = ComplexMatrix::zeros(d, d);
        e[(i, i)] = C64::new(1.0, 0.0);
        basis.push(e);
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut x = ComplexMatrix::zeros(d, d);
            x[(i, j)] = C64::new(1.0, 0.0);
            x[(j, i)] = C64::new(1.0, 0.0);
            let mut y = ComplexMatrix::zeros(d, d);
            y[(i, j)] = C64::new(0.0, -1.0);
            y[(j, i)] = C64::new(0.0, 1.0);
            basis.push(x);
            basis.push(y);
        }
    }
    basis
}

/// Tomography of the evolution `ρ(0) ↦ ρ(t)`. The `d²` Hermitian basis
/// elements are integrated independently (concurrently when allowed) and
/// recombined into the images of the matrix units.
pub fn extract_map(
    g: &MasterGenerator,
    t: f64,
    dt: f64,
    parallelism: Parallelism,
) -> Result<DynamicalMap> {
    check_time_args(t, dt)?;
    let d = g.dim();
    let basis = hermitian_basis(d);
    let images = parallelism.run(|par| {
        map_indexed(basis.len(), par, |k| {
            integrate_operator(&basis[k], g, t, dt, true)
        })
    });
    let images = images.into_iter().collect::<Result<Vec<_>>>()?;

    let mut sup = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        sup.set_column(i * d + i, images[i].as_slice());
    }
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let (x, y) = (&images[k], &images[k + 1]);
            let eij = x.add_scaled(y, C64::new(0.0, 1.0)).scale_real(0.5);
            let eji = x.add_scaled(y, C64::new(0.0, -1.0)).scale_real(0.5);
            sup.set_column(i * d + j, eij.as_slice());
            sup.set_column(j * d + i, eji.as_slice());
            k += 2;
        }
    }
    DynamicalMap::new(sup, t)
}

/// Unnormalized Choi matrix `Σᵢⱼ Eᵢⱼ ⊗ Λ(Eᵢⱼ)`, trace `d` for trace-preserving maps.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    matrix: ComplexMatrix,
    dim: usize,
}

impl ChoiMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigen(&self.matrix)?.values)
    }

    /// Eigenvalues divided by `d`, summing to one.
    pub fn normalized_eigenvalues(&self) -> Result<Vec<f64>> {
        let d = self.dim as f64;
        Ok(self.eigenvalues()?.into_iter().map(|x| x / d).collect())
    }
}

pub fn choi_matrix(m: &DynamicalMap) -> ChoiMatrix {
    let d = m.dim();
    let mut c = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let img = m.image_of_unit(i, j);
            for a in 0..d {
                for b in 0..d {
                    c[(i * d + a, j * d + b)] = img[(a, b)];
                }
            }
        }
    }
    // Exact Hermiticity; the input map is only Hermiticity-preserving to
    // integrator precision.
    ChoiMatrix {
        matrix: c.hermitian_part(),
        dim: d,
    }
}

#[derive(Clone, Debug)]
pub struct CpVerdict {
    pub cp: bool,
    /// Minimal eigenvalue of the Choi matrix divided by `d`.
    pub min_eigenvalue: f64,
    pub min_eigenvalue_raw: f64,
    /// Full normalized spectrum, ascending.
    pub spectrum: Vec<f64>,
    /// Eigenvector (in `C^{d²}`) of the minimal eigenvalue.
    pub witness: StateVector,
}

/// `cp` holds when the normalized minimal Choi eigenvalue is `>= -tol`.
pub fn cp_verdict(choi: &ChoiMatrix, tol: f64) -> Result<CpVerdict> {
    let eig = hermitian_eigen(&choi.matrix)?;
    let d = choi.dim as f64;
    let min_raw = eig.min();
    Ok(CpVerdict {
        cp: min_raw / d >= -tol,
        min_eigenvalue: min_raw / d,
        min_eigenvalue_raw: min_raw,
        spectrum: eig.values.iter().map(|x| x / d).collect(),
        witness: StateVector::new(eig.vectors.column(0))?,
    })
}

#[derive(Clone, Debug)]
pub struct PositivityVerdict {
    pub positive_on_samples: bool,
    pub min_output_eigenvalue: f64,
}

/// Applies `m` to `samples` Haar-random pure states drawn from `stream` and
/// reports the smallest output eigenvalue. Nothing is clipped.
pub fn positivity_verdict(
    m: &DynamicalMap,
    samples: usize,
    stream: &NormalStream,
    parallelism: Parallelism,
) -> Result<PositivityVerdict> {
    if samples == 0 {
        return Err(Error::Usage("positivity check needs at least one sample".into()));
    }
    let d = m.dim();
    let mins = parallelism.run(|par| {
        map_indexed(samples, par, |i| -> Result<f64> {
            let mut s = stream.clone();
            let psi = random_state(&mut s, i as u64, d)?;
            let out = m.apply(&psi.projector())?;
            Ok(hermitian_eigen(&out.hermitian_part())?.min())
        })
    });
    let mut min = f64::INFINITY;
    for v in mins {
        min = min.min(v?);
    }
    Ok(PositivityVerdict {
        positive_on_samples: min >= -POSITIVE_TOL,
        min_output_eigenvalue: min,
    })
}
