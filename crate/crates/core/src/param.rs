//! Parametrization of diffusive unravelings.
//!
//! An isometric noise matrix `u` (`N×n`, `u†u = Iₙ`) mixes `N` real Wiener
//! increments into `n` complex ones, `dξ*ⱼ = Σₖ dWₖ uₖⱼ`. Physically distinct
//! unravelings are labelled by the complex symmetric correlation matrix
//! `s = conj(uᵀu)` with `‖s‖ ≤ 1`; `u` and `O·u` for real orthogonal `O`
//! give the same `s` and, with rotated noise, the same trajectories.

use crate::algebra::{hermitian_eigen, ComplexMatrix, StateVector};
use crate::error::{Error, Result};
use crate::rng::NormalStream;
use crate::sse::{step, GeneralDiffusiveModel, NoiseStream};
use crate::C64;

/// Tolerance for `u†u = I`, `s = sᵀ`, `‖s‖ ≤ 1` and `OᵀO = I`.
pub const PARAM_TOL: f64 = 1e-10;

/// Singular values closer than this are treated as one degenerate block.
pub const TAKAGI_TIE_TOL: f64 = 1e-12;

/// `N×n` complex noise matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMatrix {
    u: ComplexMatrix,
}

impl NoiseMatrix {
    pub fn new(u: ComplexMatrix) -> Result<Self> {
        if u.rows() < u.cols() {
            return Err(Error::Validation(format!(
                "noise matrix must have N >= n, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        let defect = isometry_defect(&u);
        if defect > PARAM_TOL {
            return Err(Error::Validation(format!(
                "noise matrix is not an isometry: max |u†u - I| = {defect:.3e}"
            )));
        }
        Ok(Self { u })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            u: ComplexMatrix::identity(n),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.u
    }

    /// Number of real noises `N`.
    pub fn noise_count(&self) -> usize {
        self.u.rows()
    }

    /// Number of Lindblad channels `n`.
    pub fn channel_count(&self) -> usize {
        self.u.cols()
    }

    /// `O·u`.
    pub fn rotated(&self, o: &OrthogonalMatrix) -> Result<Self> {
        Self::new(o.matrix().matmul(&self.u)?)
    }
}

/// `max |u†u - I|`.
pub fn isometry_defect(u: &ComplexMatrix) -> f64 {
    let gram = &u.adjoint() * u;
    gram.max_abs_diff(&ComplexMatrix::identity(u.cols()))
}

/// Complex symmetric `n×n` correlation matrix with spectral norm at most one.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    s: ComplexMatrix,
}

impl CorrelationMatrix {
    pub fn new(s: ComplexMatrix) -> Result<Self> {
        let check = validate_s(&s)?;
        if !check.symmetric {
            return Err(Error::Validation(format!(
                "correlation matrix is not symmetric: max |s - sᵀ| = {:.3e}",
                s.symmetric_defect()
            )));
        }
        if !check.feasible {
            return Err(Error::Infeasible {
                norm: check.spectral_norm,
            });
        }
        Ok(Self { s })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.rows()
    }
}

/// Real `N×N` orthogonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMatrix {
    o: ComplexMatrix,
}

impl OrthogonalMatrix {
    pub fn new(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("orthogonal matrix must be square".into()));
        }
        let o = ComplexMatrix::from_real_rows(rows);
        let defect = (&o.transpose() * &o).max_abs_diff(&ComplexMatrix::identity(n));
        if defect > PARAM_TOL {
            return Err(Error::Validation(format!(
                "matrix is not orthogonal: max |OᵀO - I| = {defect:.3e}"
            )));
        }
        Ok(Self { o })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            o: ComplexMatrix::identity(n),
        }
    }

    /// Plane rotation by `angle` in the `(0, 1)` coordinates of `R^n`.
    pub fn rotation(n: usize, angle: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension("rotation needs n >= 2".into()));
        }
        let mut o = ComplexMatrix::identity(n);
        let (s, c) = angle.sin_cos();
        o[(0, 0)] = C64::new(c, 0.0);
        o[(0, 1)] = C64::new(-s, 0.0);
        o[(1, 0)] = C64::new(s, 0.0);
        o[(1, 1)] = C64::new(c, 0.0);
        Ok(Self { o })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.o
    }

    pub fn dim(&self) -> usize {
        self.o.rows()
    }

    /// `Oᵀ x` for real `x`.
    pub fn transpose_apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|k| self.o[(k, j)].re * x[k]).sum())
            .collect()
    }
}

/// `s = conj(uᵀu)`, i.e. `s*ⱼₗ = Σₖ uₖⱼ uₖₗ`.
pub fn s_from_u(u: &NoiseMatrix) -> Result<CorrelationMatrix> {
    let m = u.matrix();
    CorrelationMatrix::new((&m.transpose() * m).conj())
}

/// `dξ* = uᵀ dW`.
pub fn map_noise(u: &NoiseMatrix, dw: &[f64]) -> Result<Vec<C64>> {
    let m = u.matrix();
    if dw.len() != m.rows() {
        return Err(Error::Dimension(format!(
            "noise vector has length {}, noise matrix has N = {}",
            dw.len(),
            m.rows()
        )));
    }
    Ok(map_noise_unchecked(m, dw))
}

#[inline]
pub(crate) fn map_noise_unchecked(u: &ComplexMatrix, dw: &[f64]) -> Vec<C64> {
    (0..u.cols())
        .map(|j| (0..u.rows()).map(|k| u[(k, j)] * dw[k]).sum())
        .collect()
}

#[derive(Clone, Debug)]
pub struct SValidation {
    pub symmetric: bool,
    pub spectral_norm: f64,
    pub feasible: bool,
}

/// Spectral norm (largest singular value) of a matrix with at most 8 columns.
pub fn spectral_norm(a: &ComplexMatrix) -> Result<f64> {
    let gram = (&a.adjoint() * a).hermitian_part();
    Ok(hermitian_eigen(&gram)?.max().max(0.0).sqrt())
}

pub fn validate_s(s: &ComplexMatrix) -> Result<SValidation> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "correlation matrix must be square, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let symmetric = s.symmetric_defect() <= PARAM_TOL;
    let spectral_norm = spectral_norm(s)?;
    Ok(SValidation {
        symmetric,
        spectral_norm,
        feasible: symmetric && spectral_norm <= 1.0 + PARAM_TOL,
    })
}

/// Takagi factorization `A = V diag(σ) Vᵀ` of a complex symmetric matrix.
#[derive(Clone, Debug)]
pub struct Takagi {
    /// Non-negative, descending.
    pub values: Vec<f64>,
    /// Unitary.
    pub vectors: ComplexMatrix,
}

impl Takagi {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let sigma: Vec<C64> = self.values.iter().map(|&x| C64::new(x, 0.0)).collect();
        &(&self.vectors * &ComplexMatrix::diagonal(&sigma)) * &self.vectors.transpose()
    }
}

/// Takagi factorization for `n ≤ 4`.
///
/// With `A = B + iC` the real symmetric matrix `[[B, C], [C, -B]]` has
/// spectrum `±σⱼ`; an eigenvector `(x, y)` for `+σ` gives `w = x + iy` with
/// `A w̄ = σ w`. Vectors for `σ > TAKAGI_TIE_TOL` are taken in descending
/// order, re-orthonormalized in `Cⁿ`, and the null block is completed by
/// Gram–Schmidt on the standard basis.
pub fn takagi(a: &ComplexMatrix) -> Result<Takagi> {
    if !a.is_square() {
        return Err(Error::Dimension("Takagi factorization needs a square matrix".into()));
    }
    let n = a.rows();
    if 2 * n > crate::algebra::MAX_DIM {
        return Err(Error::Dimension(format!(
            "Takagi factorization supports n <= {}, got {n}",
            crate::algebra::MAX_DIM / 2
        )));
    }
    if a.symmetric_defect() > PARAM_TOL {
        return Err(Error::Validation("Takagi factorization needs a symmetric matrix".into()));
    }

    let embed = ComplexMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ri) = (i / n, i % n);
        let (bj, rj) = (j / n, j % n);
        let z = (a[(ri, rj)] + a[(rj, ri)]) * 0.5;
        let v = match (bi, bj) {
            (0, 0) => z.re,
            (1, 1) => -z.re,
            _ => z.im,
        };
        C64::new(v, 0.0)
    });
    let eig = hermitian_eigen(&embed)?;

    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    for idx in (0..2 * n).rev() {
        if columns.len() == n || eig.values[idx] <= TAKAGI_TIE_TOL {
            break;
        }
        let w: Vec<C64> = (0..n)
            .map(|r| C64::new(eig.vectors[(r, idx)].re, eig.vectors[(n + r, idx)].re))
            .collect();
        if let Some(w) = orthonormalize_against(&w, &columns) {
            values.push(eig.values[idx]);
            columns.push(w);
        }
    }
    for k in 0..n {
        if columns.len() == n {
            break;
        }
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[k] = C64::new(1.0, 0.0);
        if let Some(w) = orthonormalize_against(&e, &columns) {
            values.push(0.0);
            columns.push(w);
        }
    }

    let mut vectors = ComplexMatrix::zeros(n, n);
    for (j, col) in columns.iter().enumerate() {
        vectors.set_column(j, col);
    }
    Ok(Takagi { values, vectors })
}

/// Two-pass modified Gram–Schmidt; `None` if `v` is (numerically) in the span.
fn orthonormalize_against(v: &[C64], basis: &[Vec<C64>]) -> Option<Vec<C64>> {
    let mut w = v.to_vec();
    let start = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for _ in 0..2 {
        for b in basis {
            let proj: C64 = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= proj * bi;
            }
        }
    }
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 1e-8 * start.max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(w.into_iter().map(|z| z / norm).collect())
}

/// Canonical `2n×n` isometric noise matrix realizing `s`.
///
/// With `s* = V diag(σ) Vᵀ`, `pⱼ = √((1+σⱼ)/2)`, `qⱼ = √((1-σⱼ)/2)`, the block
/// matrix `ũ` with `ũⱼⱼ = pⱼ`, `ũₙ₊ⱼ,ⱼ = i qⱼ` gives `u = ũ Vᵀ`.
pub fn u_from_s(s: &CorrelationMatrix) -> Result<NoiseMatrix> {
    let n = s.dim();
    let t = takagi(&s.matrix().conj())?;
    let mut tilde = ComplexMatrix::zeros(2 * n, n);
    for (j, &sigma) in t.values.iter().enumerate() {
        let sigma = sigma.clamp(0.0, 1.0);
        tilde[(j, j)] = C64::new(((1.0 + sigma) / 2.0).sqrt(), 0.0);
        tilde[(n + j, j)] = C64::new(0.0, ((1.0 - sigma) / 2.0).sqrt());
    }
    NoiseMatrix::new(&tilde * &t.vectors.transpose())
}

/// Random `N×n` isometry: Gram–Schmidt on complex Gaussian columns.
pub fn random_isometry(stream: &mut NormalStream, big_n: usize, n: usize) -> Result<NoiseMatrix> {
    if n == 0 || big_n < n {
        return Err(Error::Usage(format!("need N >= n >= 1, got N = {big_n}, n = {n}")));
    }
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    while columns.len() < n {
        let g: Vec<C64> = (0..big_n)
            .map(|_| C64::new(stream.next_normal(), stream.next_normal()))
            .collect();
        if let Some(w) = orthonormalize_against(&g, &columns) {
            columns.push(w);
        }
    }
    let mut u = ComplexMatrix::zeros(big_n, n);
    for (j, col) in columns.iter().enumerate() {
        u.set_column(j, col);
    }
    NoiseMatrix::new(u)
}

/// Random real orthogonal matrix from the QR (Gram–Schmidt) of a Gaussian
/// matrix.
pub fn random_orthogonal(stream: &mut NormalStream, n: usize) -> Result<OrthogonalMatrix> {
    if n == 0 {
        return Err(Error::Usage("orthogonal matrix needs n >= 1".into()));
    }
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    while columns.len() < n {
        let g: Vec<C64> = (0..n).map(|_| C64::new(stream.next_normal(), 0.0)).collect();
        if let Some(w) = orthonormalize_against(&g, &columns) {
            columns.push(w.into_iter().map(|z| C64::new(z.re, 0.0)).collect());
        }
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| columns.iter().map(|c| c[i].re).collect())
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    OrthogonalMatrix::new(&refs)
}

/// Random complex symmetric `s = (A + Aᵀ)/2` rescaled to spectral norm
/// `target_norm`.
pub fn random_correlation(
    stream: &mut NormalStream,
    n: usize,
    target_norm: f64,
) -> Result<CorrelationMatrix> {
    let a = ComplexMatrix::from_fn(n, n, |_, _| {
        C64::new(stream.next_normal(), stream.next_normal())
    });
    let sym = (&a + &a.transpose()).scale_real(0.5);
    let norm = spectral_norm(&sym)?;
    CorrelationMatrix::new(sym.scale_real(target_norm / norm))
}

#[derive(Clone, Debug)]
pub struct RedundancyWitness {
    /// `max |s(Ou) - s(u)|`.
    pub s_deviation: f64,
    pub s_equal: bool,
    /// Largest per-step state max-norm difference between the two runs.
    pub max_pathwise_deviation: f64,
    pub steps: usize,
}

/// Checks that `u` and `O·u` are the same unraveling.
///
/// Run A uses noise matrix `u` driven by `Oᵀ dW`; run B uses `O·u` driven by
/// `dW`. Since `Σₖ (Ou)ₖⱼ dWₖ = Σₖ uₖⱼ (Oᵀ dW)ₖ` the two are pathwise equal.
#[allow(clippy::too_many_arguments)]
pub fn redundancy_witness(
    u: &NoiseMatrix,
    o: &OrthogonalMatrix,
    hamiltonian: &ComplexMatrix,
    lindblads: &[ComplexMatrix],
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<RedundancyWitness> {
    if o.dim() != u.noise_count() {
        return Err(Error::Dimension(format!(
            "orthogonal matrix is {0}x{0}, noise matrix has N = {1}",
            o.dim(),
            u.noise_count()
        )));
    }
    let ou = u.rotated(o)?;
    let s_deviation = s_from_u(&ou)?
        .matrix()
        .max_abs_diff(s_from_u(u)?.matrix());

    let model_a = GeneralDiffusiveModel::new(hamiltonian.clone(), lindblads.to_vec(), u.clone())?;
    let model_b = GeneralDiffusiveModel::new(hamiltonian.clone(), lindblads.to_vec(), ou)?;
    let steps = crate::master::step_count(t_final, dt);
    let mut noise = NoiseStream::new(seed, 0, u.noise_count(), dt);
    let mut dw = vec![0.0; u.noise_count()];
    let mut a = psi0.clone();
    let mut b = psi0.clone();
    let mut worst = 0.0f64;
    for k in 0..steps {
        noise.increments(k, &mut dw);
        let dv = o.transpose_apply(&dw);
        a = step(&a, &model_a, &dv, dt)?.state;
        b = step(&b, &model_b, &dw, dt)?.state;
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok(RedundancyWitness {
        s_deviation,
        s_equal: s_deviation <= 1e-12,
        max_pathwise_deviation: worst,
        steps,
    })
}
