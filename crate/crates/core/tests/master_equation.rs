use sse_unravel::algebra::{paulis, random_state, BlochVector, ComplexMatrix};
use sse_unravel::exec::Parallelism;
use sse_unravel::master::{
    analytic_pauli_solution, choi_matrix, cp_verdict, extract_map, integrate_master, integrate_master_at,
    positivity_verdict, DensityMatrix, DynamicalMap, MasterGenerator, RateVector, DEFAULT_CP_TOL,
};
use sse_unravel::rng::{CounterRng, NormalStream};
use sse_unravel::C64;

fn uniform(s: &mut NormalStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.next_uniform()
}

fn random_bloch_ball(s: &mut NormalStream, index: u64) -> BlochVector {
    let r = s.next_uniform();
    let n = sse_unravel::algebra::bloch_from_state(&random_state(s, index, 2).unwrap()).unwrap();
    BlochVector(n.0.map(|x| r * x))
}

/// Closed form of `ṅⱼ = -2(C - cⱼ) nⱼ`, written out independently of the library.
fn exact_bloch(n0: &BlochVector, c: [f64; 3], t: f64) -> [f64; 3] {
    let total = c[0] + c[1] + c[2];
    [0, 1, 2].map(|j| n0.0[j] * (-2.0 * (total - c[j]) * t).exp())
}

#[test]
fn rk4_tracks_closed_form_for_signed_rates() {
    let mut s = CounterRng::new(31).aux_stream(0);
    let mut worst_abs = 0.0f64;
    let mut worst_rel = 0.0f64;
    for i in 0..100 {
        let n0 = random_bloch_ball(&mut s, i);
        let c = [0; 3].map(|_| uniform(&mut s, -2.0, 2.0));
        let t = s.next_uniform();
        let rho = integrate_master(
            &DensityMatrix::from_bloch(&n0),
            &MasterGenerator::pauli(RateVector(c)),
            t,
            1e-3,
        )
        .unwrap();
        let got = rho.bloch().unwrap();
        let want = exact_bloch(&n0, c, t);
        let scale = BlochVector(want).norm().max(1.0);
        let err = got.max_abs_diff(&BlochVector(want));
        worst_abs = worst_abs.max(err);
        worst_rel = worst_rel.max(err / scale);
        assert!(
            analytic_pauli_solution(&n0, &RateVector(c), t).max_abs_diff(&BlochVector(want)) <= 1e-15 * scale
        );
    }
    assert!(worst_abs <= 1e-7, "absolute error {worst_abs:.3e} (relative {worst_rel:.3e})");
}

#[test]
fn rk4_error_is_relative_in_the_growing_corner() {
    // c = (2, -2, -2) grows n₁ like e^{8t}; the absolute error at t = 1 is
    // set by |n₁(1)| ≈ 3e3 times the RK4 relative error.
    let c = [2.0, -2.0, -2.0];
    let n0 = BlochVector::new(1.0, 0.0, 0.0);
    let got = integrate_master(&DensityMatrix::from_bloch(&n0), &MasterGenerator::pauli(RateVector(c)), 1.0, 1e-3)
        .unwrap()
        .bloch()
        .unwrap();
    let want = exact_bloch(&n0, c, 1.0);
    let rel = (got.0[0] - want[0]).abs() / want[0];
    assert!(rel <= 1e-9, "relative error {rel:.3e}");
}

#[test]
fn trace_and_hermiticity_along_trajectory() {
    let h = ComplexMatrix::from_real_rows(&[&[0.3, 0.0], &[0.0, -0.3]]);
    let lower = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
    let g = MasterGenerator::new(
        h,
        vec![(0.7, lower), (-0.4, paulis()[0].clone()), (0.9, paulis()[2].clone())],
    )
    .unwrap();
    let rho0 = DensityMatrix::from_bloch(&BlochVector::new(0.6, 0.0, 0.8));
    let steps: Vec<usize> = (1..=1000).collect();
    for rho in integrate_master_at(&rho0, &g, 1e-3, &steps).unwrap() {
        let m = rho.matrix();
        assert!((m.trace() - C64::new(1.0, 0.0)).norm() <= 1e-10);
        assert!(m.hermitian_defect() <= 1e-11);
    }
}

#[test]
fn rk4_is_fourth_order() {
    for c in [[1.0, 1.0, -1.0], [0.3, 0.7, 0.2], [-0.5, 1.5, 0.4]] {
        let n0 = BlochVector::new(0.48, 0.6, 0.64);
        let want = BlochVector(exact_bloch(&n0, c, 1.0));
        let err = |dt: f64| {
            integrate_master(&DensityMatrix::from_bloch(&n0), &MasterGenerator::pauli(RateVector(c)), 1.0, dt)
                .unwrap()
                .bloch()
                .unwrap()
                .max_abs_diff(&want)
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let order = (e1 / e2).log2();
        assert!(order >= 3.7, "c = {c:?}: order {order:.3}");
    }
}

/// Unnormalized Choi matrix of `ρ ↦ Σₖ pₖ σₖ ρ σₖ` built from its Kraus form:
/// `Σₖ pₖ |σₖ⟩⟩⟨⟨σₖ|` with row-major vectorization.
fn pauli_channel_choi(p: [f64; 4]) -> ComplexMatrix {
    let mut ops = vec![ComplexMatrix::identity(2)];
    ops.extend(paulis());
    let mut c = ComplexMatrix::zeros(4, 4);
    for (pk, s) in p.iter().zip(&ops) {
        let v = s.as_slice();
        c = c.add_scaled(&ComplexMatrix::outer(v, v), C64::new(*pk, 0.0));
    }
    c
}

#[test]
fn choi_of_diagonal_bloch_maps_matches_kraus_form() {
    let mut s = CounterRng::new(4).aux_stream(0);
    for _ in 0..200 {
        let l = [0; 3].map(|_| uniform(&mut s, -1.0, 1.0));
        let map = DynamicalMap::from_bloch([[l[0], 0.0, 0.0], [0.0, l[1], 0.0], [0.0, 0.0, l[2]]], [0.0; 3], 0.0);
        let p = [
            (1.0 + l[0] + l[1] + l[2]) / 4.0,
            (1.0 + l[0] - l[1] - l[2]) / 4.0,
            (1.0 - l[0] + l[1] - l[2]) / 4.0,
            (1.0 - l[0] - l[1] + l[2]) / 4.0,
        ];
        let choi = choi_matrix(&map);
        assert!(choi.matrix().max_abs_diff(&pauli_channel_choi(p)) <= 1e-14);
        let mut sorted = p;
        sorted.sort_by(f64::total_cmp);
        let v = cp_verdict(&choi, DEFAULT_CP_TOL).unwrap();
        for (a, b) in v.spectrum.iter().zip(sorted) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(v.cp, sorted[0] >= -DEFAULT_CP_TOL);
    }
}

#[test]
fn noncp_witness_deepens_with_time() {
    let g = MasterGenerator::pauli(RateVector::NON_CP);
    let mut prev = 0.0;
    for k in 1..=10 {
        let t = 0.1 * k as f64;
        let v = cp_verdict(&choi_matrix(&extract_map(&g, t, 1e-3, Parallelism::Sequential).unwrap()), DEFAULT_CP_TOL)
            .unwrap();
        let want = ((-4.0 * t).exp() - 1.0) / 4.0;
        assert!((v.min_eigenvalue - want).abs() <= 1e-9);
        assert!(v.min_eigenvalue < prev);
        assert!(!v.cp);
        prev = v.min_eigenvalue;
    }
}

#[test]
fn depolarizing_rates_are_cp() {
    let g = MasterGenerator::pauli(RateVector([1.0, 1.0, 1.0]));
    for t in [0.0, 0.1, 0.5, 2.0] {
        let v = cp_verdict(&choi_matrix(&extract_map(&g, t, 1e-3, Parallelism::Auto).unwrap()), DEFAULT_CP_TOL)
            .unwrap();
        let l = (-4.0 * t).exp();
        assert!(v.cp);
        assert!((v.min_eigenvalue - (1.0 - l) / 4.0).abs() <= 1e-9);
    }
}

#[test]
fn stretched_bloch_map_is_not_positive() {
    let map = DynamicalMap::from_bloch([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.5]], [0.0; 3], 0.0);
    let v = positivity_verdict(&map, 2000, &CounterRng::new(1).aux_stream(0), Parallelism::Auto).unwrap();
    assert!(!v.positive_on_samples);
    assert!(v.min_output_eigenvalue >= -0.25 - 1e-12);
    let south = DensityMatrix::from_bloch(&BlochVector::new(0.0, 0.0, -1.0));
    let out = map.apply(south.matrix()).unwrap();
    assert!((out[(0, 0)].re - (1.0 - 1.5) / 2.0).abs() < 1e-15);
}

#[test]
fn extracted_map_is_the_propagator() {
    let h = ComplexMatrix::from_real_rows(&[&[0.0, 0.4], &[0.4, 0.2]]);
    let lower = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
    let g = MasterGenerator::lindblad(h, &[lower.scale_real(0.8), paulis()[2].scale_real(0.5)]).unwrap();
    let map = extract_map(&g, 0.7, 1e-3, Parallelism::Auto).unwrap();
    assert!(map.trace_preservation_defect() <= 1e-10);
    assert!(map.hermiticity_defect() <= 1e-10);
    let mut s = CounterRng::new(12).aux_stream(0);
    for i in 0..20 {
        let rho = DensityMatrix::from_bloch(&random_bloch_ball(&mut s, i));
        let direct = integrate_master(&rho, &g, 0.7, 1e-3).unwrap();
        assert!(map.apply(rho.matrix()).unwrap().max_abs_diff(direct.matrix()) <= 1e-12);
    }
    let v = cp_verdict(&choi_matrix(&map), DEFAULT_CP_TOL).unwrap();
    assert!(v.cp, "Lindblad evolution must be CP, min eigenvalue {}", v.min_eigenvalue);
}
