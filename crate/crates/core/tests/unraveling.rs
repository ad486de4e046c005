use sse_unravel::algebra::{bloch_from_state, paulis, random_state, ComplexMatrix, StateVector};
use sse_unravel::exec::Parallelism;
use sse_unravel::master::{integrate_master_at, DensityMatrix, RateVector};
use sse_unravel::param::random_isometry;
use sse_unravel::rng::{CounterRng, NormalStream};
use sse_unravel::sse::{
    ensemble_density, simulate_trajectory, EnsembleSpec, GeneralDiffusiveModel, NonCpQubitModel,
};
use sse_unravel::C64;

fn gaussian_matrix(s: &mut NormalStream, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |_, _| C64::new(s.next_normal(), s.next_normal()).scale(scale))
}

#[test]
fn complement_phase_changes_paths_not_ensembles() {
    let psi0 = StateVector::new(vec![C64::new(0.8, 0.0), C64::new(0.0, 0.6)]).unwrap();
    let plain = NonCpQubitModel::new(RateVector::NON_CP);
    let turned = NonCpQubitModel::new(RateVector::NON_CP).with_perp_phase(1.3);

    let a = simulate_trajectory(&plain, &psi0, 0.25, 1e-3, 9, 0).unwrap();
    let b = simulate_trajectory(&turned, &psi0, 0.25, 1e-3, 9, 0).unwrap();
    let gap = bloch_from_state(a.states.last().unwrap())
        .unwrap()
        .max_abs_diff(&bloch_from_state(b.states.last().unwrap()).unwrap());
    assert!(gap > 1e-3, "trajectories should differ, gap {gap}");

    let spec = EnsembleSpec::uniform(0.25, 1e-3, 1, 20_000, 9);
    let ea = ensemble_density(&plain, &psi0, &spec).unwrap();
    let eb = ensemble_density(&turned, &psi0, &EnsembleSpec { seed: 10, ..spec }).unwrap();
    let (na, nb) = (&ea.mean_bloch.unwrap()[0], &eb.mean_bloch.unwrap()[0]);
    let (sa, sb) = (ea.standard_error.unwrap()[0], eb.standard_error.unwrap()[0]);
    for k in 0..3 {
        let bound = 3.0 * 2f64.sqrt() * sa[k].max(sb[k]);
        assert!((na.0[k] - nb.0[k]).abs() <= bound, "component {k}: {} vs {}", na.0[k], nb.0[k]);
    }
}

#[test]
fn random_general_models_unravel_their_lindblad_equation() {
    let dt = 1e-3;
    for case in 0..3u64 {
        let mut s = CounterRng::new(600).aux_stream(case);
        let h = {
            let a = gaussian_matrix(&mut s, 0.5);
            (&a + &a.adjoint()).scale_real(0.5)
        };
        let channels = 1 + case as usize % 2;
        let lindblads: Vec<ComplexMatrix> = (0..channels).map(|_| gaussian_matrix(&mut s, 0.5)).collect();
        let u = random_isometry(&mut s, channels + 1, channels).unwrap();
        let model = GeneralDiffusiveModel::new(h, lindblads, u).unwrap();
        let psi0 = random_state(&mut s, 0, 2).unwrap();

        let spec = EnsembleSpec::uniform(0.5, dt, 5, 10_000, 70 + case);
        let est = ensemble_density(&model, &psi0, &spec).unwrap();
        let master = integrate_master_at(
            &DensityMatrix::from_pure(&psi0).unwrap(),
            &model.master_generator().unwrap(),
            dt,
            &spec.report_steps,
        )
        .unwrap();
        for (g, rho) in master.iter().enumerate() {
            let want = rho.bloch().unwrap();
            let got = &est.mean_bloch.as_ref().unwrap()[g];
            let se = est.standard_error.as_ref().unwrap()[g];
            for k in 0..3 {
                let dev = (got.0[k] - want.0[k]).abs();
                assert!(dev <= 3.0 * se[k] + 2.0 * dt, "case {case}, grid {g}, component {k}: {dev} vs SE {}", se[k]);
            }
        }
    }
}

#[test]
fn general_ensembles_ignore_thread_count() {
    let model = GeneralDiffusiveModel::new(
        paulis()[0].scale_real(0.3),
        vec![paulis()[2].scale_real(0.8), ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])],
        sse_unravel::param::NoiseMatrix::identity(2),
    )
    .unwrap();
    let base = EnsembleSpec::uniform(0.1, 1e-3, 3, 500, 1);
    let runs: Vec<_> = [Parallelism::Sequential, Parallelism::Auto, Parallelism::Threads(3)]
        .into_iter()
        .map(|p| ensemble_density(&model, &StateVector::plus(), &base.clone().with_parallelism(p)).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.mean_density, runs[0].mean_density);
        assert_eq!(r.standard_error, runs[0].standard_error);
    }
}

#[test]
fn trajectories_stay_normalized() {
    let model = GeneralDiffusiveModel::pauli(RateVector::new(0.2, 0.9, 0.4).unwrap()).unwrap();
    let t = simulate_trajectory(&model, &StateVector::plus(), 1.0, 1e-3, 3, 4).unwrap();
    for psi in &t.states {
        assert!((psi.norm_sqr().sqrt() - 1.0).abs() <= 1e-14);
    }
}
