use super::sme::measurement_channels;
use super::*;
use crate::hilbert::{coherent_state, expectation, number, StateVector};
use crate::model::{cavity_hamiltonian, network_hamiltonian, AdjacencyMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_density(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let mut r = &g * g.adjoint();
    let tr = r.trace();
    r /= tr;
    r
}

fn dissipator(l: &CsrMatrix, rho: &CMatrix) -> CMatrix {
    let ld = l.to_dense();
    let ldl = ld.adjoint() * &ld;
    &ld * rho * ld.adjoint() - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0)
}

fn single(d: usize, chi: f64, delta: f64, eps: f64, gamma: f64, nbar: f64) -> (ModelParams, Operator) {
    let p = ModelParams::closed(1, d, chi, delta, eps, 0.0)
        .unwrap()
        .with_damping(gamma, nbar)
        .unwrap();
    let h = cavity_hamiltonian(&p, 0).unwrap();
    (p, h)
}

#[test]
fn generator_is_trace_free_and_hermiticity_preserving() {
    let (p, h) = single(10, 1.0, 0.3, 0.4, 0.7, 0.4);
    let rho = DensityMatrix::new(vec![10], random_density(10, 3)).unwrap();
    let l = lindblad_rhs(&rho, &h, &p).unwrap();
    assert!(l.trace().norm() < 1e-12);
    assert!((&l - l.adjoint()).norm() < 1e-12);
}

#[test]
fn vacuum_is_dark_without_pump() {
    let (p, h) = single(8, 1.0, 0.5, 0.0, 1.0, 0.0);
    let vac = StateVector::vacuum(&[8]).unwrap().to_density();
    assert!(lindblad_rhs(&vac, &h, &p).unwrap().norm() < 1e-14);
}

#[test]
fn number_relaxes_at_thermal_rate() {
    let (p, h) = single(8, 1.0, 0.5, 0.0, 0.8, 0.3);
    let n_op = number(8).unwrap();
    for k in 0..4 {
        let rho = StateVector::basis(&[8], &[k]).unwrap().to_density();
        let lr = lindblad_rhs(&rho, &h, &p).unwrap();
        let rate = (n_op.matrix() * lr).trace().re;
        assert!((rate - 0.8 * (0.3 - k as f64)).abs() < 1e-12, "k={k}: {rate}");
    }
}

#[test]
fn lindblad_rhs_matches_direct_formula() {
    let (p, h) = single(9, 0.7, -0.2, 0.35, 0.6, 0.8);
    let rho = random_density(9, 5);
    let mut want = (h.matrix() * &rho - &rho * h.matrix()) * C64::new(0.0, -1.0);
    for j in thermal_jumps(&[9], p.gamma, p.nbar) {
        want += dissipator(&j, &rho);
    }
    let got = lindblad_rhs(&DensityMatrix::new(vec![9], rho).unwrap(), &h, &p).unwrap();
    assert!((got - want).norm() < 1e-12);
}

#[test]
fn superoperator_matches_apply_on_general_matrices() {
    let p = ModelParams::closed(2, 6, 1.0, 0.2, 0.1, 0.3)
        .unwrap()
        .with_damping(0.5, 0.2)
        .unwrap();
    let h = network_hamiltonian(&p, &AdjacencyMatrix::pair()).unwrap();
    let l = Liouvillian::new(&h, &p).unwrap();
    let sup = l.superoperator();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = CMatrix::from_fn(36, 36, |_, _| C64::new(rng.random::<f64>(), rng.random::<f64>()));
    let vec_x = crate::hilbert::CVector::from_column_slice(x.as_slice());
    let via_sup = &sup * vec_x;
    let direct = l.apply(&x).unwrap();
    assert!((CMatrix::from_column_slice(36, 36, via_sup.as_slice()) - direct).norm() < 1e-11);
}

#[test]
fn measured_and_unmeasured_channels_rebuild_thermal_dissipator() {
    let dims = [6usize];
    for &nbar in &[0.0, 0.4, 1.0, 2.5] {
        let (_, c, b) = measurement_channels(&dims, 0.9, nbar).unwrap();
        assert_eq!(b.is_empty(), nbar == 0.0);
        let rho = random_density(6, 17);
        let mut split = CMatrix::zeros(6, 6);
        for op in c.iter().chain(&b) {
            split += dissipator(op, &rho);
        }
        let mut thermal = CMatrix::zeros(6, 6);
        for j in thermal_jumps(&dims, 0.9, nbar) {
            thermal += dissipator(&j, &rho);
        }
        assert!((split - thermal).norm() < 1e-12, "nbar={nbar}");
    }
}

#[test]
fn closed_evolution_conserves_energy_and_purity() {
    let (p, h) = single(14, 1.0, 0.4, 0.8, 0.0, 0.0);
    let psi = coherent_state(C64::new(0.6, 0.2), 14).unwrap();
    let cfg = EvolutionConfig::new(0.005, 1.0, 20, 0).unwrap();
    let sol = evolve_master(&psi.to_density(), &h, &p, &cfg).unwrap();
    let e0 = expectation(&sol.states[0], &h).unwrap().re;
    for s in &sol.states {
        let de = (expectation(s, &h).unwrap().re - e0).abs();
        assert!(de < 1e-7, "energy drift {de}");
        assert!((s.purity() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn thermalisation_follows_exponential_law() {
    let (p, h) = single(14, 1.0, 0.3, 0.0, 1.0, 0.5);
    let vac = StateVector::vacuum(&[14]).unwrap().to_density();
    let cfg = EvolutionConfig::new(0.01, 12.0, 100, 0).unwrap();
    let n_op = number(14).unwrap();
    let sol = evolve_master(&vac, &h, &p, &cfg).unwrap();
    for (t, s) in sol.times.iter().zip(&sol.states) {
        let n = expectation(s, &n_op).unwrap().re;
        assert!((n - 0.5 * (1.0 - (-t).exp())).abs() < 1e-4, "t={t}: {n}");
    }
}

#[test]
fn evolution_approaches_steady_state() {
    let (p, h) = single(10, 1.0, 0.5, 0.3, 1.0, 0.2);
    let ss = steady_state(&h, &p, 1e-9).unwrap();
    let cfg = EvolutionConfig::new(0.01, 25.0, 2500, 0).unwrap();
    let vac = StateVector::vacuum(&[10]).unwrap().to_density();
    let sol = evolve_master(&vac, &h, &p, &cfg).unwrap();
    assert!(sol.states.last().unwrap().trace_distance(&ss).unwrap() < 1e-6);
}

#[test]
fn steady_state_of_undriven_cavity_is_vacuum() {
    let (p, h) = single(6, 1.0, 0.5, 0.0, 1.0, 0.0);
    let ss = steady_state(&h, &p, 1e-10).unwrap();
    assert!((ss.matrix()[(0, 0)].re - 1.0).abs() < 1e-10);
}

#[test]
fn steady_state_paths_agree_and_are_unique() {
    let (p, h) = single(10, 1.0, 0.5, 0.3, 1.0, 0.3);
    let l = Liouvillian::new(&h, &p).unwrap();
    let dense = steady_state_with(&l, &p, &SteadyStateOptions::default()).unwrap();
    let opts = |init: Option<DensityMatrix>| SteadyStateOptions {
        tol: 1e-9,
        dense_limit: 0,
        initial: init,
        ..Default::default()
    };
    let from_vac = steady_state_with(&l, &p, &opts(None)).unwrap();
    let from_mixed = steady_state_with(&l, &p, &opts(Some(DensityMatrix::maximally_mixed(&[10]).unwrap()))).unwrap();
    assert!(dense.trace_distance(&from_vac).unwrap() < 1e-7);
    assert!(from_vac.trace_distance(&from_mixed).unwrap() < 1e-7);
}

#[test]
fn closed_system_has_no_steady_state() {
    let (p, h) = single(6, 1.0, 0.5, 0.1, 0.0, 0.0);
    assert!(matches!(steady_state(&h, &p, 1e-8), Err(Error::NoSteadyState(_))));
}

#[test]
fn config_validation_and_halving() {
    assert!(EvolutionConfig::new(0.0, 1.0, 1, 0).is_err());
    assert!(EvolutionConfig::new(0.1, 0.05, 1, 0).is_err());
    assert!(EvolutionConfig::new(0.1, 1.0, 0, 0).is_err());
    let cfg = EvolutionConfig::new(0.01, 1.0, 10, 4).unwrap();
    assert_eq!(cfg.store_times().len(), 11);
    assert_eq!(cfg.halved().store_times(), cfg.store_times());
}

fn sme_setup(nbar: f64, gamma: f64) -> (ModelParams, Operator, InitialState) {
    let (p, h) = single(10, 1.0, 0.4, 0.3, gamma, nbar);
    let psi = coherent_state(C64::new(0.8, -0.3), 10).unwrap();
    (p, h, psi.into())
}

#[test]
fn sme_requires_damping() {
    let (p, h, init) = sme_setup(0.0, 0.0);
    let cfg = EvolutionConfig::new(0.01, 0.1, 1, 0).unwrap();
    assert!(sme_trajectory(&init, &h, &p, &cfg, 0).is_err());
}

#[test]
fn sme_records_have_requested_layout_and_are_reproducible() {
    let (p, h, init) = sme_setup(0.0, 1.0);
    let cfg = EvolutionConfig::new(0.01, 1.0, 10, 42).unwrap();
    let sme = Sme::from_operator(&h, &p).unwrap();
    let a = sme.trajectory(&init, &cfg, 3).unwrap();
    assert_eq!(a.times, cfg.store_times());
    assert_eq!(a.cond_x[0].len(), a.times.len());
    assert_eq!(a, sme.trajectory(&init, &cfg, 3).unwrap());
    assert_ne!(a.currents, sme.trajectory(&init, &cfg, 4).unwrap().currents);
    let ens = sme.ensemble(&init, &cfg, 5).unwrap();
    assert_eq!(ens[3], a);
    let x0 = std::f64::consts::SQRT_2 * 0.8;
    assert!((a.cond_x[0][0] - x0).abs() < 1e-6);
    assert!((a.currents[0][0] - x0).abs() < 1e-6);
}

#[test]
fn pure_and_density_paths_agree_at_zero_temperature() {
    let (p, h, init) = sme_setup(0.0, 1.0);
    let cfg = EvolutionConfig::new(0.005, 2.0, 20, 7).unwrap();
    let pure = Sme::from_operator(&h, &p).unwrap().trajectory(&init, &cfg, 1).unwrap();
    let mixed = Sme::from_operator(&h, &p)
        .unwrap()
        .force_density(true)
        .trajectory(&init, &cfg, 1)
        .unwrap();
    for (x, y) in pure.cond_a[0].iter().zip(&mixed.cond_a[0]) {
        assert!((x - y).norm() < 1e-9);
    }
}

#[test]
fn weak_damping_reproduces_unitary_evolution() {
    let (p, h, init) = sme_setup(0.0, 1e-6);
    let cfg = EvolutionConfig::new(0.002, 2.0, 50, 1).unwrap();
    let traj = sme_trajectory(&init, &h, &p, &cfg, 0).unwrap();
    let InitialState::Pure(psi) = &init else { unreachable!() };
    let a = crate::hilbert::annihilation(10).unwrap();
    let (_, vals) = master_expectations(&psi.to_density(), &Liouvillian::new(&h, &p).unwrap(), &cfg, &[a]).unwrap();
    for (x, y) in traj.cond_a[0].iter().zip(&vals[0]) {
        assert!((x - y).norm() < 1e-3, "{x} vs {y}");
    }
}

#[test]
fn ensemble_average_unravels_master_equation() {
    for &nbar in &[0.0, 0.5] {
        let (p, h, init) = sme_setup(nbar, 1.0);
        let cfg = EvolutionConfig::new(0.002, 1.5, 150, 11).unwrap();
        let m = 160;
        let ens = sme_ensemble(&init, &h, &p, &cfg, m).unwrap();
        let InitialState::Pure(psi) = &init else { unreachable!() };
        let a = crate::hilbert::annihilation(10).unwrap();
        let (_, vals) = master_expectations(&psi.to_density(), &Liouvillian::new(&h, &p).unwrap(), &cfg, &[a]).unwrap();
        for (k, want) in vals[0].iter().enumerate() {
            for part in [|z: C64| z.re, |z: C64| z.im] {
                let xs: Vec<f64> = ens.iter().map(|r| part(r.cond_a[0][k])).collect();
                let mean = xs.iter().sum::<f64>() / m as f64;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
                let err = (mean - part(*want)).abs();
                assert!(
                    err < 4.0 * sd / (m as f64).sqrt() + 5e-3,
                    "nbar={nbar} k={k}: {mean} vs {}",
                    part(*want)
                );
            }
        }
    }
}

#[test]
fn halving_the_step_refines_the_same_trajectory() {
    let (p, h, init) = sme_setup(0.0, 1.0);
    let cfg = EvolutionConfig::new(0.004, 2.0, 25, 5).unwrap();
    let sme = Sme::from_operator(&h, &p).unwrap();
    let coarse = sme.trajectory(&init, &cfg, 2).unwrap();
    let fine = sme.trajectory(&init, &cfg.halved(), 2).unwrap();
    assert_eq!(coarse.times.len(), fine.times.len());
    let dev = coarse.cond_x[0]
        .iter()
        .zip(&fine.cond_x[0])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(dev < 0.02, "max deviation {dev}");
}

#[test]
fn sme_density_stays_physical_at_finite_temperature() {
    let (p, h, init) = sme_setup(1.0, 1.0);
    let cfg = EvolutionConfig::new(0.002, 1.0, 100, 3).unwrap();
    let traj = sme_trajectory(&init, &h, &p, &cfg, 0).unwrap();
    assert!(traj.cond_x[0].iter().all(|x| x.is_finite()));
    // thermal noise pulls the amplitude toward the driven steady value
    assert!(traj.cond_a[0].last().unwrap().norm() < 3.0);
}
