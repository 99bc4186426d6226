//! Mean-field amplitudes driven by thermal noise.
//!
//! Each mode follows
//!
//! ```text
//! dα_i = f_i(α) dt + sqrt(γ n̄ / 2) (i dW_i1 + dW_i2)
//! ```
//!
//! with `f` the mean-field drift of [`crate::model::classical_drift`] and two
//! independent Wiener channels per mode. The `α*` equation is the complex
//! conjugate of this one, so only `α` is stored.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dynamics::EvolutionConfig;
use crate::error::{Error, Result};
use crate::model::{classical_drift, drift, AdjacencyMatrix, ModelParams};
use crate::noise::BrownianPath;

/// One stochastic mean-field trajectory sampled at the stored times.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalTrajectory {
    pub trajectory_id: u64,
    pub seed: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `α_i`, indexed `[mode][time]`.
    pub alphas: Vec<Vec<C64>>,
    /// `j_i = α_i + α_i* = 2 Re α_i`.
    pub currents: Vec<Vec<f64>>,
}

/// Euler–Maruyama integration from `alpha0`; trajectory `id` of the ensemble
/// with master seed `cfg.seed`.
pub fn classical_sde_trajectory(
    alpha0: &[C64],
    p: &ModelParams,
    s: &AdjacencyMatrix,
    cfg: &EvolutionConfig,
    id: u64,
) -> Result<ClassicalTrajectory> {
    cfg.validate()?;
    classical_drift(alpha0, p, s)?;
    let n = alpha0.len();
    let dt = cfg.dt;
    let noise = (p.gamma * p.nbar / 2.0).sqrt();
    let start = alpha0.iter().map(|a| a.norm()).fold(p.alpha0(), f64::max);
    let limit = 10.0 * start + 10.0;
    let mut path = (noise > 0.0).then(|| BrownianPath::new(cfg.seed, id, 2 * n, dt, cfg.bridge_levels));

    let cap = cfg.n_steps() / cfg.store_stride + 1;
    let mut out = ClassicalTrajectory {
        trajectory_id: id,
        seed: cfg.seed,
        dt,
        times: Vec::with_capacity(cap),
        alphas: vec![Vec::with_capacity(cap); n],
        currents: vec![Vec::with_capacity(cap); n],
    };
    let record = |t: f64, alpha: &[C64], out: &mut ClassicalTrajectory| {
        out.times.push(t);
        for (i, a) in alpha.iter().enumerate() {
            out.alphas[i].push(*a);
            out.currents[i].push(2.0 * a.re);
        }
    };
    let mut alpha = alpha0.to_vec();
    record(0.0, &alpha, &mut out);
    for step in 1..=cfg.n_steps() {
        let f = drift(&alpha, p, s);
        for (a, fi) in alpha.iter_mut().zip(&f) {
            *a += fi * dt;
        }
        if let Some(path) = path.as_mut() {
            let dw = path.next_increments();
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += noise * C64::new(dw[2 * i + 1], dw[2 * i]);
            }
        }
        let worst = alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if !(worst <= limit) {
            return Err(Error::Divergence { step, magnitude: worst });
        }
        if step % cfg.store_stride == 0 {
            record(step as f64 * dt, &alpha, &mut out);
        }
    }
    Ok(out)
}

/// `m` trajectories with ids `0..m`, computed in parallel and returned in
/// id order.
pub fn classical_ensemble(
    alpha0: &[C64],
    p: &ModelParams,
    s: &AdjacencyMatrix,
    cfg: &EvolutionConfig,
    m: usize,
) -> Result<Vec<ClassicalTrajectory>> {
    (0..m as u64)
        .into_par_iter()
        .map(|k| classical_sde_trajectory(alpha0, p, s, cfg, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::CVector;
    use crate::model::{fixed_points, linearized_generator};

    fn fig3(nbar: f64) -> ModelParams {
        ModelParams::closed(2, 15, 0.5, 0.0, 1.0, 1.0)
            .unwrap()
            .with_damping(1.0, nbar)
            .unwrap()
    }

    #[test]
    fn origin_is_exactly_stationary_without_noise() {
        let p = fig3(0.0);
        let cfg = EvolutionConfig::new(1e-3, 4.0, 100, 9).unwrap();
        let zero = [C64::new(0.0, 0.0); 2];
        let tr = classical_sde_trajectory(&zero, &p, &AdjacencyMatrix::pair(), &cfg, 0).unwrap();
        assert!(tr.alphas.iter().flatten().all(|a| *a == C64::new(0.0, 0.0)));
        assert!(tr.currents.iter().flatten().all(|j| *j == 0.0));
    }

    #[test]
    fn noise_free_runs_ignore_the_seed() {
        let p = fig3(0.0);
        let a0 = [C64::new(0.1, -0.05), C64::new(-0.02, 0.03)];
        let run = |seed| {
            let cfg = EvolutionConfig::new(1e-3, 2.0, 50, seed).unwrap();
            classical_sde_trajectory(&a0, &p, &AdjacencyMatrix::pair(), &cfg, 3).unwrap()
        };
        assert_eq!(run(1).alphas, run(2).alphas);
    }

    #[test]
    fn stable_roots_stay_put() {
        let p = fig3(0.0);
        let s = AdjacencyMatrix::pair();
        let report = fixed_points(&p, &s).unwrap();
        let root = report.stable().next().expect("a stable root");
        let cfg = EvolutionConfig::new(1e-3, 5.0, 100, 0).unwrap();
        let tr = classical_sde_trajectory(&root.alpha, &p, &s, &cfg, 0).unwrap();
        for (i, series) in tr.alphas.iter().enumerate() {
            for a in series {
                assert!((a - root.alpha[i]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn refining_the_step_converges() {
        let p = ModelParams::closed(1, 12, 0.5, 0.0, 0.5, 0.0).unwrap();
        let s = AdjacencyMatrix::uncoupled(1);
        let a0 = [C64::new(0.7, 0.2)];
        let run = |dt: f64| {
            let cfg = EvolutionConfig::new(dt, 1.0, (0.1 / dt).round() as usize, 0).unwrap();
            classical_sde_trajectory(&a0, &p, &s, &cfg, 0).unwrap()
        };
        let coarse = run(1e-4);
        let fine = run(1e-5);
        let a = coarse.alphas[0].last().unwrap();
        let b = fine.alphas[0].last().unwrap();
        assert!((a - b).norm() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn small_displacements_follow_the_linearised_flow() {
        let p = fig3(0.0);
        let s = AdjacencyMatrix::pair();
        let delta = [C64::new(1e-4, 2e-5), C64::new(-3e-5, 5e-5)];
        let cfg = EvolutionConfig::new(1e-5, 0.5, 50_000, 0).unwrap();
        let tr = classical_sde_trajectory(&delta, &p, &s, &cfg, 0).unwrap();
        let zero = [C64::new(0.0, 0.0); 2];
        let j = linearized_generator(&zero, &p, &s, true).unwrap();
        let v0 = CVector::from_vec(vec![delta[0], delta[0].conj(), delta[1], delta[1].conj()]);
        let flow = (j * C64::new(0.5, 0.0)).exp() * v0;
        for i in 0..2 {
            let got = tr.alphas[i].last().unwrap();
            let rel = (got - flow[2 * i]).norm() / flow[2 * i].norm().max(1e-12);
            assert!(rel < 1e-4, "mode {i}: {got} vs {}", flow[2 * i]);
        }
    }

    #[test]
    fn divergence_is_reported_with_its_step() {
        let p = ModelParams::closed(1, 12, 0.5, 0.0, 0.5, 0.0).unwrap();
        let s = AdjacencyMatrix::uncoupled(1);
        let cfg = EvolutionConfig::new(0.5, 50.0, 1, 0).unwrap();
        let err = classical_sde_trajectory(&[C64::new(3.0, 0.0)], &p, &s, &cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Divergence { step, .. } if step >= 1));
    }

    #[test]
    fn thermal_noise_reaches_equipartition_without_drive() {
        let p = ModelParams::closed(1, 12, 1e-6, 0.0, 0.0, 0.0)
            .unwrap()
            .with_damping(1.0, 0.8)
            .unwrap();
        let s = AdjacencyMatrix::uncoupled(1);
        let cfg = EvolutionConfig::new(1e-3, 8.0, 8000, 21).unwrap();
        let ens = classical_ensemble(&[C64::new(0.0, 0.0)], &p, &s, &cfg, 400).unwrap();
        let mean_n: f64 = ens.iter().map(|t| t.alphas[0].last().unwrap().norm_sqr()).sum::<f64>() / 400.0;
        // P-representation thermal state: <|α|²> = n̄
        assert!((mean_n - 0.8).abs() < 0.15, "{mean_n}");
    }

    #[test]
    fn ensemble_matches_single_runs() {
        let p = fig3(0.5);
        let s = AdjacencyMatrix::pair();
        let cfg = EvolutionConfig::new(1e-3, 0.5, 10, 4).unwrap();
        let zero = [C64::new(0.0, 0.0); 2];
        let ens = classical_ensemble(&zero, &p, &s, &cfg, 4).unwrap();
        assert_eq!(ens[2], classical_sde_trajectory(&zero, &p, &s, &cfg, 2).unwrap());
        assert_ne!(ens[1].alphas, ens[2].alphas);
    }
}
