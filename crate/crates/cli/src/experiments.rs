//! Experiment drivers: each turns a resolved config into output tables.

use std::collections::BTreeMap;
use std::path::Path;

use kerr_ising_core::classical::{classical_ensemble, ClassicalTrajectory};
use kerr_ising_core::dynamics::{
    master_expectations, steady_state_with, EvolutionConfig, InitialState, Liouvillian, Sme, SteadyStateOptions,
    TrajectoryRecord,
};
use kerr_ising_core::entanglement::{
    diagonal_interference_minima, joint_photon_distribution, log_negativity, log_negativity_pure, Bipartition,
    FRINGE_FLOOR, FRINGE_RATIO,
};
use kerr_ising_core::hilbert::{embed, expectation, number, quadrature_x, DensityMatrix, StateVector};
use kerr_ising_core::model::{bistability_scan, network_hamiltonian, network_hamiltonian_sparse, ModelParams};
use kerr_ising_core::spectra::{ground_subspace, spectrum_sparse, DEFAULT_GROUPING_TOL};
use kerr_ising_core::stats::{ensemble_stats, Ensemble, EnsembleStats, Signal};
use kerr_ising_core::C64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{target_or_default, ExperimentConfig, Kind, StateChoice};
use crate::output::{Cell, Table};
use crate::CliError;

pub const STATS_HEADER: [&str; 8] = [
    "time",
    "mean_diff_sq",
    "mean_diff_sq_se",
    "cross_corr",
    "cross_corr_se",
    "pr_error",
    "pr_error_se",
    "n_samples",
];
pub const QUANTUM_HEADER: [&str; 5] = ["time", "trajectory_id", "mode", "cond_mean_X", "current"];
pub const CLASSICAL_HEADER: [&str; 6] = ["time", "trajectory_id", "mode", "re_alpha", "im_alpha", "current"];

/// Tables plus scalar facts recorded in the manifest.
#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    pub notes: Map<String, Value>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    match cfg.kind() {
        Kind::Spectrum => spectrum(cfg),
        Kind::LnSweep => ln_sweep(cfg),
        Kind::SteadyState => steady_state(cfg),
        Kind::Trajectories => trajectories(cfg),
        Kind::Classical => classical(cfg),
        Kind::Stats => stats(cfg),
        Kind::Compare => compare(cfg),
    }
}

fn at(p: &ModelParams, epsilon: f64, eta: f64) -> ModelParams {
    let mut q = p.clone();
    q.epsilon = C64::new(epsilon, 0.0);
    q.eta = eta;
    q
}

fn grid_points(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    let eps = cfg.epsilon_grid();
    cfg.eta_grid()
        .into_iter()
        .flat_map(|eta| eps.iter().map(move |&e| (e, eta)))
        .collect()
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let p = cfg.params()?;
    let s = cfg.adjacency()?;
    let opts = cfg.spectrum.clone().unwrap_or_default();
    let dims = p.dims();
    let points = grid_points(cfg);
    let solved = points
        .par_iter()
        .map(|&(eps, eta)| {
            let q = at(&p, eps, eta);
            let h = network_hamiltonian_sparse(&q, &s)?;
            spectrum_sparse(&h, &dims, opts.levels.min(h.dim()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut levels = Table::new("spectrum.csv", &["epsilon", "level_index", "energy", "eta"]);
    for (&(eps, eta), d) in points.iter().zip(&solved) {
        for (k, e) in d.eigenvalues.iter().enumerate() {
            levels.push(vec![eps.into(), k.into(), (*e).into(), eta.into()]);
        }
    }
    let mut out = Output {
        tables: vec![levels],
        ..Default::default()
    };
    if opts.ground_details {
        let split = Bipartition::first_mode(p.n_modes())?;
        let mut ground = Table::new(
            "ground_state.csv",
            &[
                "epsilon",
                "eta",
                "energy",
                "degeneracy",
                "log_negativity",
                "interference_minima",
            ],
        );
        let mut joint = Table::new("joint_photon.csv", &["epsilon", "eta", "n1", "n2", "probability"]);
        for (&(eps, eta), d) in points.iter().zip(&solved) {
            let sub = ground_subspace(d, DEFAULT_GROUPING_TOL)?;
            let psi = &d.eigenvectors[0];
            let ln = if p.n_modes() > 1 {
                log_negativity_pure(psi, &split)?
            } else {
                0.0
            };
            let mut minima = f64::NAN;
            if p.n_modes() == 2 {
                let pj = joint_photon_distribution(psi)?;
                minima = diagonal_interference_minima(&pj, FRINGE_RATIO, FRINGE_FLOOR).len() as f64;
                for n1 in 0..pj.nrows() {
                    for n2 in 0..pj.ncols() {
                        joint.push(vec![eps.into(), eta.into(), n1.into(), n2.into(), pj[(n1, n2)].into()]);
                    }
                }
            }
            ground.push(vec![
                eps.into(),
                eta.into(),
                sub.energy.into(),
                sub.dim().into(),
                ln.into(),
                minima.into(),
            ]);
        }
        out.tables.push(ground);
        if p.n_modes() == 2 {
            out.tables.push(joint);
        }
    }
    Ok(out)
}

fn ln_sweep(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let p = cfg.params()?;
    let s = cfg.adjacency()?;
    let sweep = cfg.sweep.clone().unwrap_or_default();
    if sweep.state == StateChoice::Steady && !(p.gamma > 0.0) {
        return Err(CliError::Config(
            "field `model.gamma`: steady-state sweeps need gamma > 0".into(),
        ));
    }
    let split = Bipartition::first_mode(p.n_modes())?;
    let dims = p.dims();
    let points = grid_points(cfg);
    let values = points
        .par_iter()
        .map(|&(eps, eta)| {
            let q = at(&p, eps, eta);
            let h = network_hamiltonian_sparse(&q, &s)?;
            match sweep.state {
                StateChoice::Ground => {
                    let d = spectrum_sparse(&h, &dims, 1)?;
                    log_negativity_pure(&d.eigenvectors[0], &split)
                }
                StateChoice::Steady => {
                    let l = Liouvillian::from_sparse(&h, &dims, &q)?;
                    let opts = SteadyStateOptions {
                        tol: sweep.tol,
                        ..Default::default()
                    };
                    log_negativity(&steady_state_with(&l, &q, &opts)?, &split)
                }
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let column = match sweep.state {
        StateChoice::Ground => "ln_ground",
        StateChoice::Steady => "ln_steady",
    };
    let mut t = Table::new("ln_sweep.csv", &["epsilon", "eta", column]);
    for (&(eps, eta), v) in points.iter().zip(values) {
        t.push(vec![eps.into(), eta.into(), v.into()]);
    }
    let mut out = Output {
        tables: vec![t],
        ..Default::default()
    };
    let eps = cfg.epsilon_grid();
    let monotone = eps.windows(2).all(|w| w[1] > w[0]);
    if monotone && p.n_modes() <= 12 {
        let mut scan = Table::new(
            "bistability.csv",
            &["eta", "epsilon", "det", "unstable_undamped", "unstable_damped"],
        );
        for eta in cfg.eta_grid() {
            let report = bistability_scan(&at(&p, 0.0, eta), &s, &eps)?;
            for r in &report.rows {
                scan.push(vec![
                    eta.into(),
                    r.epsilon.into(),
                    r.det.into(),
                    r.unstable_undamped.into(),
                    r.unstable_damped.into(),
                ]);
            }
        }
        out.tables.push(scan);
    }
    Ok(out)
}

fn steady_state(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let p = cfg.params()?;
    let s = cfg.adjacency()?;
    let tol = cfg.sweep.clone().unwrap_or_default().tol;
    let dims = p.dims();
    let h = network_hamiltonian_sparse(&p, &s)?;
    let l = Liouvillian::from_sparse(&h, &dims, &p)?;
    let rho = steady_state_with(
        &l,
        &p,
        &SteadyStateOptions {
            tol,
            ..Default::default()
        },
    )?;
    let mut t = Table::new("steady_state.csv", &["quantity", "mode", "value"]);
    for (i, &d) in dims.iter().enumerate() {
        let n = expectation(&rho, &embed(&number(d)?, i, &dims)?)?.re;
        let x = expectation(&rho, &embed(&quadrature_x(d)?, i, &dims)?)?.re;
        t.push(vec!["mean_n".into(), i.into(), n.into()]);
        t.push(vec!["mean_x".into(), i.into(), x.into()]);
    }
    let all = Cell::from("all");
    t.push(vec!["purity".into(), all.clone(), rho.purity().into()]);
    if p.n_modes() > 1 {
        let ln = log_negativity(&rho, &Bipartition::first_mode(p.n_modes())?)?;
        t.push(vec!["log_negativity".into(), all.clone(), ln.into()]);
    }
    let residual = l.apply(rho.matrix())?.norm();
    t.push(vec!["residual".into(), all, residual.into()]);
    Ok(Output {
        tables: vec![t],
        ..Default::default()
    })
}

/// Conditional trajectories from the vacuum for the configured ensemble.
pub fn quantum_ensemble(cfg: &ExperimentConfig) -> Result<Vec<TrajectoryRecord>, CliError> {
    quantum_ensemble_with(cfg, &cfg.evolution_config()?)
}

/// As [`quantum_ensemble`] on an explicit time grid.
pub fn quantum_ensemble_with(cfg: &ExperimentConfig, evo: &EvolutionConfig) -> Result<Vec<TrajectoryRecord>, CliError> {
    let p = cfg.params()?;
    let s = cfg.adjacency()?;
    let h = network_hamiltonian_sparse(&p, &s)?;
    let sme = Sme::new(&h, &p.dims(), &p)?;
    let init: InitialState = StateVector::vacuum(&p.dims())?.into();
    Ok(sme.ensemble(&init, evo, cfg.ensemble_section().m)?)
}

/// Thermal-noise mean-field trajectories from the origin.
pub fn classical_runs(cfg: &ExperimentConfig) -> Result<Vec<ClassicalTrajectory>, CliError> {
    classical_runs_with(cfg, &cfg.evolution_config()?)
}

/// As [`classical_runs`] on an explicit time grid.
pub fn classical_runs_with(
    cfg: &ExperimentConfig,
    evo: &EvolutionConfig,
) -> Result<Vec<ClassicalTrajectory>, CliError> {
    let p = cfg.params()?;
    let s = cfg.adjacency()?;
    let origin = vec![C64::new(0.0, 0.0); p.n_modes()];
    Ok(classical_ensemble(&origin, &p, &s, evo, cfg.ensemble_section().m)?)
}

pub fn stats_table(file: &str, st: &EnsembleStats) -> Table {
    let mut t = Table::new(file, &STATS_HEADER);
    for k in 0..st.times.len() {
        t.push(vec![
            st.times[k].into(),
            st.mean_diff_sq[k].into(),
            st.mean_diff_sq_se[k].into(),
            st.cross_corr[k].into(),
            st.cross_corr_se[k].into(),
            st.pr_error[k].into(),
            st.pr_error_se[k].into(),
            st.n_samples.into(),
        ]);
    }
    t
}

fn stats_notes(st: &EnsembleStats, notes: &mut Map<String, Value>) {
    let degenerate: Vec<f64> = st.degenerate_corr.iter().map(|&k| st.times[k]).collect();
    notes.insert("degenerate_corr_times".into(), json!(degenerate));
}

fn trajectories(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let ens = quantum_ensemble(cfg)?;
    let opts = cfg.ensemble_section();
    let target = target_or_default(opts.target.clone(), 2)?;
    let st = ensemble_stats(&Ensemble::from_quantum(&ens, opts.signal.into())?, &target)?;
    let mut out = Output::default();
    if opts.write_trajectories {
        let mut t = Table::new("trajectories.csv", &QUANTUM_HEADER);
        for r in &ens {
            for (k, &time) in r.times.iter().enumerate() {
                for mode in 0..r.cond_x.len() {
                    t.push(vec![
                        time.into(),
                        r.trajectory_id.into(),
                        mode.into(),
                        r.cond_x[mode][k].into(),
                        r.currents[mode][k].into(),
                    ]);
                }
            }
        }
        out.tables.push(t);
    }
    out.tables.push(stats_table("stats.csv", &st));
    stats_notes(&st, &mut out.notes);
    if opts.master_check {
        out.tables.push(master_check(cfg, &ens)?);
    }
    Ok(out)
}

/// Ensemble means of `<X_i>_c` against the unconditional evolution.
pub fn master_check(cfg: &ExperimentConfig, ens: &[TrajectoryRecord]) -> Result<Table, CliError> {
    let p = cfg.params()?;
    let s = cfg.adjacency()?;
    let dims = p.dims();
    let l = Liouvillian::new(&network_hamiltonian(&p, &s)?, &p)?;
    let obs = (0..dims.len())
        .map(|i| embed(&quadrature_x(dims[i])?, i, &dims))
        .collect::<Result<Vec<_>, _>>()?;
    let rho0: DensityMatrix = StateVector::vacuum(&dims)?.to_density();
    let (times, values) = master_expectations(&rho0, &l, &cfg.master_config()?, &obs)?;
    let mut t = Table::new(
        "master_check.csv",
        &[
            "time",
            "mode",
            "master_mean_X",
            "ensemble_mean_X",
            "ensemble_se",
            "z_score",
        ],
    );
    let m = ens.len() as f64;
    for (k, &time) in times.iter().enumerate() {
        let Some(j) = ens[0].times.iter().position(|&u| (u - time).abs() < 1e-9) else {
            continue;
        };
        for mode in 0..dims.len() {
            let xs: Vec<f64> = ens.iter().map(|r| r.cond_x[mode][j]).collect();
            let mean = xs.iter().sum::<f64>() / m;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            let se = (var / m).sqrt();
            let master = values[mode][k].re;
            let z = if se > 0.0 { (mean - master) / se } else { 0.0 };
            t.push(vec![
                time.into(),
                mode.into(),
                master.into(),
                mean.into(),
                se.into(),
                z.into(),
            ]);
        }
    }
    Ok(t)
}

fn classical(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let runs = classical_runs(cfg)?;
    let opts = cfg.ensemble_section();
    let target = target_or_default(opts.target.clone(), 2)?;
    let st = ensemble_stats(&Ensemble::from_classical(&runs, opts.signal.into())?, &target)?;
    let mut out = Output::default();
    if opts.write_trajectories {
        let mut t = Table::new("classical.csv", &CLASSICAL_HEADER);
        for r in &runs {
            for (k, &time) in r.times.iter().enumerate() {
                for mode in 0..r.alphas.len() {
                    let a = r.alphas[mode][k];
                    t.push(vec![
                        time.into(),
                        r.trajectory_id.into(),
                        mode.into(),
                        a.re.into(),
                        a.im.into(),
                        r.currents[mode][k].into(),
                    ]);
                }
            }
        }
        out.tables.push(t);
    }
    out.tables.push(stats_table("stats.csv", &st));
    stats_notes(&st, &mut out.notes);
    Ok(out)
}

/// Kind of trajectory file, recognised from its header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Quantum,
    Classical,
}

/// Reads a trajectory CSV written by `trajectories` or `classical`.
pub fn read_trajectories(path: &Path, signal: Signal) -> Result<(Source, Ensemble), CliError> {
    let name = path.display().to_string();
    let bad = |msg: String| CliError::Input(format!("{name}: {msg}"));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let source = if header == QUANTUM_HEADER {
        Source::Quantum
    } else if header == CLASSICAL_HEADER {
        Source::Classical
    } else {
        return Err(bad(format!(
            "unrecognised header {header:?}; expected {QUANTUM_HEADER:?} or {CLASSICAL_HEADER:?}"
        )));
    };
    let value_col = match (source, signal) {
        (Source::Quantum, Signal::Denoised) => 3,
        (Source::Classical, Signal::Denoised) => 3,
        (Source::Quantum, Signal::RawCurrent) => 4,
        (Source::Classical, Signal::RawCurrent) => 5,
    };
    let scale = if source == Source::Classical && signal == Signal::Denoised {
        std::f64::consts::SQRT_2
    } else {
        1.0
    };
    // trajectory id -> (times of mode 0, per-mode series)
    let mut order: Vec<u64> = Vec::new();
    let mut data: BTreeMap<u64, (Vec<f64>, Vec<Vec<f64>>)> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |j: usize| -> Result<f64, CliError> {
            rec.get(j)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("line {}: column `{}` is not a number", line + 2, header[j])))
        };
        let (time, id, mode, v) = (field(0)?, field(1)? as u64, field(2)? as usize, field(value_col)?);
        let entry = data.entry(id).or_insert_with(|| {
            order.push(id);
            (Vec::new(), Vec::new())
        });
        if mode >= entry.1.len() {
            entry.1.resize(mode + 1, Vec::new());
        }
        if mode == 0 {
            entry.0.push(time);
        }
        entry.1[mode].push(scale * v);
    }
    if order.is_empty() {
        return Err(bad("no trajectories".into()));
    }
    let times = data[&order[0]].0.clone();
    if order.iter().any(|id| data[id].0 != times) {
        return Err(bad("trajectories use different time grids".into()));
    }
    let x = order.iter().map(|id| data.remove(id).unwrap().1).collect();
    Ok((source, Ensemble::new(times, x)?))
}

fn stats(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let sec = cfg.stats.as_ref().expect("validated");
    let (source, ens) = read_trajectories(&sec.input, sec.signal.into())?;
    let st = ensemble_stats(&ens, &target_or_default(sec.target.clone(), 2)?)?;
    let mut out = Output {
        tables: vec![stats_table("stats.csv", &st)],
        ..Default::default()
    };
    out.notes
        .insert("source".into(), json!(format!("{source:?}").to_lowercase()));
    stats_notes(&st, &mut out.notes);
    Ok(out)
}

/// Stored times shared by two statistics series, as index pairs.
pub fn common_times(a: &[f64], b: &[f64]) -> Vec<(usize, usize)> {
    a.iter()
        .enumerate()
        .filter_map(|(i, &t)| b.iter().position(|&u| (u - t).abs() < 1e-9).map(|j| (i, j)))
        .collect()
}

/// Combined-standard-error distance between two estimates.
pub fn z_score(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let se = (sa * sa + sb * sb).sqrt();
    if se > 0.0 {
        (a - b) / se
    } else if a == b {
        0.0
    } else {
        f64::INFINITY.copysign(a - b)
    }
}

fn compare(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let sec = cfg.compare.as_ref().expect("validated");
    let target = target_or_default(sec.target.clone(), 2)?;
    let (qs, q) = read_trajectories(&sec.quantum, sec.signal.into())?;
    let (cs, c) = read_trajectories(&sec.classical, sec.signal.into())?;
    if qs != Source::Quantum || cs != Source::Classical {
        return Err(CliError::Input(
            "[compare]: `quantum` must be a trajectories CSV and `classical` a classical CSV".into(),
        ));
    }
    let sq = ensemble_stats(&q, &target)?;
    let sc = ensemble_stats(&c, &target)?;
    let mut t = Table::new(
        "compare.csv",
        &[
            "time",
            "quantum_mean_diff_sq",
            "quantum_mean_diff_sq_se",
            "classical_mean_diff_sq",
            "classical_mean_diff_sq_se",
            "z_score",
            "quantum_pr_error",
            "classical_pr_error",
        ],
    );
    for (i, j) in common_times(&sq.times, &sc.times) {
        t.push(vec![
            sq.times[i].into(),
            sq.mean_diff_sq[i].into(),
            sq.mean_diff_sq_se[i].into(),
            sc.mean_diff_sq[j].into(),
            sc.mean_diff_sq_se[j].into(),
            z_score(
                sq.mean_diff_sq[i],
                sq.mean_diff_sq_se[i],
                sc.mean_diff_sq[j],
                sc.mean_diff_sq_se[j],
            )
            .into(),
            sq.pr_error[i].into(),
            sc.pr_error[j].into(),
        ]);
    }
    Ok(Output {
        tables: vec![
            t,
            stats_table("stats_quantum.csv", &sq),
            stats_table("stats_classical.csv", &sc),
        ],
        ..Default::default()
    })
}
