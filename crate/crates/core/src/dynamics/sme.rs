//! Conditional evolution under continuous homodyne detection of every
//! cavity output.
//!
//! The thermal dissipator is split as `D[c_i] + D[b_i]` with the measured
//! channel
//!
//! ```text
//! c_i = sqrt(γ/(2n̄+1)) ((n̄+1) a_i - n̄ a_i†)
//! b_i = sqrt(γ n̄ (n̄+1)/(2n̄+1)) (a_i + a_i†)
//! ```
//!
//! which reduces to `c_i = sqrt(γ) a_i`, `b_i = 0` at zero temperature. A step
//! of length `dt` is a Strang splitting: half a step of the exactly
//! integrated diagonal part, then the Kraus-type update
//!
//! ```text
//! M = 1 - i dt H_off - dt²/2 H_off² + sum_i c_i dY_i + 1/2 sum_ij c_i c_j (dY_i dY_j - δ_ij dt)
//! ρ -> M ρ M† + dt sum_i b_i ρ b_i†,   dY_i = <c_i + c_i†> dt + dW_i
//! ```
//!
//! followed by renormalisation and the second half step. The update is
//! completely positive by construction. At zero temperature a pure initial
//! state stays pure and is propagated as a vector.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::{add_scaled_into, check_model_dims, thermal_decay, EvolutionConfig};
use crate::error::{Error, Result};
use crate::hilbert::sparse::{embed_sparse, CsrMatrix};
use crate::hilbert::{annihilation, CMatrix, CVector, DensityMatrix, Operator, StateVector};
use crate::model::ModelParams;
use crate::noise::BrownianPath;

/// Initial conditional state.
#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl From<StateVector> for InitialState {
    fn from(s: StateVector) -> Self {
        Self::Pure(s)
    }
}

impl From<DensityMatrix> for InitialState {
    fn from(s: DensityMatrix) -> Self {
        Self::Mixed(s)
    }
}

impl InitialState {
    fn dims(&self) -> &[usize] {
        match self {
            Self::Pure(s) => s.dims(),
            Self::Mixed(s) => s.dims(),
        }
    }
}

/// One conditional trajectory sampled at the stored times.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory_id: u64,
    pub seed: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `<a_i>_c`, indexed `[mode][time]`.
    pub cond_a: Vec<Vec<C64>>,
    /// `<X_i>_c = sqrt(2) Re <a_i>_c`.
    pub cond_x: Vec<Vec<f64>>,
    /// Homodyne current averaged over each storage window.
    pub currents: Vec<Vec<f64>>,
}

/// Precomputed operators for conditional evolution.
pub struct Sme {
    dims: Vec<usize>,
    /// Strang half-step exponents `-i h_j - Γ_j / 2`.
    rates: Vec<C64>,
    pattern: CsrMatrix,
    /// Pattern of `M†` and, per entry, the index of its source in `pattern`.
    pattern_adj: CsrMatrix,
    adj_src: Vec<usize>,
    id_vals: Vec<C64>,
    hoff_vals: Vec<C64>,
    hoff2_vals: Vec<C64>,
    c_vals: Vec<Vec<C64>>,
    /// `c_i c_j` for `i <= j`.
    cc_vals: Vec<(usize, usize, Vec<C64>)>,
    /// `b_i†`.
    b_adj: Vec<CsrMatrix>,
    a_ops: Vec<CsrMatrix>,
    /// `<c_i + c_i†> = kappa sqrt(2) <X_i>`.
    kappa: f64,
    current_noise: f64,
    force_density: bool,
}

/// Annihilators `a_i`, measured channels `c_i` and unmeasured channels
/// `b_i` (empty at zero temperature).
pub(crate) fn measurement_channels(
    dims: &[usize],
    gamma: f64,
    nbar: f64,
) -> Result<(Vec<CsrMatrix>, Vec<CsrMatrix>, Vec<CsrMatrix>)> {
    let kappa = (gamma / (2.0 * nbar + 1.0)).sqrt();
    let b_scale = (gamma * nbar * (nbar + 1.0) / (2.0 * nbar + 1.0)).sqrt();
    let mut a_ops = Vec::new();
    let mut c_ops = Vec::new();
    let mut b_ops = Vec::new();
    for (m, &d) in dims.iter().enumerate() {
        let a = embed_sparse(annihilation(d)?.matrix(), m, dims);
        let ad = a.adjoint();
        c_ops.push(
            a.scale(C64::new(kappa * (nbar + 1.0), 0.0))
                .add_scaled(&ad, C64::new(-kappa * nbar, 0.0)),
        );
        if b_scale > 0.0 {
            b_ops.push(a.add(&ad).scale(C64::new(b_scale, 0.0)));
        }
        a_ops.push(a);
    }
    Ok((a_ops, c_ops, b_ops))
}

fn union_pattern(n: usize, mats: &[&CsrMatrix]) -> CsrMatrix {
    let mut t: Vec<(usize, usize, C64)> = mats
        .iter()
        .flat_map(|m| m.triplets().map(|(r, c, v)| (r, c, C64::new(v.norm(), 0.0))))
        .collect();
    CsrMatrix::from_triplets(n, &mut t)
}

impl Sme {
    pub fn new(h: &CsrMatrix, dims: &[usize], p: &ModelParams) -> Result<Self> {
        check_model_dims(dims, p)?;
        if p.gamma <= 0.0 {
            return Err(Error::InvalidArgument("conditional evolution needs gamma > 0".into()));
        }
        let n = h.dim();
        if n != dims.iter().product::<usize>() {
            return Err(Error::Shape("Hamiltonian size does not match dims".into()));
        }
        let (diag, h_off) = h.split_diagonal();
        let decay = thermal_decay(dims, p.gamma, p.nbar);
        let rates = diag
            .iter()
            .zip(&decay)
            .map(|(hd, &g)| C64::new(-0.5 * g, -hd.re))
            .collect();
        let nb = p.nbar;
        let kappa = (p.gamma / (2.0 * nb + 1.0)).sqrt();
        let (a_ops, c_ops, b_ops) = measurement_channels(dims, p.gamma, nb)?;
        let hoff2 = h_off.matmul(&h_off);
        let mut cc = Vec::new();
        for i in 0..c_ops.len() {
            for j in i..c_ops.len() {
                cc.push((i, j, c_ops[i].matmul(&c_ops[j])));
            }
        }
        let id = CsrMatrix::identity(n);
        let mut all: Vec<&CsrMatrix> = vec![&id, &h_off, &hoff2];
        all.extend(c_ops.iter());
        all.extend(cc.iter().map(|x| &x.2));
        let pattern = union_pattern(n, &all);
        let mut t: Vec<_> = pattern
            .triplets()
            .enumerate()
            .map(|(k, (r, c, _))| (c, r, C64::new(k as f64 + 1.0, 0.0)))
            .collect();
        let pattern_adj = CsrMatrix::from_triplets(n, &mut t);
        let adj_src = pattern_adj.values().iter().map(|v| v.re as usize - 1).collect();
        Ok(Self {
            dims: dims.to_vec(),
            rates,
            id_vals: id.values_on_pattern(&pattern),
            hoff_vals: h_off.values_on_pattern(&pattern),
            hoff2_vals: hoff2.values_on_pattern(&pattern),
            c_vals: c_ops.iter().map(|c| c.values_on_pattern(&pattern)).collect(),
            cc_vals: cc
                .iter()
                .map(|(i, j, m)| (*i, *j, m.values_on_pattern(&pattern)))
                .collect(),
            pattern,
            pattern_adj,
            adj_src,
            b_adj: b_ops.iter().map(CsrMatrix::adjoint).collect(),
            a_ops,
            kappa,
            current_noise: (p.gamma * (2.0 * nb + 1.0)).sqrt(),
            force_density: false,
        })
    }

    pub fn from_operator(h: &Operator, p: &ModelParams) -> Result<Self> {
        Self::new(&CsrMatrix::from_dense(h.matrix()), h.dims(), p)
    }

    /// Propagate density matrices even when a state vector would do.
    pub fn force_density(mut self, force: bool) -> Self {
        self.force_density = force;
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn kraus_values(&self, dt: f64, dy: &[f64], out: &mut [C64]) {
        let hd = C64::new(0.0, -dt);
        let hd2 = C64::new(-0.5 * dt * dt, 0.0);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.id_vals[k] + hd * self.hoff_vals[k] + hd2 * self.hoff2_vals[k];
        }
        for (i, c) in self.c_vals.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(c) {
                *o += dy[i] * v;
            }
        }
        for (i, j, cc) in &self.cc_vals {
            let w = if i == j {
                0.5 * (dy[*i] * dy[*i] - dt)
            } else {
                dy[*i] * dy[*j]
            };
            for (o, v) in out.iter_mut().zip(cc) {
                *o += w * v;
            }
        }
    }

    /// Runs trajectory `id` of the ensemble with master seed `cfg.seed`.
    pub fn trajectory(&self, init: &InitialState, cfg: &EvolutionConfig, id: u64) -> Result<TrajectoryRecord> {
        cfg.validate()?;
        if init.dims() != self.dims.as_slice() {
            return Err(Error::Shape(format!(
                "initial state dims {:?} vs model dims {:?}",
                init.dims(),
                self.dims
            )));
        }
        let half: Vec<C64> = self.rates.iter().map(|g| (g * (0.5 * cfg.dt)).exp()).collect();
        match init {
            Init::Pure(psi) if self.b_adj.is_empty() && !self.force_density => {
                let mut st = PureState {
                    psi: psi.amplitudes().clone(),
                    buf: CVector::zeros(psi.amplitudes().len()),
                    half,
                };
                self.run(&mut st, cfg, id)
            }
            _ => {
                let rho = match init {
                    Init::Pure(psi) => psi.to_density().into_matrix(),
                    Init::Mixed(r) => r.matrix().clone(),
                };
                let n = rho.nrows();
                let mut st = MixedState {
                    phase: CMatrix::from_fn(n, n, |j, k| half[j] * half[k].conj()),
                    rho,
                    x: CMatrix::zeros(n, n),
                    xt: CMatrix::zeros(n, n),
                    y: CMatrix::zeros(n, n),
                };
                self.run(&mut st, cfg, id)
            }
        }
    }

    /// `m` trajectories with ids `0..m`, in parallel, returned in id order.
    pub fn ensemble(&self, init: &InitialState, cfg: &EvolutionConfig, m: usize) -> Result<Vec<TrajectoryRecord>> {
        (0..m as u64)
            .into_par_iter()
            .map(|k| self.trajectory(init, cfg, k))
            .collect()
    }

    fn run<S: Conditional>(&self, st: &mut S, cfg: &EvolutionConfig, id: u64) -> Result<TrajectoryRecord> {
        let n_modes = self.dims.len();
        let dt = cfg.dt;
        let mut path = BrownianPath::new(cfg.seed, id, n_modes, dt, cfg.bridge_levels);
        let mut m = self.pattern.clone();
        let mut m_adj = self.pattern_adj.clone();
        let mut dy = vec![0.0; n_modes];
        let mut mean_a = vec![C64::new(0.0, 0.0); n_modes];
        let mut win_x = vec![0.0; n_modes];
        let mut win_dw = vec![0.0; n_modes];
        let mut win_steps = 0usize;

        let cap = cfg.n_steps() / cfg.store_stride + 1;
        let mut rec = TrajectoryRecord {
            trajectory_id: id,
            seed: cfg.seed,
            dt,
            times: Vec::with_capacity(cap),
            cond_a: vec![Vec::with_capacity(cap); n_modes],
            cond_x: vec![Vec::with_capacity(cap); n_modes],
            currents: vec![Vec::with_capacity(cap); n_modes],
        };
        let sqrt2 = std::f64::consts::SQRT_2;
        for (i, a) in self.a_ops.iter().enumerate() {
            let v = st.expect(a);
            rec.cond_a[i].push(v);
            rec.cond_x[i].push(sqrt2 * v.re);
            rec.currents[i].push(sqrt2 * v.re);
        }
        rec.times.push(0.0);

        for step in 1..=cfg.n_steps() {
            st.half_step();
            for (i, a) in self.a_ops.iter().enumerate() {
                mean_a[i] = st.expect(a);
            }
            let dw = path.next_increments();
            for i in 0..n_modes {
                dy[i] = 2.0 * self.kappa * mean_a[i].re * dt + dw[i];
                win_x[i] += sqrt2 * mean_a[i].re;
                win_dw[i] += dw[i];
            }
            win_steps += 1;
            self.kraus_values(dt, &dy, m.values_mut());
            for (v, &k) in m_adj.values_mut().iter_mut().zip(&self.adj_src) {
                *v = m.values()[k].conj();
            }
            let norm = st.kraus(&m, &m_adj, &self.b_adj, dt);
            if !norm.is_finite() || norm <= 0.0 {
                return Err(Error::Integration {
                    step,
                    reason: format!("conditional state norm became {norm}"),
                });
            }
            st.half_step();
            if step % cfg.store_stride == 0 {
                st.tidy();
                let window = win_steps as f64 * dt;
                for (i, a) in self.a_ops.iter().enumerate() {
                    let v = st.expect(a);
                    rec.cond_a[i].push(v);
                    rec.cond_x[i].push(sqrt2 * v.re);
                    rec.currents[i].push(win_x[i] / win_steps as f64 + self.current_noise * win_dw[i] / window);
                    win_x[i] = 0.0;
                    win_dw[i] = 0.0;
                }
                win_steps = 0;
                rec.times.push(step as f64 * dt);
            }
        }
        Ok(rec)
    }
}

use InitialState as Init;

trait Conditional {
    fn expect(&self, op: &CsrMatrix) -> C64;
    fn half_step(&mut self);
    /// Applies the Kraus update and renormalises; returns the norm (or
    /// trace) before renormalisation.
    fn kraus(&mut self, m: &CsrMatrix, m_adj: &CsrMatrix, b_adj: &[CsrMatrix], dt: f64) -> f64;
    fn tidy(&mut self) {}
}

struct PureState {
    psi: CVector,
    buf: CVector,
    half: Vec<C64>,
}

impl Conditional for PureState {
    fn expect(&self, op: &CsrMatrix) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for r in 0..op.dim() {
            let row: C64 = op.row(r).map(|(c, v)| v * self.psi[c]).sum();
            s += self.psi[r].conj() * row;
        }
        s
    }

    fn half_step(&mut self) {
        for (z, e) in self.psi.iter_mut().zip(&self.half) {
            *z *= e;
        }
    }

    fn kraus(&mut self, m: &CsrMatrix, _m_adj: &CsrMatrix, _b: &[CsrMatrix], _dt: f64) -> f64 {
        m.mul_vec_into(self.psi.as_slice(), self.buf.as_mut_slice());
        std::mem::swap(&mut self.psi, &mut self.buf);
        let norm = self.psi.norm();
        self.psi /= C64::new(norm, 0.0);
        norm * norm
    }
}

struct MixedState {
    rho: CMatrix,
    phase: CMatrix,
    x: CMatrix,
    xt: CMatrix,
    y: CMatrix,
}

impl Conditional for MixedState {
    fn expect(&self, op: &CsrMatrix) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for r in 0..op.dim() {
            for (c, v) in op.row(r) {
                s += v * self.rho[(c, r)];
            }
        }
        s
    }

    fn half_step(&mut self) {
        self.rho.component_mul_assign(&self.phase);
    }

    fn kraus(&mut self, _m: &CsrMatrix, m_adj: &CsrMatrix, b_adj: &[CsrMatrix], dt: f64) -> f64 {
        // M ρ M† = (ρ M†)† M† for Hermitian ρ
        m_adj.dense_mul_into(&self.rho, &mut self.x);
        self.x.adjoint_to(&mut self.xt);
        m_adj.dense_mul_into(&self.xt, &mut self.y);
        for b in b_adj {
            b.dense_mul_into(&self.rho, &mut self.x);
            self.x.adjoint_to(&mut self.xt);
            b.dense_mul_into(&self.xt, &mut self.x);
            add_scaled_into(&mut self.y, dt, &self.x);
        }
        std::mem::swap(&mut self.rho, &mut self.y);
        let tr = self.rho.trace().re;
        self.rho /= C64::new(tr, 0.0);
        tr
    }

    fn tidy(&mut self) {
        self.rho.adjoint_to(&mut self.xt);
        self.rho += &self.xt;
        self.rho *= C64::new(0.5, 0.0);
    }
}

/// Single trajectory for `(H, p)`; see [`Sme::trajectory`].
pub fn sme_trajectory(
    init: &InitialState,
    h: &Operator,
    p: &ModelParams,
    cfg: &EvolutionConfig,
    id: u64,
) -> Result<TrajectoryRecord> {
    Sme::from_operator(h, p)?.trajectory(init, cfg, id)
}

/// `m` trajectories for `(H, p)`; see [`Sme::ensemble`].
pub fn sme_ensemble(
    init: &InitialState,
    h: &Operator,
    p: &ModelParams,
    cfg: &EvolutionConfig,
    m: usize,
) -> Result<Vec<TrajectoryRecord>> {
    Sme::from_operator(h, p)?.ensemble(init, cfg, m)
}
