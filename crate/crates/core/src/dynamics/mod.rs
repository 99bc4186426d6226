//! Thermal Lindblad dynamics and conditional homodyne trajectories.
//!
//! The generator is
//!
//! ```text
//! L ρ = -i[H, ρ] + sum_i γ(n̄+1) D[a_i]ρ + γ n̄ D[a_i†]ρ
//! ```
//!
//! Its diagonal part (diagonal of `H` plus the anti-commutator with
//! `sum L†L`, which is diagonal in the Fock basis) is integrated exactly; the
//! rest by an exponential Runge–Kutta scheme.

mod sme;

pub use sme::{sme_ensemble, sme_trajectory, InitialState, Sme, TrajectoryRecord};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::sparse::{embed_sparse, CsrMatrix};
use crate::hilbert::{annihilation, CMatrix, DensityMatrix, Operator};
use crate::model::ModelParams;

/// Time grid and seed shared by the quantum and classical integrators.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `store_stride` steps.
    pub store_stride: usize,
    pub seed: u64,
    /// Brownian-bridge refinement levels below the coarse noise grid.
    pub bridge_levels: u32,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64, store_stride: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            store_stride,
            seed,
            bridge_levels: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_final must be >= dt, got {} < {}",
                self.t_final, self.dt
            )));
        }
        if self.store_stride == 0 {
            return Err(Error::InvalidArgument("store_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Half the step on the same Wiener path and the same storage times.
    pub fn halved(&self) -> Self {
        Self {
            dt: self.dt / 2.0,
            store_stride: self.store_stride * 2,
            bridge_levels: self.bridge_levels + 1,
            ..self.clone()
        }
    }

    /// Stored times: `0` then every `store_stride` steps.
    pub fn store_times(&self) -> Vec<f64> {
        let n = self.n_steps();
        std::iter::once(0.0)
            .chain(
                (1..=n)
                    .filter(|s| s % self.store_stride == 0)
                    .map(|s| s as f64 * self.dt),
            )
            .collect()
    }
}

/// Precomputed pieces of the thermal Lindblad generator.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dims: Vec<usize>,
    h_diag: Vec<f64>,
    h_off: CsrMatrix,
    jumps: Vec<CsrMatrix>,
    /// `(column, value)` of the single entry in each row of every jump.
    jump_rows: Vec<Vec<(usize, C64)>>,
    /// Diagonal of `sum L†L`.
    decay: Vec<f64>,
}

/// Jump operators `sqrt(γ(n̄+1)) a_i` and `sqrt(γ n̄) a_i†`; zero rates are
/// omitted.
pub(crate) fn thermal_jumps(dims: &[usize], gamma: f64, nbar: f64) -> Vec<CsrMatrix> {
    let mut out = Vec::new();
    for (m, &d) in dims.iter().enumerate() {
        let a = embed_sparse(annihilation(d).expect("validated cutoff").matrix(), m, dims);
        if gamma > 0.0 {
            out.push(a.scale(C64::new((gamma * (nbar + 1.0)).sqrt(), 0.0)));
        }
        if gamma * nbar > 0.0 {
            out.push(a.adjoint().scale(C64::new((gamma * nbar).sqrt(), 0.0)));
        }
    }
    out
}

/// Diagonal of `sum_i γ(n̄+1) a_i†a_i + γ n̄ a_i a_i†` (truncated operators).
pub(crate) fn thermal_decay(dims: &[usize], gamma: f64, nbar: f64) -> Vec<f64> {
    let total: usize = dims.iter().product();
    (0..total)
        .map(|i| {
            crate::hilbert::basis_digits(i, dims)
                .iter()
                .zip(dims)
                .map(|(&n, &d)| {
                    let up = if n + 1 < d { (n + 1) as f64 } else { 0.0 };
                    gamma * (nbar + 1.0) * n as f64 + gamma * nbar * up
                })
                .sum()
        })
        .collect()
}

fn check_model_dims(dims: &[usize], p: &ModelParams) -> Result<()> {
    p.validate()?;
    if dims != p.dims().as_slice() {
        return Err(Error::Shape(format!(
            "operator dims {dims:?} do not match model dims {:?}",
            p.dims()
        )));
    }
    Ok(())
}

impl Liouvillian {
    pub fn new(h: &Operator, p: &ModelParams) -> Result<Self> {
        Self::from_sparse(&CsrMatrix::from_dense(h.matrix()), h.dims(), p)
    }

    pub fn from_sparse(h: &CsrMatrix, dims: &[usize], p: &ModelParams) -> Result<Self> {
        check_model_dims(dims, p)?;
        if h.dim() != dims.iter().product::<usize>() {
            return Err(Error::Shape("Hamiltonian size does not match dims".into()));
        }
        let (diag, h_off) = h.split_diagonal();
        let worst = diag.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        if worst > crate::hilbert::HERMITIAN_TOL {
            return Err(Error::NotHermitian(worst));
        }
        let jumps = thermal_jumps(dims, p.gamma, p.nbar);
        let jump_rows = jumps
            .iter()
            .map(|l| {
                (0..l.dim())
                    .map(|r| {
                        let mut it = l.row(r);
                        let first = it.next().unwrap_or((0, C64::new(0.0, 0.0)));
                        debug_assert!(it.next().is_none());
                        first
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            h_diag: diag.iter().map(|z| z.re).collect(),
            h_off,
            jumps,
            jump_rows,
            decay: thermal_decay(dims, p.gamma, p.nbar),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.h_diag.len()
    }

    /// `G_j = -i h_j - Γ_j / 2`; the diagonal part acts as
    /// `ρ_jk -> (G_j + conj(G_k)) ρ_jk`.
    fn diag_rates(&self) -> Vec<C64> {
        self.h_diag
            .iter()
            .zip(&self.decay)
            .map(|(&h, &g)| C64::new(-0.5 * g, -h))
            .collect()
    }

    /// Off-diagonal commutator plus jump terms, for Hermitian `rho`.
    fn nonlinear_into(&self, rho: &CMatrix, out: &mut CMatrix, s1: &mut CMatrix) {
        let n = self.dim();
        // -i(Hρ - ρH) with Hρ = (ρH)†
        self.h_off.dense_mul_into(rho, s1);
        let src = s1.as_slice();
        let r = rho.as_slice();
        let dst = out.as_mut_slice();
        for k in 0..n {
            for j in 0..n {
                let z = src[k + j * n].conj() - src[j + k * n];
                dst[j + k * n] = C64::new(z.im, -z.re);
            }
        }
        // every jump has at most one entry per row: (LρL†)_jk = l_j conj(l_k) ρ_{σj σk}
        for jump in &self.jump_rows {
            for (k, &(ck, lk)) in jump.iter().enumerate() {
                if lk == C64::new(0.0, 0.0) {
                    continue;
                }
                let col = &r[ck * n..(ck + 1) * n];
                let lk = lk.conj();
                for (j, &(cj, lj)) in jump.iter().enumerate() {
                    dst[j + k * n] += lj * lk * col[cj];
                }
            }
        }
    }

    fn apply_hermitian(&self, rho: &CMatrix) -> CMatrix {
        let n = self.dim();
        let (mut out, mut s1) = (CMatrix::zeros(n, n), CMatrix::zeros(n, n));
        self.nonlinear_into(rho, &mut out, &mut s1);
        let g = self.diag_rates();
        for k in 0..n {
            for j in 0..n {
                out[(j, k)] += (g[j] + g[k].conj()) * rho[(j, k)];
            }
        }
        out
    }

    /// `L ρ` for any square `rho`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let n = self.dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::Shape(format!(
                "{}x{} matrix for dimension {n}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let adj = rho.adjoint();
        let herm = (rho + &adj) * C64::new(0.5, 0.0);
        let anti = (rho - &adj) * C64::new(0.0, -0.5);
        if anti.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            return Ok(self.apply_hermitian(&herm));
        }
        Ok(self.apply_hermitian(&herm) + self.apply_hermitian(&anti) * C64::new(0.0, 1.0))
    }

    /// Dense superoperator acting on column-major `vec(ρ)`.
    pub fn superoperator(&self) -> CMatrix {
        let n = self.dim();
        let mut sup = CMatrix::zeros(n * n, n * n);
        let mut e = CMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                e[(j, k)] = C64::new(1.0, 0.0);
                let col = self.apply(&e).expect("square");
                e[(j, k)] = C64::new(0.0, 0.0);
                sup.column_mut(j + k * n).copy_from_slice(col.as_slice());
            }
        }
        sup
    }

    /// Infinity norm of the non-diagonal part, used to pick step sizes.
    fn stiffness(&self) -> f64 {
        let row_sum = |m: &CsrMatrix| -> f64 {
            (0..m.dim())
                .map(|r| m.row(r).map(|(_, v)| v.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        2.0 * row_sum(&self.h_off) + self.jumps.iter().map(|l| row_sum(l).powi(2)).sum::<f64>()
    }
}

/// `φ_1, φ_2, φ_3` at `z`, where `φ_k(z) = sum_m z^m / (m+k)!`.
fn phi123(z: C64) -> [C64; 3] {
    if z.norm() < 1.0 {
        let mut out = [C64::new(0.0, 0.0); 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = C64::new(1.0 / (1..=k as u32 + 1).product::<u32>() as f64, 0.0);
            for m in 0..30 {
                *o += term;
                term *= z / (m + k + 2) as f64;
            }
        }
        out
    } else {
        let p1 = (z.exp() - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p1, p2, p3]
    }
}

/// Exponential time-differencing RK4 (Cox–Matthews) stepper for
/// `dρ/dt = L ρ`, with the diagonal part of `L` treated exactly. Null
/// vectors of `L` are exact fixed points of the step map.
struct MasterStepper<'a> {
    l: &'a Liouvillian,
    e: CMatrix,
    e2: CMatrix,
    q: CMatrix,
    f1: CMatrix,
    f2: CMatrix,
    f3: CMatrix,
    stage: [CMatrix; 3],
    n: [CMatrix; 4],
    s1: CMatrix,
}

impl<'a> MasterStepper<'a> {
    fn new(l: &'a Liouvillian, h: f64) -> Self {
        let n = l.dim();
        let g = l.diag_rates();
        let rate = |j: usize, k: usize| g[j] + g[k].conj();
        let coef = |f: &dyn Fn(C64) -> C64| CMatrix::from_fn(n, n, |j, k| f(rate(j, k) * h));
        let z = || CMatrix::zeros(n, n);
        Self {
            l,
            e: coef(&|z| z.exp()),
            e2: coef(&|z| (0.5 * z).exp()),
            q: coef(&|z| phi123(0.5 * z)[0] * (0.5 * h)),
            f1: coef(&|z| {
                let [p1, p2, p3] = phi123(z);
                (p1 - 3.0 * p2 + 4.0 * p3) * h
            }),
            f2: coef(&|z| {
                let [_, p2, p3] = phi123(z);
                (p2 - 2.0 * p3) * h
            }),
            f3: coef(&|z| {
                let [_, p2, p3] = phi123(z);
                (4.0 * p3 - p2) * h
            }),
            stage: [z(), z(), z()],
            n: [z(), z(), z(), z()],
            s1: z(),
        }
    }

    fn step(&mut self, rho: &mut CMatrix) {
        let [a, b, c] = &mut self.stage;
        let [nu, na, nb, nc] = &mut self.n;
        let s1 = &mut self.s1;
        let (e, e2, q) = (self.e.as_slice(), self.e2.as_slice(), self.q.as_slice());
        self.l.nonlinear_into(rho, nu, s1);
        for (i, x) in a.as_mut_slice().iter_mut().enumerate() {
            *x = e2[i] * rho.as_slice()[i] + q[i] * nu.as_slice()[i];
        }
        self.l.nonlinear_into(a, na, s1);
        for (i, x) in b.as_mut_slice().iter_mut().enumerate() {
            *x = e2[i] * rho.as_slice()[i] + q[i] * na.as_slice()[i];
        }
        self.l.nonlinear_into(b, nb, s1);
        for (i, x) in c.as_mut_slice().iter_mut().enumerate() {
            *x = e2[i] * a.as_slice()[i] + q[i] * (2.0 * nb.as_slice()[i] - nu.as_slice()[i]);
        }
        self.l.nonlinear_into(c, nc, s1);
        let (f1, f2, f3) = (self.f1.as_slice(), self.f2.as_slice(), self.f3.as_slice());
        let (nu, na, nb, nc) = (nu.as_slice(), na.as_slice(), nb.as_slice(), nc.as_slice());
        for (i, x) in rho.as_mut_slice().iter_mut().enumerate() {
            *x = e[i] * *x + f1[i] * nu[i] + f2[i] * (2.0 * (na[i] + nb[i])) + f3[i] * nc[i];
        }
    }
}

/// `y += s x`
pub(crate) fn add_scaled_into(y: &mut CMatrix, s: f64, x: &CMatrix) {
    for (a, b) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *a += b * s;
    }
}

fn normalize_trace(rho: &mut CMatrix) -> f64 {
    let tr = rho.trace().re;
    *rho /= C64::new(tr, 0.0);
    tr
}

fn hermitize(rho: &mut CMatrix) {
    let adj = rho.adjoint();
    *rho += adj;
    *rho *= C64::new(0.5, 0.0);
}

/// `L ρ` for the model's thermal generator.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Operator, p: &ModelParams) -> Result<CMatrix> {
    if rho.dims() != h.dims() {
        return Err(Error::Shape(format!(
            "state dims {:?} vs operator dims {:?}",
            rho.dims(),
            h.dims()
        )));
    }
    Liouvillian::new(h, p)?.apply(rho.matrix())
}

/// Master-equation trajectory sampled at [`EvolutionConfig::store_times`].
#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

/// Integrates the master equation, calling `visit(t, ρ)` at each stored
/// time. Stored states are Hermitised, renormalised and checked for
/// positivity.
pub fn evolve_master_with<F>(rho0: &DensityMatrix, l: &Liouvillian, cfg: &EvolutionConfig, mut visit: F) -> Result<()>
where
    F: FnMut(f64, &DensityMatrix) -> Result<()>,
{
    cfg.validate()?;
    if rho0.dims() != l.dims() {
        return Err(Error::Shape("initial state does not match generator".into()));
    }
    let mut rho = rho0.matrix().clone();
    let mut stepper = MasterStepper::new(l, cfg.dt);
    visit(0.0, rho0)?;
    for step in 1..=cfg.n_steps() {
        stepper.step(&mut rho);
        let tr = normalize_trace(&mut rho);
        if !tr.is_finite() || tr <= 0.0 {
            return Err(Error::Integration {
                step,
                reason: format!("trace became {tr}"),
            });
        }
        if step % cfg.store_stride == 0 {
            hermitize(&mut rho);
            let state = DensityMatrix::from_parts_unchecked(l.dims().to_vec(), rho.clone());
            let min = state.min_eigenvalue();
            let t = step as f64 * cfg.dt;
            if min < -1e-6 {
                return Err(Error::StepSize {
                    time: t,
                    min_eigenvalue: min,
                });
            }
            visit(t, &state)?;
        }
    }
    Ok(())
}

pub fn evolve_master(
    rho0: &DensityMatrix,
    h: &Operator,
    p: &ModelParams,
    cfg: &EvolutionConfig,
) -> Result<MasterSolution> {
    let l = Liouvillian::new(h, p)?;
    let mut sol = MasterSolution {
        times: Vec::new(),
        states: Vec::new(),
    };
    evolve_master_with(rho0, &l, cfg, |t, s| {
        sol.times.push(t);
        sol.states.push(s.clone());
        Ok(())
    })?;
    Ok(sol)
}

/// Expectation values `tr(O ρ(t))` at the stored times without keeping the
/// states.
pub fn master_expectations(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    cfg: &EvolutionConfig,
    observables: &[Operator],
) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); observables.len()];
    evolve_master_with(rho0, l, cfg, |t, s| {
        times.push(t);
        for (o, v) in observables.iter().zip(values.iter_mut()) {
            v.push(crate::hilbert::expectation(s, o)?);
        }
        Ok(())
    })?;
    Ok((times, values))
}

/// Options for [`steady_state_with`].
#[derive(Clone, Debug)]
pub struct SteadyStateOptions {
    /// Target Frobenius norm of `L ρ`.
    pub tol: f64,
    /// Largest dimension solved through the dense superoperator.
    pub dense_limit: usize,
    /// Start of the time integration (vacuum when `None`).
    pub initial: Option<DensityMatrix>,
    /// Integration step; chosen from the generator norm when `None`.
    pub dt: Option<f64>,
    /// Give up after this much evolution time, in units of `1/γ`.
    pub max_time: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            dense_limit: 40,
            initial: None,
            dt: None,
            max_time: 2000.0,
        }
    }
}

/// Steady state with default options and the given residual tolerance.
pub fn steady_state(h: &Operator, p: &ModelParams, tol: f64) -> Result<DensityMatrix> {
    steady_state_with(
        &Liouvillian::new(h, p)?,
        p,
        &SteadyStateOptions {
            tol,
            ..Default::default()
        },
    )
}

fn residual(l: &Liouvillian, rho: &CMatrix) -> f64 {
    l.apply_hermitian(rho).norm()
}

/// Null vector of the generator: dense solve for small systems, otherwise a
/// Krylov-accelerated fixed-point solve of the propagator.
pub fn steady_state_with(l: &Liouvillian, p: &ModelParams, opts: &SteadyStateOptions) -> Result<DensityMatrix> {
    if p.gamma <= 0.0 {
        return Err(Error::NoSteadyState(
            "gamma = 0: closed system has no attracting state".into(),
        ));
    }
    let n = l.dim();
    let mut rho = if n <= opts.dense_limit && opts.initial.is_none() {
        dense_null_state(l)?
    } else {
        integrate_to_steady(l, p, opts)?
    };
    hermitize(&mut rho);
    normalize_trace(&mut rho);
    let res = residual(l, &rho);
    if res > opts.tol {
        return Err(Error::SteadyStateNotConverged {
            residual: res,
            time: 0.0,
        });
    }
    DensityMatrix::new(l.dims().to_vec(), rho)
}

fn dense_null_state(l: &Liouvillian) -> Result<CMatrix> {
    let n = l.dim();
    let mut sup = l.superoperator();
    // replace one equation by the trace condition
    for c in 0..n * n {
        sup[(0, c)] = C64::new(0.0, 0.0);
    }
    for j in 0..n {
        sup[(0, j + j * n)] = C64::new(1.0, 0.0);
    }
    let mut rhs = crate::hilbert::CVector::zeros(n * n);
    rhs[0] = C64::new(1.0, 0.0);
    let sol = sup
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoSteadyState("generator null space is not one-dimensional".into()))?;
    Ok(CMatrix::from_column_slice(n, n, sol.as_slice()))
}

fn dot(a: &CMatrix, b: &CMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Newton–Krylov solve for the fixed point of the time-`T` propagator.
///
/// GMRES runs over Hermitian matrices as a real vector space on
/// `B(x) = x - Φ_T(x) + tr(x) I/n`, whose unique solution of `B(x) = I/n`
/// is the normalised steady state.
fn integrate_to_steady(l: &Liouvillian, p: &ModelParams, opts: &SteadyStateOptions) -> Result<CMatrix> {
    const RESTART: usize = 30;
    let n = l.dim();
    let mut rho = match &opts.initial {
        Some(r) => {
            if r.dims() != l.dims() {
                return Err(Error::Shape("initial guess does not match generator".into()));
            }
            r.matrix().clone()
        }
        None => {
            let mut v = CMatrix::zeros(n, n);
            v[(0, 0)] = C64::new(1.0, 0.0);
            v
        }
    };
    let h = opts
        .dt
        .unwrap_or_else(|| (2.5 / l.stiffness().max(1e-12)).min(0.05 / p.gamma).min(0.05));
    let span = ((1.0 / p.gamma) / h).ceil() as usize;
    let max_matvecs = ((opts.max_time / p.gamma) / (span as f64 * h)).ceil() as usize;
    let mut stepper = MasterStepper::new(l, h);
    let w = CMatrix::identity(n, n) / C64::new(n as f64, 0.0);
    let matvecs = std::cell::Cell::new(0usize);
    let mut apply = |x: &CMatrix, out: &mut CMatrix| {
        out.copy_from(x);
        for _ in 0..span {
            stepper.step(out);
        }
        let tr = x.trace().re;
        for ((o, xv), wv) in out.as_mut_slice().iter_mut().zip(x.as_slice()).zip(w.as_slice()) {
            *o = xv - *o + wv * tr;
        }
        matvecs.set(matvecs.get() + 1);
    };
    let mut best = f64::INFINITY;
    let mut tmp = CMatrix::zeros(n, n);
    loop {
        hermitize(&mut rho);
        normalize_trace(&mut rho);
        let res = residual(l, &rho);
        if !res.is_finite() {
            return Err(Error::Integration {
                step: matvecs.get() * span,
                reason: "steady-state iteration produced non-finite values".into(),
            });
        }
        if res < opts.tol {
            return Ok(rho);
        }
        let time = (matvecs.get() * span) as f64 * h;

        if matvecs.get() >= max_matvecs || res > 0.9 * best {
            return Err(Error::SteadyStateNotConverged { residual: res, time });
        }
        best = res;

        apply(&rho, &mut tmp);
        let mut r = &w - &tmp;
        let beta = r.norm();
        r /= C64::new(beta, 0.0);
        let mut basis = vec![r];
        let mut hess = vec![vec![0.0; RESTART]; RESTART + 1];
        let (mut cs, mut sn) = (vec![0.0; RESTART], vec![0.0; RESTART]);
        let mut g = vec![0.0; RESTART + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..RESTART {
            let mut v = CMatrix::zeros(n, n);
            apply(&basis[j], &mut v);
            for (i, b) in basis.iter().enumerate() {
                let hij = dot(b, &v);
                hess[i][j] = hij;
                add_scaled_into(&mut v, -hij, b);
            }
            let hn = v.norm();
            hess[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let den = hess[j][j].hypot(hess[j + 1][j]);
            cs[j] = hess[j][j] / den;
            sn[j] = hess[j + 1][j] / den;
            hess[j][j] = den;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            if g[j + 1].abs() < 1e-13 * beta.max(1.0) || hn < 1e-300 {
                break;
            }
            v /= C64::new(hn, 0.0);
            basis.push(v);
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| hess[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (yi, b) in y.iter().zip(&basis) {
            add_scaled_into(&mut rho, *yi, b);
        }
    }
}

#[cfg(test)]
mod tests;
