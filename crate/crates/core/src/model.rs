//! Kerr Ising model: parameters, coupling graphs, Hamiltonians and the
//! semiclassical amplitude equations.
//!
//! Single cavity (rotating frame, pump mode eliminated):
//!
//! ```text
//! H0 = chi (a†² - eps*/chi)(a² - eps/chi) + delta a†a
//! ```
//!
//! Network: `H = sum_i H0(i) + eta a⃗† S a⃗` with `S` the symmetric adjacency
//! matrix. The undriven drift of the mean field (with damping) is
//!
//! ```text
//! dα_i/dt = -i(2 chi |α_i|² α_i - 2 eps α_i* + delta α_i + eta (S α)_i) - (gamma/2) α_i
//! ```
//!
//! The positive-P variables and diffusion behind these equations are not
//! simulated; only the drift is used.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Dyn, Schur};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::sparse::{embed_sparse, CsrMatrix};
use crate::hilbert::{self, check_cutoff, min_cutoff_for, CMatrix, FockCutoff, Operator};

/// Physical constants of a network of identical cavities.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Kerr coefficient, > 0.
    pub chi: f64,
    /// Detuning of half the pump frequency from the cavity.
    pub delta: f64,
    /// Pump amplitude.
    pub epsilon: C64,
    /// Coupling strength multiplying the adjacency matrix.
    pub eta: f64,
    /// Cavity decay rate.
    pub gamma: f64,
    /// Thermal occupation of the bath.
    pub nbar: f64,
    /// One cutoff per cavity; its length is the number of modes.
    pub cutoffs: Vec<FockCutoff>,
}

impl ModelParams {
    /// Closed network (no damping) of `n_modes` cavities with real pump.
    pub fn closed(n_modes: usize, cutoff: usize, chi: f64, delta: f64, epsilon: f64, eta: f64) -> Result<Self> {
        let c = FockCutoff::new(cutoff)?;
        let p = Self {
            chi,
            delta,
            epsilon: C64::new(epsilon, 0.0),
            eta,
            gamma: 0.0,
            nbar: 0.0,
            cutoffs: vec![c; n_modes],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_damping(mut self, gamma: f64, nbar: f64) -> Result<Self> {
        self.gamma = gamma;
        self.nbar = nbar;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.chi,
            self.delta,
            self.epsilon.re,
            self.epsilon.im,
            self.eta,
            self.gamma,
            self.nbar,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if self.chi <= 0.0 {
            return Err(Error::InvalidArgument(format!("chi must be > 0, got {}", self.chi)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if self.nbar < 0.0 {
            return Err(Error::InvalidArgument(format!("nbar must be >= 0, got {}", self.nbar)));
        }
        if self.cutoffs.is_empty() {
            return Err(Error::InvalidArgument("at least one mode required".into()));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        hilbert::dims_of(&self.cutoffs)
    }

    /// Coherent amplitude of the undetuned single-cavity ground manifold,
    /// `sqrt(|eps|/chi)`.
    pub fn alpha0(&self) -> f64 {
        (self.epsilon.norm() / self.chi).sqrt()
    }
}

/// Cutoff rule `ceil(|a0|² + 5 sqrt(|a0|² + 1))`, raised where needed so the
/// coherent state `|a0>` passes the tail-mass check.
pub fn default_cutoff(chi: f64, epsilon: f64) -> usize {
    let n0 = epsilon.abs() / chi;
    let rule = (n0 + 5.0 * (n0 + 1.0).sqrt()).ceil() as usize;
    rule.max(min_cutoff_for(n0.sqrt())).max(2)
}

/// Real symmetric coupling graph with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    entries: DMatrix<f64>,
}

impl AdjacencyMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n || n == 0 {
            return Err(Error::Shape(format!(
                "adjacency matrix must be square and nonempty, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal entry at {i}")));
            }
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Two cavities joined by one unit-weight edge.
    pub fn pair() -> Self {
        Self {
            entries: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        }
    }

    pub fn uncoupled(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Parses an undirected edge list, one `i j weight` line per edge with
    /// 0-indexed nodes. Blank lines and `#` comments are skipped. A pair may
    /// appear once in either order. Without `n_modes` the node count is the
    /// largest index plus one.
    pub fn from_edge_list(text: &str, source: &str, n_modes: Option<usize>) -> Result<Self> {
        let err = |line: usize, message: String| Error::EdgeList {
            file: source.to_string(),
            line,
            message,
        };
        let mut edges: Vec<(usize, usize, f64, usize)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(
                    line_no,
                    format!("expected `i j weight`, found {} fields", fields.len()),
                ));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| err(line_no, format!("bad node index `{}`", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| err(line_no, format!("bad node index `{}`", fields[1])))?;
            let w: f64 = fields[2]
                .parse()
                .map_err(|_| err(line_no, format!("bad weight `{}`", fields[2])))?;
            if !w.is_finite() {
                return Err(err(line_no, "weight must be finite".into()));
            }
            if i == j {
                return Err(err(line_no, format!("self-loop on node {i}")));
            }
            let key = (i.min(j), i.max(j));
            if let Some(prev) = edges.iter().find(|e| (e.0, e.1) == key) {
                return Err(err(
                    line_no,
                    format!("duplicate edge {i}-{j} (first given on line {})", prev.3),
                ));
            }
            edges.push((key.0, key.1, w, line_no));
        }
        let max_idx = edges.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let n = match n_modes {
            Some(n) => {
                if let Some(e) = edges.iter().find(|e| e.1 >= n) {
                    return Err(err(e.3, format!("node {} out of range for {n} modes", e.1)));
                }
                n
            }
            None => max_idx,
        };
        if n == 0 {
            return Err(err(0, "edge list defines no nodes".into()));
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, j, w, _) in edges {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        Self::new(m)
    }

    pub fn from_edge_list_file(path: &Path, n_modes: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_edge_list(&text, &path.display().to_string(), n_modes)
    }

    /// `v^T S v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += v[i] * self.entries[(i, j)] * v[j];
            }
        }
        s
    }
}

/// Ising spin configuration, entries ±1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("spins must be ±1: {spins:?}")));
        }
        Ok(Self(spins))
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    /// All `2^n` configurations, spin 0 as the most significant bit.
    pub fn all(n: usize) -> Vec<SpinConfig> {
        (0..1usize << n)
            .map(|bits| {
                Self(
                    (0..n)
                        .map(|k| if bits >> (n - 1 - k) & 1 == 1 { -1 } else { 1 })
                        .collect(),
                )
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsingParams {
    pub j: f64,
    pub b: f64,
    pub mu: f64,
}

/// Classical Ising energy `-mu B sum σ - J σ^T S σ`.
pub fn ising_energy(sigma: &SpinConfig, ip: &IsingParams, s: &AdjacencyMatrix) -> Result<f64> {
    if sigma.len() != s.n() {
        return Err(Error::Shape(format!("{} spins on a {}-node graph", sigma.len(), s.n())));
    }
    let v = sigma.as_f64();
    Ok(-ip.mu * ip.b * v.iter().sum::<f64>() - ip.j * s.quadratic_form(&v))
}

/// First-order energy of the coherent configuration `sqrt(|eps|/chi) σ`:
/// `N delta |eps|/chi + eta α^T S α`.
pub fn perturbed_energy(sigma: &SpinConfig, p: &ModelParams, s: &AdjacencyMatrix) -> Result<f64> {
    if sigma.len() != s.n() || sigma.len() != p.n_modes() {
        return Err(Error::Shape("spin count, graph and model disagree".into()));
    }
    let a2 = p.epsilon.norm() / p.chi;
    Ok(p.n_modes() as f64 * p.delta * a2 + p.eta * a2 * s.quadratic_form(&sigma.as_f64()))
}

fn check_graph(p: &ModelParams, s: &AdjacencyMatrix) -> Result<()> {
    if s.n() != p.n_modes() {
        return Err(Error::Shape(format!(
            "adjacency matrix is {}x{} but the model has {} modes",
            s.n(),
            s.n(),
            p.n_modes()
        )));
    }
    Ok(())
}

fn single_cavity_terms(p: &ModelParams, d: usize) -> CMatrix {
    let a = hilbert::annihilation(d).expect("cutoff validated").into_matrix();
    let ad = a.adjoint();
    let a2 = &a * &a;
    let ad2 = &ad * &ad;
    let chi = C64::new(p.chi, 0.0);
    let mut h = &ad2 * &a2 * chi;
    h -= &ad2 * p.epsilon;
    h -= &a2 * p.epsilon.conj();
    h += CMatrix::identity(d, d) * C64::new(p.epsilon.norm_sqr() / p.chi, 0.0);
    h += &ad * &a * C64::new(p.delta, 0.0);
    h
}

fn check_mode_cutoff(p: &ModelParams, mode: usize) -> Result<()> {
    check_cutoff(p.alpha0(), p.cutoffs[mode].get())
}

/// Single-cavity Hamiltonian embedded on `mode`, sparse.
pub fn cavity_hamiltonian_sparse(p: &ModelParams, mode: usize) -> Result<CsrMatrix> {
    p.validate()?;
    if mode >= p.n_modes() {
        return Err(Error::Shape(format!(
            "mode {mode} out of range for {} modes",
            p.n_modes()
        )));
    }
    check_mode_cutoff(p, mode)?;
    let dims = p.dims();
    Ok(embed_sparse(&single_cavity_terms(p, dims[mode]), mode, &dims))
}

pub fn cavity_hamiltonian(p: &ModelParams, mode: usize) -> Result<Operator> {
    Operator::new(p.dims(), cavity_hamiltonian_sparse(p, mode)?.to_dense())
}

/// Network Hamiltonian in sparse form.
pub fn network_hamiltonian_sparse(p: &ModelParams, s: &AdjacencyMatrix) -> Result<CsrMatrix> {
    p.validate()?;
    check_graph(p, s)?;
    let dims = p.dims();
    let mut h = CsrMatrix::zeros(dims.iter().product());
    for mode in 0..p.n_modes() {
        h = h.add(&cavity_hamiltonian_sparse(p, mode)?);
    }
    if p.eta != 0.0 {
        let lowering: Vec<CsrMatrix> = (0..p.n_modes())
            .map(|m| embed_sparse(hilbert::annihilation(dims[m]).unwrap().matrix(), m, &dims))
            .collect();
        for i in 0..p.n_modes() {
            let raise = lowering[i].adjoint();
            for j in 0..p.n_modes() {
                let w = s.entries()[(i, j)];
                if w != 0.0 {
                    h = h.add_scaled(&raise.matmul(&lowering[j]), C64::new(p.eta * w, 0.0));
                }
            }
        }
    }
    Ok(h)
}

pub fn network_hamiltonian(p: &ModelParams, s: &AdjacencyMatrix) -> Result<Operator> {
    Operator::new(p.dims(), network_hamiltonian_sparse(p, s)?.to_dense())
}

/// The mean-field matrix `2 eps I⊗σx - (delta I + 2 chi diag|α|² + eta S)⊗σz`
/// in the interleaved ordering `(α_1, α_1*, α_2, α_2*, ...)`.
///
/// This is the matrix as conventionally written; it is traceless for every
/// input. Linear stability should use [`linearized_generator`], which is
/// the exact Jacobian of [`classical_drift`].
pub fn semiclassical_matrix(alpha: &[C64], p: &ModelParams, s: &AdjacencyMatrix) -> Result<CMatrix> {
    check_graph(p, s)?;
    let n = p.n_modes();
    if alpha.len() != n {
        return Err(Error::Shape(format!("{} amplitudes for {n} modes", alpha.len())));
    }
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(2 * i, 2 * i + 1)] = 2.0 * p.epsilon;
        m[(2 * i + 1, 2 * i)] = 2.0 * p.epsilon;
        for j in 0..n {
            let mut b = p.eta * s.entries()[(i, j)];
            if i == j {
                b += p.delta + 2.0 * p.chi * alpha[i].norm_sqr();
            }
            m[(2 * i, 2 * j)] -= C64::new(b, 0.0);
            m[(2 * i + 1, 2 * j + 1)] += C64::new(b, 0.0);
        }
    }
    Ok(m)
}

/// Mean-field drift `dα/dt` including damping `-(gamma/2) α`.
pub fn classical_drift(alpha: &[C64], p: &ModelParams, s: &AdjacencyMatrix) -> Result<Vec<C64>> {
    check_graph(p, s)?;
    if alpha.len() != p.n_modes() {
        return Err(Error::Shape(format!(
            "{} amplitudes for {} modes",
            alpha.len(),
            p.n_modes()
        )));
    }
    Ok(drift(alpha, p, s))
}

pub(crate) fn drift(alpha: &[C64], p: &ModelParams, s: &AdjacencyMatrix) -> Vec<C64> {
    let n = alpha.len();
    let i = C64::new(0.0, 1.0);
    let sm = s.entries();
    (0..n)
        .map(|k| {
            let mut coupled = C64::new(0.0, 0.0);
            for j in 0..n {
                coupled += sm[(k, j)] * alpha[j];
            }
            let a = alpha[k];
            let inner = 2.0 * p.chi * a.norm_sqr() * a - 2.0 * p.epsilon * a.conj() + p.delta * a + p.eta * coupled;
            -i * inner - 0.5 * p.gamma * a
        })
        .collect()
}

/// Jacobian of the drift in `(α_1, α_1*, ...)` coordinates.
pub fn linearized_generator(
    alpha: &[C64],
    p: &ModelParams,
    s: &AdjacencyMatrix,
    with_damping: bool,
) -> Result<CMatrix> {
    check_graph(p, s)?;
    let n = p.n_modes();
    if alpha.len() != n {
        return Err(Error::Shape(format!("{} amplitudes for {n} modes", alpha.len())));
    }
    let i = C64::new(0.0, 1.0);
    let damp = if with_damping { 0.5 * p.gamma } else { 0.0 };
    let mut g = CMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let a = alpha[k];
        let d_self = -i * (4.0 * p.chi * a.norm_sqr() + p.delta) - damp;
        let d_conj = -i * (2.0 * p.chi * a * a - 2.0 * p.epsilon);
        g[(2 * k, 2 * k)] = d_self;
        g[(2 * k, 2 * k + 1)] = d_conj;
        g[(2 * k + 1, 2 * k + 1)] = d_self.conj();
        g[(2 * k + 1, 2 * k)] = d_conj.conj();
        for j in 0..n {
            if j != k {
                let c = -i * p.eta * s.entries()[(k, j)];
                g[(2 * k, 2 * j)] += c;
                g[(2 * k + 1, 2 * j + 1)] += c.conj();
            }
        }
    }
    Ok(g)
}

/// Same Jacobian for real coordinates `(x_1, y_1, x_2, y_2, ...)`, α = x + iy.
pub fn real_jacobian(alpha: &[C64], p: &ModelParams, s: &AdjacencyMatrix, with_damping: bool) -> Result<DMatrix<f64>> {
    let g = linearized_generator(alpha, p, s, with_damping)?;
    let n = p.n_modes();
    let i = C64::new(0.0, 1.0);
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        for m in 0..n {
            let fa = g[(2 * k, 2 * m)];
            let fc = g[(2 * k, 2 * m + 1)];
            let dx = fa + fc;
            let dy = i * (fa - fc);
            j[(2 * k, 2 * m)] = dx.re;
            j[(2 * k + 1, 2 * m)] = dx.im;
            j[(2 * k, 2 * m + 1)] = dy.re;
            j[(2 * k + 1, 2 * m + 1)] = dy.im;
        }
    }
    Ok(j)
}

/// Eigenvalues of a real matrix. The unbounded Schur iteration in nalgebra
/// can stall on exactly rotational blocks (undamped, undriven cavities), so
/// iterations are capped and a stalled matrix is retried after a fixed
/// orthogonal similarity, which leaves the spectrum unchanged.
fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    const MAX_ITER: usize = 10_000;
    let n = m.nrows();
    let collect = |s: Schur<f64, Dyn>| s.complex_eigenvalues().iter().map(|z| C64::new(z.re, z.im)).collect();
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, MAX_ITER) {
        return Ok(collect(s));
    }
    let v = DVector::from_fn(n, |i, _| 1.0 + ((i + 1) as f64).sqrt()).normalize();
    let q = DMatrix::identity(n, n) - 2.0 * &v * v.transpose();
    Schur::try_new(&q * m * &q, f64::EPSILON, MAX_ITER)
        .map(collect)
        .ok_or(Error::EigenNotConverged(n))
}

/// A root of the mean-field drift.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub alpha: Vec<C64>,
    pub residual: f64,
    /// All Jacobian eigenvalues have negative real part.
    pub stable: bool,
    /// Seed that first produced this root; `None` for the origin seed.
    pub seed: Option<SpinConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointReport {
    pub roots: Vec<FixedPoint>,
    /// Seeds whose Newton iteration did not converge (`None` = origin).
    pub unconverged: Vec<Option<SpinConfig>>,
}

impl FixedPointReport {
    pub fn stable(&self) -> impl Iterator<Item = &FixedPoint> {
        self.roots.iter().filter(|r| r.stable)
    }
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-12;

fn residual_norm(alpha: &[C64], p: &ModelParams, s: &AdjacencyMatrix) -> f64 {
    drift(alpha, p, s).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn newton(seed: Vec<C64>, p: &ModelParams, s: &AdjacencyMatrix) -> Option<(Vec<C64>, f64)> {
    let n = seed.len();
    let mut alpha = seed;
    let mut res = residual_norm(&alpha, p, s);
    for _ in 0..NEWTON_MAX_ITER {
        if res < NEWTON_TOL {
            return Some((alpha, res));
        }
        let f = drift(&alpha, p, s);
        let rhs = DVector::from_iterator(2 * n, f.iter().flat_map(|z| [-z.re, -z.im]));
        let jac = real_jacobian(&alpha, p, s, true).ok()?;
        let step = jac.lu().solve(&rhs)?;
        // backtracking keeps the residual monotone
        let mut lambda = 1.0;
        loop {
            let trial: Vec<C64> = (0..n)
                .map(|k| alpha[k] + lambda * C64::new(step[2 * k], step[2 * k + 1]))
                .collect();
            let tres = residual_norm(&trial, p, s);
            if tres < res || lambda < 1e-6 {
                alpha = trial;
                res = tres;
                break;
            }
            lambda *= 0.5;
        }
        if !res.is_finite() {
            return None;
        }
    }
    (res < NEWTON_TOL).then_some((alpha, res))
}

/// Roots of the drift seeded from the origin and from `sqrt(|eps|/chi) σ`
/// for every spin configuration σ, refined by Newton's method.
pub fn fixed_points(p: &ModelParams, s: &AdjacencyMatrix) -> Result<FixedPointReport> {
    p.validate()?;
    check_graph(p, s)?;
    let n = p.n_modes();
    if n > 12 {
        return Err(Error::TooManyModes(n));
    }
    let a0 = p.alpha0();
    let mut seeds: Vec<(Option<SpinConfig>, Vec<C64>)> = vec![(None, vec![C64::new(0.0, 0.0); n])];
    if a0 > 0.0 {
        for cfg in SpinConfig::all(n) {
            let v = cfg.as_f64().iter().map(|&x| C64::new(a0 * x, 0.0)).collect();
            seeds.push((Some(cfg), v));
        }
    }
    let mut report = FixedPointReport {
        roots: Vec::new(),
        unconverged: Vec::new(),
    };
    for (cfg, seed) in seeds {
        match newton(seed, p, s) {
            Some((alpha, residual)) => {
                let dup = report.roots.iter().any(|r| {
                    r.alpha
                        .iter()
                        .zip(&alpha)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                        < 1e-8
                });
                if dup {
                    continue;
                }
                let jac = real_jacobian(&alpha, p, s, true)?;
                let stable = real_eigenvalues(&jac)?.iter().all(|z| z.re < 0.0);
                report.roots.push(FixedPoint {
                    alpha,
                    residual,
                    stable,
                    seed: cfg,
                });
            }
            None => report.unconverged.push(cfg),
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub epsilon: f64,
    /// Trace of the mean-field matrix at the origin (identically zero).
    pub trace: f64,
    /// Determinant of the undamped linearisation at the origin.
    pub det: f64,
    /// Eigenvalues with positive real part, undamped and damped.
    pub unstable_undamped: usize,
    pub unstable_damped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BistabilityScan {
    pub rows: Vec<ScanRow>,
    /// Grid intervals `[eps_k, eps_{k+1}]` across which `det` changes sign.
    pub det_sign_changes: Vec<(f64, f64)>,
    /// Grid intervals where the origin's number of unstable directions
    /// changes; with damping this is where the origin loses stability.
    pub instability_changes: Vec<(f64, f64)>,
    pub damped_instability_changes: Vec<(f64, f64)>,
}

impl BistabilityScan {
    /// First grid point at which the damped origin is unstable.
    pub fn damped_threshold(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.unstable_damped > 0).map(|r| r.epsilon)
    }
}

/// Linear stability of the origin along a pump grid.
///
/// `det` is taken of the drift's own linearisation. For one cavity it is
/// `delta² - 4|eps|²` and changes sign at `|eps| = delta/2`. For symmetric
/// pairs at zero detuning the factors coincide and `det` only touches zero,
/// so the change in unstable directions is reported alongside.
pub fn bistability_scan(p: &ModelParams, s: &AdjacencyMatrix, epsilon_grid: &[f64]) -> Result<BistabilityScan> {
    if epsilon_grid.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon grid".into()));
    }
    let increasing = epsilon_grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = epsilon_grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidArgument("epsilon grid must be strictly monotone".into()));
    }
    let origin = vec![C64::new(0.0, 0.0); p.n_modes()];
    let mut rows = Vec::with_capacity(epsilon_grid.len());
    for &eps in epsilon_grid {
        let mut q = p.clone();
        q.epsilon = C64::new(eps, 0.0);
        let count = |damped: bool| -> Result<usize> {
            let j = real_jacobian(&origin, &q, s, damped)?;
            Ok(real_eigenvalues(&j)?.iter().filter(|z| z.re > 1e-12).count())
        };
        let trace = semiclassical_matrix(&origin, &q, s)?.trace().re;
        let det = real_jacobian(&origin, &q, s, false)?.determinant();
        rows.push(ScanRow {
            epsilon: eps,
            trace,
            det,
            unstable_undamped: count(false)?,
            unstable_damped: count(true)?,
        });
    }
    let intervals = |pred: &dyn Fn(&ScanRow, &ScanRow) -> bool| -> Vec<(f64, f64)> {
        rows.windows(2)
            .filter(|w| pred(&w[0], &w[1]))
            .map(|w| (w[0].epsilon, w[1].epsilon))
            .collect()
    };
    let det_sign_changes = intervals(&|a, b| a.det * b.det < 0.0 || (a.det != 0.0 && b.det == 0.0));
    let instability_changes = intervals(&|a, b| a.unstable_undamped != b.unstable_undamped);
    let damped_instability_changes = intervals(&|a, b| a.unstable_damped != b.unstable_damped);
    Ok(BistabilityScan {
        rows,
        det_sign_changes,
        instability_changes,
        damped_instability_changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn fig3() -> ModelParams {
        ModelParams::closed(2, 18, 0.5, 0.0, 1.0, 1.0)
            .unwrap()
            .with_damping(1.0, 0.0)
            .unwrap()
    }

    #[test]
    fn undriven_cavity_is_number_diagonal() {
        let p = ModelParams::closed(1, 8, 0.7, 0.0, 0.0, 0.0).unwrap();
        let h = cavity_hamiltonian(&p, 0).unwrap();
        let ev = h.hermitian_eigenvalues();
        let mut want: Vec<f64> = (0..8).map(|n| 0.7 * (n * n.max(1) - n) as f64).collect();
        want.sort_by(|a, b| a.total_cmp(b));
        for (e, w) in ev.iter().zip(want) {
            assert!((e - w).abs() < 1e-10, "{e} vs {w}");
        }
    }

    #[test]
    fn coherent_states_are_zero_energy_on_resonance() {
        let p = ModelParams::closed(1, 40, 0.5, 0.0, 2.0, 0.0).unwrap();
        let h = cavity_hamiltonian(&p, 0).unwrap();
        assert!(h.is_hermitian(1e-10));
        let hnorm = h.hermitian_eigenvalues().iter().fold(0.0f64, |m, e| m.max(e.abs()));
        for sign in [1.0, -1.0] {
            let psi = hilbert::coherent_state(c(sign * 2.0), 40).unwrap();
            let out = h.apply(&psi).unwrap();
            assert!(out.norm() < 1e-4 * hnorm);
        }
    }

    #[test]
    fn small_detuning_shifts_ground_energy_linearly() {
        let p = ModelParams::closed(1, 40, 0.5, 0.05, 2.0, 0.0).unwrap();
        let e0 = cavity_hamiltonian(&p, 0).unwrap().hermitian_eigenvalues()[0];
        let want = 0.05 * 4.0;
        assert!((e0 - want).abs() < 0.05 * want, "{e0} vs {want}");
    }

    #[test]
    fn cutoff_too_small_is_reported() {
        let p = ModelParams::closed(1, 10, 0.5, 0.0, 2.0, 0.0).unwrap();
        assert!(matches!(cavity_hamiltonian(&p, 0), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn default_cutoff_passes_tail_check() {
        for eps in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let d = default_cutoff(0.5, eps);
            assert!(hilbert::check_cutoff((eps / 0.5f64).sqrt(), d).is_ok());
        }
    }

    #[test]
    fn pair_coupling_expands_to_hopping() {
        let mut p = ModelParams::closed(2, 4, 0.5, 0.0, 0.0, 0.3).unwrap();
        let h = network_hamiltonian(&p, &AdjacencyMatrix::pair()).unwrap();
        p.eta = 0.0;
        let h0 = network_hamiltonian(&p, &AdjacencyMatrix::pair()).unwrap();
        let dims = p.dims();
        let a1 = hilbert::embed(&hilbert::annihilation(4).unwrap(), 0, &dims).unwrap();
        let a2 = hilbert::embed(&hilbert::annihilation(4).unwrap(), 1, &dims).unwrap();
        let hop = a1
            .dagger()
            .mul(&a2)
            .unwrap()
            .add(&a2.dagger().mul(&a1).unwrap())
            .unwrap();
        let diff = h.matrix() - h0.matrix() - hop.matrix() * c(0.3);
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn uncoupled_network_spectrum_is_sum_of_cavity_spectra() {
        let p = ModelParams::closed(2, 10, 0.5, 0.2, 0.3, 0.0).unwrap();
        let single = ModelParams::closed(1, 10, 0.5, 0.2, 0.3, 0.0).unwrap();
        let e1 = cavity_hamiltonian(&single, 0).unwrap().hermitian_eigenvalues();
        let mut sums: Vec<f64> = e1.iter().flat_map(|a| e1.iter().map(move |b| a + b)).collect();
        sums.sort_by(|a, b| a.total_cmp(b));
        let ev = network_hamiltonian(&p, &AdjacencyMatrix::pair())
            .unwrap()
            .hermitian_eigenvalues();
        for (e, w) in ev.iter().zip(&sums) {
            assert!((e - w).abs() < 1e-9);
        }
    }

    #[test]
    fn network_rejects_wrong_graph_size() {
        let p = ModelParams::closed(3, 3, 0.5, 0.0, 0.0, 0.1).unwrap();
        assert!(matches!(
            network_hamiltonian(&p, &AdjacencyMatrix::pair()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn ising_energy_examples() {
        let s = AdjacencyMatrix::pair();
        let up_down = SpinConfig::new(vec![1, -1]).unwrap();
        let up_up = SpinConfig::new(vec![1, 1]).unwrap();
        let coupling = IsingParams {
            j: 1.0,
            b: 0.0,
            mu: 1.0,
        };
        assert_eq!(ising_energy(&up_down, &coupling, &s).unwrap(), 2.0);
        assert_eq!(ising_energy(&up_up, &coupling, &s).unwrap(), -2.0);
        let field = IsingParams {
            j: 0.0,
            b: 1.0,
            mu: 1.0,
        };
        assert_eq!(ising_energy(&up_down, &field, &s).unwrap(), 0.0);
    }

    #[test]
    fn perturbed_energy_examples() {
        let s = AdjacencyMatrix::pair();
        let p = ModelParams::closed(2, 40, 0.5, 0.0, 2.0, 0.05).unwrap();
        let anti = SpinConfig::new(vec![1, -1]).unwrap();
        let ferro = SpinConfig::new(vec![1, 1]).unwrap();
        assert!((perturbed_energy(&anti, &p, &s).unwrap() + 0.4).abs() < 1e-12);
        assert!((perturbed_energy(&ferro, &p, &s).unwrap() - 0.4).abs() < 1e-12);
        let mut q = p.clone();
        q.eta = 0.0;
        for cfg in SpinConfig::all(2) {
            assert_eq!(perturbed_energy(&cfg, &q, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn perturbed_energy_ranks_like_ising_with_negative_coupling() {
        let s = AdjacencyMatrix::pair();
        let p = ModelParams::closed(2, 40, 0.5, 0.1, 2.0, 0.05).unwrap();
        let ip = IsingParams {
            j: -p.eta,
            b: 0.0,
            mu: 0.0,
        };
        let configs = SpinConfig::all(2);
        let argmin = |f: &dyn Fn(&SpinConfig) -> f64| -> Vec<SpinConfig> {
            let best = configs.iter().map(f).fold(f64::INFINITY, f64::min);
            configs
                .iter()
                .filter(|c| (f(c) - best).abs() < 1e-12)
                .cloned()
                .collect()
        };
        let a = argmin(&|c| perturbed_energy(c, &p, &s).unwrap());
        let b = argmin(&|c| ising_energy(c, &ip, &s).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn semiclassical_matrix_examples() {
        let s1 = AdjacencyMatrix::uncoupled(1);
        let p = ModelParams::closed(1, 4, 0.5, 0.0, 0.7, 0.0).unwrap();
        let m = semiclassical_matrix(&[c(0.0)], &p, &s1).unwrap();
        let mut ev = crate::hilbert::hermitian_eigenvalues(&m);
        ev.sort_by(|a, b| a.total_cmp(b));
        assert!((ev[0] + 1.4).abs() < 1e-12 && (ev[1] - 1.4).abs() < 1e-12);

        let q = ModelParams::closed(1, 4, 0.5, 0.3, 0.0, 0.0).unwrap();
        let m = semiclassical_matrix(&[c(0.0)], &q, &s1).unwrap();
        let ev = crate::hilbert::hermitian_eigenvalues(&m);
        assert!((ev[0] + 0.3).abs() < 1e-12 && (ev[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn drift_vanishes_at_origin_and_undamped_alpha0() {
        let s1 = AdjacencyMatrix::uncoupled(1);
        let p = ModelParams::closed(1, 20, 0.5, 0.0, 2.0, 0.0).unwrap();
        assert_eq!(classical_drift(&[c(0.0)], &p, &s1).unwrap()[0], c(0.0));
        let f = classical_drift(&[c(2.0)], &p, &s1).unwrap();
        assert!(f[0].norm() < 1e-14);
    }

    #[test]
    fn undamped_single_cavity_roots() {
        let s1 = AdjacencyMatrix::uncoupled(1);
        let p = ModelParams::closed(1, 20, 0.5, 0.0, 2.0, 0.0).unwrap();
        let rep = fixed_points(&p, &s1).unwrap();
        let has = |x: f64| rep.roots.iter().any(|r| (r.alpha[0] - c(x)).norm() < 1e-9);
        assert!(has(0.0) && has(2.0) && has(-2.0));
        assert!(rep.unconverged.is_empty());
    }

    #[test]
    fn damped_pair_has_antiferro_roots_and_unstable_origin() {
        let p = fig3();
        let s = AdjacencyMatrix::pair();
        let rep = fixed_points(&p, &s).unwrap();
        let origin = rep
            .roots
            .iter()
            .find(|r| r.alpha.iter().all(|z| z.norm() < 1e-12))
            .unwrap();
        assert!(!origin.stable);
        let anti: Vec<_> = rep
            .roots
            .iter()
            .filter(|r| r.alpha[0].norm() > 0.1 && (r.alpha[0] + r.alpha[1]).norm() < 1e-8)
            .collect();
        assert_eq!(anti.len(), 2);
        for r in &rep.roots {
            assert!(r.residual < 1e-10);
            assert!(residual_norm(&r.alpha, &p, &s) < 1e-10);
        }
        assert!(anti.iter().all(|r| r.stable));
    }

    #[test]
    fn damped_undriven_origin_is_only_root() {
        let mut p = fig3();
        p.epsilon = c(0.0);
        let rep = fixed_points(&p, &AdjacencyMatrix::pair()).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!(rep.roots[0].stable);
    }

    #[test]
    fn generator_matches_finite_differences() {
        let p = fig3();
        let s = AdjacencyMatrix::pair();
        let alpha = vec![C64::new(0.7, -0.3), C64::new(-1.1, 0.4)];
        let jac = real_jacobian(&alpha, &p, &s, true).unwrap();
        let h = 1e-6;
        for m in 0..4 {
            let mut plus = alpha.clone();
            let mut minus = alpha.clone();
            let dz = if m % 2 == 0 { c(h) } else { C64::new(0.0, h) };
            plus[m / 2] += dz;
            minus[m / 2] -= dz;
            let fp = drift(&plus, &p, &s);
            let fm = drift(&minus, &p, &s);
            for k in 0..2 {
                let d = (fp[k] - fm[k]) / (2.0 * h);
                assert!((d.re - jac[(2 * k, m)]).abs() < 1e-6);
                assert!((d.im - jac[(2 * k + 1, m)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn scan_single_cavity_determinant() {
        let s1 = AdjacencyMatrix::uncoupled(1);
        let p = ModelParams::closed(1, 4, 0.5, 0.0, 0.0, 0.0).unwrap();
        let grid: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
        let scan = bistability_scan(&p, &s1, &grid).unwrap();
        assert_eq!(scan.rows.len(), grid.len());
        for r in &scan.rows {
            assert!((r.det + 4.0 * r.epsilon * r.epsilon).abs() < 1e-12);
            assert_eq!(r.trace, 0.0);
        }
        assert!(scan.det_sign_changes.is_empty());

        let q = ModelParams::closed(1, 4, 0.5, 1.0, 0.0, 0.0).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64 + 0.025).collect();
        let scan = bistability_scan(&q, &s1, &grid).unwrap();
        for r in &scan.rows {
            assert!((r.det - (1.0 - 4.0 * r.epsilon * r.epsilon)).abs() < 1e-12);
        }
        assert_eq!(scan.det_sign_changes.len(), 1);
        let (lo, hi) = scan.det_sign_changes[0];
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(bistability_scan(&q, &s1, &[]).is_err());
    }

    #[test]
    fn undriven_detuned_pair_scan_terminates() {
        // Purely rotational Jacobian; the plain Schur iteration never converges here.
        let p = ModelParams::closed(2, 13, 1.0, 1.0, 0.0, 0.25).unwrap();
        let scan = bistability_scan(&p, &AdjacencyMatrix::pair(), &[0.0, 0.1]).unwrap();
        assert_eq!(scan.rows[0].unstable_undamped, 0);
        let j = real_jacobian(&[c(0.0), c(0.0)], &p, &AdjacencyMatrix::pair(), false).unwrap();
        let mut im: Vec<f64> = real_eigenvalues(&j).unwrap().iter().map(|z| z.im.abs()).collect();
        im.sort_by(f64::total_cmp);
        assert!(real_eigenvalues(&j).unwrap().iter().all(|z| z.re.abs() < 1e-9));
        // Normal-mode frequencies delta -/+ eta.
        for (got, want) in im.iter().zip([0.75, 0.75, 1.25, 1.25]) {
            assert!((got - want).abs() < 1e-9, "{im:?}");
        }
    }

    #[test]
    fn edge_list_parsing() {
        let s = AdjacencyMatrix::from_edge_list("# pair\n0 1 1.0\n", "pair.edges", None).unwrap();
        assert_eq!(s, AdjacencyMatrix::pair());
        let dup = AdjacencyMatrix::from_edge_list("0 1 1\n1 0 1\n", "g.edges", None);
        match dup {
            Err(Error::EdgeList { file, line, .. }) => {
                assert_eq!(file, "g.edges");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(AdjacencyMatrix::from_edge_list("0 1\n", "g", None).is_err());
        assert!(AdjacencyMatrix::from_edge_list("0 0 1\n", "g", None).is_err());
        assert!(AdjacencyMatrix::from_edge_list("0 x 1\n", "g", None).is_err());
        assert!(AdjacencyMatrix::from_edge_list("0 3 1\n", "g", Some(2)).is_err());
        let iso = AdjacencyMatrix::from_edge_list("0 1 0.5\n", "g", Some(3)).unwrap();
        assert_eq!(iso.n(), 3);
    }
}
