//! Truncated Fock-space linear algebra.
//!
//! Every composite object uses one Kronecker convention: mode 0 is the
//! slowest-varying index, so basis state `|n_0, n_1, ..., n_{N-1}>` sits at
//! `sum_k n_k * prod_{j>k} d_j`. Partial traces and transposes rely on it.

pub mod sparse;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tail-mass bound a truncated coherent state must satisfy.
pub const TAIL_MASS_LIMIT: f64 = 1e-8;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Number of levels `|0>..|d-1>` kept for one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockCutoff(usize);

impl FockCutoff {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidCutoff(d));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

pub fn dims_of(cutoffs: &[FockCutoff]) -> Vec<usize> {
    cutoffs.iter().map(|c| c.get()).collect()
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Per-mode occupation numbers of a composite basis index.
pub fn basis_digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

pub fn basis_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&n, &d)| acc * d + n)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Shape("at least one mode required".into()));
    }
    for &d in dims {
        FockCutoff::new(d)?;
    }
    Ok(())
}

fn same_dims(a: &[usize], b: &[usize], what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: mode dims {a:?} vs {b:?}")));
    }
    Ok(())
}

fn max_hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for c in 0..n {
        for r in c..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = if m.iter().all(|z| z.im == 0.0) {
        m.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    };
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Dense operator on a composite truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_dims(&dims)?;
        let total: usize = dims.iter().product();
        if matrix.nrows() != total || matrix.ncols() != total {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, mode dims {dims:?} need {total}x{total}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("operator has non-finite entries".into()));
        }
        Ok(Self { dims, matrix })
    }

    pub fn identity(dims: &[usize]) -> Result<Self> {
        let total = dims.iter().product();
        Self::new(dims.to_vec(), DMatrix::identity(total, total))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dims: self.dims.clone(),
            matrix: &self.matrix * s,
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        same_dims(&self.dims, &other.dims, "operator sum")?;
        Ok(Self {
            dims: self.dims.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        same_dims(&self.dims, &other.dims, "operator product")?;
        Ok(Self {
            dims: self.dims.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        let ab = self.mul(other)?;
        let ba = other.mul(self)?;
        Ok(Self {
            dims: self.dims.clone(),
            matrix: ab.matrix - ba.matrix,
        })
    }

    /// Tensor product with `other` placed on the faster-varying modes.
    pub fn tensor(&self, other: &Operator) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            dims,
            matrix: kron(&self.matrix, &other.matrix),
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<CVector> {
        same_dims(&self.dims, &psi.dims, "operator application")?;
        Ok(&self.matrix * &psi.amps)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_hermitian_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Eigenvalues, ascending; the operator must be Hermitian.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

/// Normalised pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: CVector,
}

impl StateVector {
    /// Wraps already-normalised amplitudes (norm within 1e-10 of one).
    pub fn new(dims: Vec<usize>, amps: CVector) -> Result<Self> {
        check_dims(&dims)?;
        let total: usize = dims.iter().product();
        if amps.len() != total {
            return Err(Error::Shape(format!(
                "{} amplitudes for mode dims {dims:?}",
                amps.len()
            )));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
        }
        Ok(Self { dims, amps })
    }

    /// Normalises `amps` first.
    pub fn normalized(dims: Vec<usize>, amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalise a zero vector".into()));
        }
        Self::new(dims, amps / C64::new(norm, 0.0))
    }

    pub fn basis(dims: &[usize], occupations: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        if occupations.len() != dims.len() || occupations.iter().zip(dims).any(|(n, d)| n >= d) {
            return Err(Error::Shape(format!(
                "occupations {occupations:?} do not fit mode dims {dims:?}"
            )));
        }
        let total = dims.iter().product();
        let mut amps = CVector::zeros(total);
        amps[basis_index(occupations, dims)] = C64::new(1.0, 0.0);
        Self::new(dims.to_vec(), amps)
    }

    pub fn vacuum(dims: &[usize]) -> Result<Self> {
        Self::basis(dims, &vec![0; dims.len()])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        same_dims(&self.dims, &other.dims, "inner product")?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn tensor(&self, other: &StateVector) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let amps = kron(
            &CMatrix::from_column_slice(self.amps.len(), 1, self.amps.as_slice()),
            &CMatrix::from_column_slice(other.amps.len(), 1, other.amps.as_slice()),
        );
        Self {
            dims,
            amps: CVector::from_column_slice(amps.as_slice()),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            dims: self.dims.clone(),
            matrix: &self.amps * self.amps.adjoint(),
        }
    }
}

/// Density matrix; constructors enforce Hermiticity, unit trace and
/// positivity within fixed tolerances.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let op = Operator::new(dims, matrix)?;
        let dev = op.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = op.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = op.hermitian_eigenvalues()[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e} is negative")));
        }
        Ok(Self {
            dims: op.dims,
            matrix: op.matrix,
        })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, matrix: CMatrix) -> Self {
        Self { dims, matrix }
    }

    pub fn maximally_mixed(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        let n: usize = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            matrix: CMatrix::identity(n, n) / C64::new(n as f64, 0.0),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            dims,
            matrix: kron(&self.matrix, &other.matrix),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        same_dims(&self.dims, &other.dims, "trace distance")?;
        let diff = &self.matrix - &other.matrix;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|e| e.abs()).sum::<f64>())
    }
}

/// Anything an expectation value can be taken in.
pub trait QuantumState {
    fn mode_dims(&self) -> &[usize];
    fn expect(&self, op: &Operator) -> Result<C64>;
    /// Occupation probability of each product Fock basis state.
    fn populations(&self) -> Vec<f64>;
}

impl QuantumState for StateVector {
    fn mode_dims(&self) -> &[usize] {
        &self.dims
    }

    fn expect(&self, op: &Operator) -> Result<C64> {
        let v = op.apply(self)?;
        Ok(self.amps.dotc(&v))
    }

    fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }
}

impl QuantumState for DensityMatrix {
    fn mode_dims(&self) -> &[usize] {
        &self.dims
    }

    fn expect(&self, op: &Operator) -> Result<C64> {
        same_dims(&self.dims, &op.dims, "expectation")?;
        // tr(op rho) without forming the product
        let n = self.dim();
        let mut s = C64::new(0.0, 0.0);
        for c in 0..n {
            for r in 0..n {
                s += op.matrix[(r, c)] * self.matrix[(c, r)];
            }
        }
        Ok(s)
    }

    fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }
}

/// `<psi|op|psi>` or `tr(op rho)`.
pub fn expectation<S: QuantumState>(state: &S, op: &Operator) -> Result<C64> {
    state.expect(op)
}

fn single_mode(d: usize, f: impl Fn(usize, usize) -> f64) -> Result<Operator> {
    FockCutoff::new(d)?;
    Operator::new(vec![d], CMatrix::from_fn(d, d, |r, c| C64::new(f(r, c), 0.0)))
}

/// Truncated annihilation operator: `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(d: usize) -> Result<Operator> {
    single_mode(d, |r, c| if c == r + 1 { (c as f64).sqrt() } else { 0.0 })
}

pub fn creation(d: usize) -> Result<Operator> {
    Ok(annihilation(d)?.dagger())
}

pub fn number(d: usize) -> Result<Operator> {
    single_mode(d, |r, c| if r == c { r as f64 } else { 0.0 })
}

/// Quadrature `X = (a + a^dagger)/sqrt(2)` on one mode.
pub fn quadrature_x(d: usize) -> Result<Operator> {
    let a = annihilation(d)?;
    Ok(a.add(&a.dagger())?
        .scale(C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)))
}

/// `exp(i * theta * a^dagger a)` on one mode.
pub fn phase_rotation(d: usize, theta: f64) -> Result<Operator> {
    FockCutoff::new(d)?;
    let m = CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::from_polar(1.0, theta * r as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Operator::new(vec![d], m)
}

/// Places a single-mode operator on `mode` of the composite space.
pub fn embed(op: &Operator, mode: usize, dims: &[usize]) -> Result<Operator> {
    check_dims(dims)?;
    if mode >= dims.len() {
        return Err(Error::Shape(format!(
            "mode index {mode} out of range for {} modes",
            dims.len()
        )));
    }
    if op.dims.len() != 1 || op.dims[0] != dims[mode] {
        return Err(Error::Shape(format!(
            "single-mode operator of dims {:?} cannot act on mode {mode} of {dims:?}",
            op.dims
        )));
    }
    let m = sparse::embed_sparse(&op.matrix, mode, dims).to_dense();
    Operator::new(dims.to_vec(), m)
}

fn poisson_terms(mean: f64) -> impl Iterator<Item = f64> {
    // p_n = e^{-mean} mean^n / n!, generated in log space
    let lm = if mean > 0.0 { mean.ln() } else { f64::NEG_INFINITY };
    let mut log_fact = 0.0;
    (0usize..).map(move |n| {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        if mean == 0.0 {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-mean + n as f64 * lm - log_fact).exp()
        }
    })
}

/// Mass of a coherent state of amplitude `amp` beyond level `d - 1`.
pub fn coherent_tail_mass(amp: f64, d: usize) -> f64 {
    let mean = amp * amp;
    let mut tail = 0.0;
    for (n, p) in poisson_terms(mean).enumerate().skip(d) {
        tail += p;
        if n as f64 > mean && (p == 0.0 || p < 1e-18 * tail) {
            break;
        }
    }
    tail
}

/// Smallest cutoff whose coherent tail mass is below [`TAIL_MASS_LIMIT`].
pub fn min_cutoff_for(amp: f64) -> usize {
    let mut d = 2;
    while coherent_tail_mass(amp, d) >= TAIL_MASS_LIMIT {
        d += 1;
    }
    d
}

pub fn check_cutoff(amp: f64, d: usize) -> Result<()> {
    let tail = coherent_tail_mass(amp, d);
    if tail >= TAIL_MASS_LIMIT {
        return Err(Error::CutoffTooSmall {
            amplitude: amp,
            cutoff: d,
            tail,
            required: min_cutoff_for(amp),
        });
    }
    Ok(())
}

/// Truncated, renormalised coherent state `|amp>`.
pub fn coherent_state(amp: C64, d: usize) -> Result<StateVector> {
    FockCutoff::new(d)?;
    check_cutoff(amp.norm(), d)?;
    let mut c = CVector::zeros(d);
    c[0] = C64::new((-0.5 * amp.norm_sqr()).exp(), 0.0);
    for n in 1..d {
        c[n] = c[n - 1] * amp / (n as f64).sqrt();
    }
    StateVector::normalized(vec![d], c)
}

/// Product of per-mode coherent states.
pub fn coherent_product(amps: &[C64], dims: &[usize]) -> Result<StateVector> {
    if amps.len() != dims.len() {
        return Err(Error::Shape(format!(
            "{} amplitudes for {} modes",
            amps.len(),
            dims.len()
        )));
    }
    let mut it = amps.iter().zip(dims);
    let (a0, d0) = it.next().ok_or_else(|| Error::Shape("no modes".into()))?;
    let mut psi = coherent_state(*a0, *d0)?;
    for (a, d) in it {
        psi = psi.tensor(&coherent_state(*a, *d)?);
    }
    Ok(psi)
}

pub(crate) fn check_mode_set(set: &[usize], n_modes: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n_modes];
    for &m in set {
        if m >= n_modes {
            return Err(Error::InvalidArgument(format!(
                "mode {m} out of range for {n_modes} modes"
            )));
        }
        if mask[m] {
            return Err(Error::InvalidArgument(format!("mode {m} listed twice")));
        }
        mask[m] = true;
    }
    Ok(mask)
}

/// Reduced state on the `keep` modes (in ascending mode order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("partial trace needs a nonempty keep set".into()));
    }
    let dims = &rho.dims;
    let mask = check_mode_set(keep, dims.len())?;
    let kept: Vec<usize> = (0..dims.len()).filter(|&m| mask[m]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|&m| !mask[m]).collect();
    let kdims: Vec<usize> = kept.iter().map(|&m| dims[m]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&m| dims[m]).collect();
    let kn: usize = kdims.iter().product();
    let tn: usize = tdims.iter().product();
    let st = strides(dims);
    let offset = |kidx: usize, tidx: usize| -> usize {
        let kd = basis_digits(kidx, &kdims);
        let td = basis_digits(tidx, &tdims);
        kept.iter().zip(&kd).map(|(&m, &n)| n * st[m]).sum::<usize>()
            + traced.iter().zip(&td).map(|(&m, &n)| n * st[m]).sum::<usize>()
    };
    // precompute full indices
    let table: Vec<Vec<usize>> = (0..kn).map(|k| (0..tn).map(|t| offset(k, t)).collect()).collect();
    let mut out = CMatrix::zeros(kn, kn);
    for c in 0..kn {
        for r in 0..kn {
            let mut s = C64::new(0.0, 0.0);
            for t in 0..tn {
                s += rho.matrix[(table[r][t], table[c][t])];
            }
            out[(r, c)] = s;
        }
    }
    Ok(DensityMatrix {
        dims: kdims,
        matrix: out,
    })
}

/// Transposes the listed modes; the result is Hermitian with unit trace but
/// not necessarily positive.
pub fn partial_transpose(rho: &DensityMatrix, transposed: &[usize]) -> Result<Operator> {
    let dims = &rho.dims;
    if transposed.is_empty() || transposed.len() >= dims.len() {
        return Err(Error::InvalidArgument(format!(
            "transposed modes {transposed:?} must be a nonempty proper subset of {} modes",
            dims.len()
        )));
    }
    let mask = check_mode_set(transposed, dims.len())?;
    let st = strides(dims);
    let n = rho.dim();
    let digits: Vec<Vec<usize>> = (0..n).map(|i| basis_digits(i, dims)).collect();
    let mut out = CMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            let (mut r2, mut c2) = (r, c);
            for m in 0..dims.len() {
                if mask[m] {
                    let (nr, nc) = (digits[r][m], digits[c][m]);
                    r2 = r2 - nr * st[m] + nc * st[m];
                    c2 = c2 - nc * st[m] + nr * st[m];
                }
            }
            out[(r2, c2)] = rho.matrix[(r, c)];
        }
    }
    Operator::new(dims.clone(), out)
}
