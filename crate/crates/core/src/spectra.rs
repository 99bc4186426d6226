//! Exact diagonalisation and comparison of low-lying eigenspaces with
//! spans of coherent spin-configuration states.
//!
//! Hamiltonians are split into the connected components of their sparsity
//! graph before diagonalising. For the Kerr network these are the two
//! total-parity sectors, which halves the dense eigensolve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::sparse::CsrMatrix;
use crate::hilbert::{coherent_product, CMatrix, CVector, Operator, StateVector, HERMITIAN_TOL};
use crate::model::{perturbed_energy, AdjacencyMatrix, ModelParams, SpinConfig};

/// Default degeneracy grouping tolerance, relative to the spectral range.
pub const DEFAULT_GROUPING_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn spectral_range(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }
}

/// A (near-)degenerate group of eigenvectors.
#[derive(Clone, Debug)]
pub struct DegenerateSubspace {
    /// Lowest eigenvalue of the group.
    pub energy: f64,
    pub eigenvalues: Vec<f64>,
    pub basis: Vec<StateVector>,
}

impl DegenerateSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Overlaps `c[n][k] = <α₀σ_k | v_n>` of each basis vector with the
    /// coherent configuration states.
    pub fn coefficients(&self, configs: &[SpinConfig], p: &ModelParams) -> Result<CMatrix> {
        let states = configuration_states(configs, p)?;
        Ok(CMatrix::from_fn(self.dim(), states.len(), |n, k| {
            states[k].amplitudes().dotc(self.basis[n].amplitudes())
        }))
    }
}

/// Total photon-number parity `(-1)^{sum n}` as a diagonal operator.
pub fn parity_operator(dims: &[usize]) -> Result<Operator> {
    let total: usize = dims.iter().product();
    let diag = CVector::from_fn(total, |i, _| {
        let n: usize = crate::hilbert::basis_digits(i, dims).iter().sum();
        C64::new(if n.is_multiple_of(2) { 1.0 } else { -1.0 }, 0.0)
    });
    Operator::new(dims.to_vec(), CMatrix::from_diagonal(&diag))
}

/// Connected components of the sparsity graph, each sorted ascending.
fn components(h: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = h.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (r, c, _) in h.triplets() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

fn block_eigen(h: &CsrMatrix, idx: &[usize]) -> (Vec<f64>, Vec<CVector>) {
    let m = idx.len();
    let mut local = vec![usize::MAX; h.dim()];
    for (k, &i) in idx.iter().enumerate() {
        local[i] = k;
    }
    let mut block = CMatrix::zeros(m, m);
    let mut real = true;
    for &i in idx {
        for (c, v) in h.row(i) {
            block[(local[i], local[c])] = v;
            real &= v.im == 0.0;
        }
    }
    let embed = |vecs: Vec<CVector>| -> Vec<CVector> {
        vecs.into_iter()
            .map(|v| {
                let mut full = CVector::zeros(h.dim());
                for (k, &i) in idx.iter().enumerate() {
                    full[i] = v[k];
                }
                full
            })
            .collect()
    };
    if real {
        let re: DMatrix<f64> = block.map(|z| z.re);
        let eig = re.symmetric_eigen();
        let vecs = (0..m)
            .map(|k| eig.eigenvectors.column(k).map(|x| C64::new(x, 0.0)))
            .collect();
        (eig.eigenvalues.iter().copied().collect(), embed(vecs))
    } else {
        let eig = block.symmetric_eigen();
        let vecs = (0..m).map(|k| eig.eigenvectors.column(k).into_owned()).collect();
        (eig.eigenvalues.iter().copied().collect(), embed(vecs))
    }
}

fn check_k(k: usize, dim: usize) -> Result<()> {
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= {dim}, got {k}")));
    }
    Ok(())
}

/// The `k` lowest eigenpairs of a Hermitian sparse matrix, ascending.
pub fn spectrum_sparse(h: &CsrMatrix, dims: &[usize], k: usize) -> Result<EigenDecomposition> {
    check_k(k, h.dim())?;
    let dev = h.add_scaled(&h.adjoint(), C64::new(-1.0, 0.0));
    let max_dev = dev.values().iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let scale = h.values().iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1.0);
    if max_dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(max_dev));
    }
    let blocks = components(h);
    let solved: Vec<(Vec<f64>, Vec<CVector>)> = blocks.par_iter().map(|b| block_eigen(h, b)).collect();
    let mut pairs: Vec<(f64, CVector)> = solved
        .into_iter()
        .flat_map(|(vals, vecs)| vals.into_iter().zip(vecs))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    let (eigenvalues, vecs): (Vec<f64>, Vec<CVector>) = pairs.into_iter().unzip();
    let eigenvectors = vecs
        .into_iter()
        .map(|v| StateVector::normalized(dims.to_vec(), v))
        .collect::<Result<_>>()?;
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// The `k` lowest eigenpairs of a Hermitian operator, ascending.
pub fn spectrum(h: &Operator, k: usize) -> Result<EigenDecomposition> {
    check_k(k, h.dim())?;
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL * h.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    spectrum_sparse(&CsrMatrix::from_dense(h.matrix()), h.dims(), k)
}

/// Eigenvectors with `λ - λ_min <= tol * max(1, spectral range)`.
pub fn ground_subspace(decomp: &EigenDecomposition, tol: f64) -> Result<DegenerateSubspace> {
    let lo = *decomp
        .eigenvalues
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty decomposition".into()))?;
    let cut = tol * decomp.spectral_range().max(1.0);
    let members: Vec<usize> = (0..decomp.len())
        .filter(|&i| decomp.eigenvalues[i] - lo <= cut)
        .collect();
    Ok(DegenerateSubspace {
        energy: lo,
        eigenvalues: members.iter().map(|&i| decomp.eigenvalues[i]).collect(),
        basis: members.iter().map(|&i| decomp.eigenvectors[i].clone()).collect(),
    })
}

/// Coherent amplitude `sqrt(eps/chi)` (principal branch) for each mode.
fn configuration_amplitude(p: &ModelParams) -> C64 {
    (p.epsilon / p.chi).sqrt()
}

/// Coherent product states `|α₀σ>` for each configuration.
pub fn configuration_states(configs: &[SpinConfig], p: &ModelParams) -> Result<Vec<StateVector>> {
    let a0 = configuration_amplitude(p);
    let dims = p.dims();
    configs
        .iter()
        .map(|cfg| {
            if cfg.len() != dims.len() {
                return Err(Error::Shape(format!("{} spins for {} modes", cfg.len(), dims.len())));
            }
            let amps: Vec<C64> = cfg.as_f64().iter().map(|&s| a0 * s).collect();
            coherent_product(&amps, &dims)
        })
        .collect()
}

fn orthonormal_columns(vectors: &[&CVector]) -> CMatrix {
    let n = vectors[0].len();
    let m = CMatrix::from_columns(&vectors.iter().map(|v| (*v).clone()).collect::<Vec<_>>());
    debug_assert_eq!(m.nrows(), n);
    m.qr().q()
}

/// Overlap of two spans: the product of squared cosines of their principal
/// angles. With unequal dimensions only the `min` angles enter.
pub fn span_fidelity(a: &[StateVector], b: &[StateVector]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty span".into()));
    }
    if a[0].dims() != b[0].dims() {
        return Err(Error::Shape("spans live in different spaces".into()));
    }
    let qa = orthonormal_columns(&a.iter().map(|s| s.amplitudes()).collect::<Vec<_>>());
    let qb = orthonormal_columns(&b.iter().map(|s| s.amplitudes()).collect::<Vec<_>>());
    let overlap = qa.adjoint() * qb;
    let sv = overlap.svd(false, false).singular_values;
    let f: f64 = sv.iter().map(|s| s.min(1.0).powi(2)).product();
    Ok(f.clamp(0.0, 1.0))
}

/// Principal-angle fidelity of a subspace against the span of the coherent
/// configuration states `|α₀σ>`.
pub fn subspace_fidelity(sub: &DegenerateSubspace, configs: &[SpinConfig], p: &ModelParams) -> Result<f64> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("no configurations given".into()));
    }
    span_fidelity(&sub.basis, &configuration_states(configs, p)?)
}

/// Spin configurations grouped by first-order energy, lowest group first.
pub fn configuration_groups(p: &ModelParams, s: &AdjacencyMatrix, tol: f64) -> Result<Vec<(f64, Vec<SpinConfig>)>> {
    let mut scored: Vec<(f64, SpinConfig)> = SpinConfig::all(p.n_modes())
        .into_iter()
        .map(|c| Ok((perturbed_energy(&c, p, s)?, c)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, Vec<SpinConfig>)> = Vec::new();
    for (e, c) in scored {
        match groups.last_mut() {
            Some((e0, members)) if (e - *e0).abs() <= tol => members.push(c),
            _ => groups.push((e, vec![c])),
        }
    }
    Ok(groups)
}

/// Residual `max_k ||H v_k - λ_k v_k||`.
pub fn max_residual(h: &CsrMatrix, decomp: &EigenDecomposition) -> f64 {
    decomp
        .eigenvalues
        .iter()
        .zip(&decomp.eigenvectors)
        .map(|(&l, v)| {
            let hv = DVector::from_vec(h.mul_vec(v.amplitudes().as_slice()));
            (hv - v.amplitudes() * C64::new(l, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{self, annihilation};
    use crate::model::{network_hamiltonian_sparse, ModelParams};

    fn kerr_only(d: usize, chi: f64) -> Operator {
        let a = annihilation(d).unwrap();
        let ad = a.dagger();
        ad.mul(&ad)
            .unwrap()
            .mul(&a)
            .unwrap()
            .mul(&a)
            .unwrap()
            .scale(C64::new(chi, 0.0))
    }

    #[test]
    fn kerr_levels() {
        let dec = spectrum(&kerr_only(6, 0.5), 6).unwrap();
        // n(n-1) chi at chi = 0.5
        let want = [0.0, 0.0, 1.0, 3.0, 6.0, 10.0];
        for (e, w) in dec.eigenvalues.iter().zip(want) {
            assert!((e - w).abs() < 1e-12);
        }
        let dec = spectrum(&kerr_only(6, 1.3), 6).unwrap();
        for (n, e) in dec.eigenvalues.iter().enumerate() {
            let n = n as f64;
            assert!((e - 1.3 * n * (n - 1.0)).abs() < 1e-12);
        }
        let g = ground_subspace(&dec, 1e-9).unwrap();
        assert_eq!(g.dim(), 2);
    }

    #[test]
    fn rejects_non_hermitian_and_bad_k() {
        let a = annihilation(4).unwrap();
        assert!(matches!(spectrum(&a, 2), Err(Error::NotHermitian(_))));
        let n = hilbert::number(4).unwrap();
        assert!(spectrum(&n, 0).is_err());
        assert!(spectrum(&n, 5).is_err());
    }

    #[test]
    fn complex_hermitian_block() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, -1.0);
        let dec = spectrum(&Operator::new(vec![2], m).unwrap(), 2).unwrap();
        assert!((dec.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((dec.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nondegenerate_ground_space_is_one_dimensional() {
        let dec = spectrum(&hilbert::number(5).unwrap(), 5).unwrap();
        assert_eq!(ground_subspace(&dec, 1e-3).unwrap().dim(), 1);
    }

    #[test]
    fn parity_commutes_and_blocks_split() {
        let p = ModelParams::closed(2, 12, 0.5, 0.1, 0.5, 0.05).unwrap();
        let s = AdjacencyMatrix::pair();
        let h = network_hamiltonian_sparse(&p, &s).unwrap();
        let blocks = components(&h);
        assert_eq!(blocks.len(), 2);
        let par = parity_operator(&p.dims()).unwrap();
        let hd = Operator::new(p.dims(), h.to_dense()).unwrap();
        let comm = hd.commutator(&par).unwrap();
        assert!(comm.frobenius_norm() < 1e-10 * hd.frobenius_norm());
        let dec = spectrum_sparse(&h, &p.dims(), 20).unwrap();
        assert!(max_residual(&h, &dec) < 1e-8 * hd.frobenius_norm());
        for v in &dec.eigenvectors {
            let pv = hilbert::expectation(v, &par).unwrap().re;
            assert!((pv.abs() - 1.0).abs() < 1e-10);
        }
        for i in 0..dec.len() {
            for j in 0..dec.len() {
                let ov = dec.eigenvectors[i].inner(&dec.eigenvectors[j]).unwrap().norm();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ov - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dense_and_sparse_paths_agree() {
        let p = ModelParams::closed(2, 11, 0.5, 0.3, 0.4, 0.2).unwrap();
        let h = network_hamiltonian_sparse(&p, &AdjacencyMatrix::pair()).unwrap();
        let dense = Operator::new(p.dims(), h.to_dense()).unwrap();
        let full = hilbert::hermitian_eigenvalues(dense.matrix());
        let dec = spectrum(&dense, 121).unwrap();
        for (a, b) in dec.eigenvalues.iter().zip(full) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn own_basis_has_unit_fidelity() {
        let p = ModelParams::closed(2, 15, 0.5, 0.0, 1.0, 0.05).unwrap();
        let h = network_hamiltonian_sparse(&p, &AdjacencyMatrix::pair()).unwrap();
        let dec = spectrum_sparse(&h, &p.dims(), 4).unwrap();
        let sub = ground_subspace(&dec, 1e-3).unwrap();
        assert!((span_fidelity(&sub.basis, &sub.basis).unwrap() - 1.0).abs() < 1e-10);
        assert!(subspace_fidelity(&sub, &[], &p).is_err());
    }

    #[test]
    fn groups_follow_first_order_energy() {
        let p = ModelParams::closed(2, 40, 0.5, 0.0, 2.0, 0.05).unwrap();
        let g = configuration_groups(&p, &AdjacencyMatrix::pair(), 1e-12).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0].0 + 0.4).abs() < 1e-12);
        let anti: Vec<_> = g[0].1.iter().map(|c| c.spins().to_vec()).collect();
        assert_eq!(anti, vec![vec![1, -1], vec![-1, 1]]);
    }
}
