//! Logarithmic negativity across a mode bipartition and joint photon-number
//! statistics.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{
    basis_digits, basis_index, check_mode_set, hermitian_eigenvalues, partial_transpose, CMatrix, DensityMatrix,
    QuantumState, StateVector,
};

/// Partial-transpose eigenvalues above this (negative) value count as zero.
pub const NEGATIVITY_THRESHOLD: f64 = -1e-10;

/// Split of the modes into two nonempty complementary sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    side_a: Vec<usize>,
    side_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(side_a: &[usize], n_modes: usize) -> Result<Self> {
        let mask = check_mode_set(side_a, n_modes)?;
        let mut a: Vec<usize> = side_a.to_vec();
        a.sort_unstable();
        let b: Vec<usize> = (0..n_modes).filter(|&m| !mask[m]).collect();
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "bipartition {side_a:?} of {n_modes} modes leaves a side empty"
            )));
        }
        Ok(Self { side_a: a, side_b: b })
    }

    /// Mode 0 against the rest.
    pub fn first_mode(n_modes: usize) -> Result<Self> {
        Self::new(&[0], n_modes)
    }

    pub fn side_a(&self) -> &[usize] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[usize] {
        &self.side_b
    }

    pub fn swapped(&self) -> Self {
        Self {
            side_a: self.side_b.clone(),
            side_b: self.side_a.clone(),
        }
    }

    fn n_modes(&self) -> usize {
        self.side_a.len() + self.side_b.len()
    }
}

fn check_split(dims: &[usize], split: &Bipartition) -> Result<()> {
    if dims.len() != split.n_modes() {
        return Err(Error::Shape(format!(
            "bipartition covers {} modes, state has {}",
            split.n_modes(),
            dims.len()
        )));
    }
    Ok(())
}

/// `log2 ||ρ^{T_A}||_1 = log2(2 N + 1)` with `N` the summed magnitude of
/// the negative partial-transpose eigenvalues.
pub fn log_negativity(rho: &DensityMatrix, split: &Bipartition) -> Result<f64> {
    check_split(rho.dims(), split)?;
    let pt = partial_transpose(rho, split.side_a())?;
    let neg: f64 = hermitian_eigenvalues(pt.matrix())
        .into_iter()
        .filter(|&e| e < NEGATIVITY_THRESHOLD)
        .map(f64::abs)
        .sum();
    let norm = 2.0 * neg + 1.0;
    Ok(if norm < 1.0 + 1e-12 { 0.0 } else { norm.log2() })
}

/// Amplitudes arranged as a `dim(A) x dim(B)` matrix.
fn bipartite_matrix(psi: &StateVector, split: &Bipartition) -> Result<CMatrix> {
    let dims = psi.dims();
    check_split(dims, split)?;
    let da: Vec<usize> = split.side_a().iter().map(|&m| dims[m]).collect();
    let db: Vec<usize> = split.side_b().iter().map(|&m| dims[m]).collect();
    let (na, nb) = (da.iter().product(), db.iter().product());
    let mut m = CMatrix::zeros(na, nb);
    for (i, &amp) in psi.amplitudes().iter().enumerate() {
        let digits = basis_digits(i, dims);
        let ia: Vec<usize> = split.side_a().iter().map(|&k| digits[k]).collect();
        let ib: Vec<usize> = split.side_b().iter().map(|&k| digits[k]).collect();
        m[(basis_index(&ia, &da), basis_index(&ib, &db))] = amp;
    }
    Ok(m)
}

/// Schmidt weights `λ_i` (squared singular values), descending.
pub fn schmidt_weights(psi: &StateVector, split: &Bipartition) -> Result<Vec<f64>> {
    let sv = bipartite_matrix(psi, split)?.svd(false, false).singular_values;
    let mut w: Vec<f64> = sv.iter().map(|s| s * s).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    Ok(w)
}

/// Pure-state logarithmic negativity `2 log2 sum_i sqrt(λ_i)`.
pub fn log_negativity_pure(psi: &StateVector, split: &Bipartition) -> Result<f64> {
    let s: f64 = schmidt_weights(psi, split)?.iter().map(|w| w.max(0.0).sqrt()).sum();
    Ok((2.0 * s.log2()).max(0.0))
}

/// Von Neumann entropy of entanglement in bits.
pub fn entanglement_entropy(psi: &StateVector, split: &Bipartition) -> Result<f64> {
    Ok(schmidt_weights(psi, split)?
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.log2())
        .sum())
}

/// `P(n1, n2)` for a two-mode state.
pub fn joint_photon_distribution<S: QuantumState>(state: &S) -> Result<DMatrix<f64>> {
    let dims = state.mode_dims();
    if dims.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "joint photon distribution needs 2 modes, state has {}",
            dims.len()
        )));
    }
    let pops = state.populations();
    // mode 0 varies slowest, matching row-major (n1, n2)
    Ok(DMatrix::from_row_slice(dims[0], dims[1], &pops))
}

/// Interior indices `n` of the diagonal `P(n, n)` lying below `ratio` times
/// both neighbours. Neighbours under `floor * max P` are ignored so that
/// truncation noise in the tails cannot register.
pub fn diagonal_interference_minima(p: &DMatrix<f64>, ratio: f64, floor: f64) -> Vec<usize> {
    let n = p.nrows().min(p.ncols());
    let peak = p.iter().cloned().fold(0.0, f64::max);
    (1..n.saturating_sub(1))
        .filter(|&k| {
            let (l, c, r) = (p[(k - 1, k - 1)], p[(k, k)], p[(k + 1, k + 1)]);
            l.min(r) > floor * peak && c < ratio * l && c < ratio * r
        })
        .collect()
}

/// Default settings for [`diagonal_interference_minima`].
pub const FRINGE_RATIO: f64 = 0.5;
pub const FRINGE_FLOOR: f64 = 1e-6;

/// Applies `exp(i θ_m a_m†a_m)` to each mode (a local unitary).
pub fn rotate_phases(psi: &StateVector, thetas: &[f64]) -> Result<StateVector> {
    let dims = psi.dims();
    if thetas.len() != dims.len() {
        return Err(Error::Shape(format!(
            "{} phases for {} modes",
            thetas.len(),
            dims.len()
        )));
    }
    let amps = psi.amplitudes().map_with_location(|i, _, z| {
        let phase: f64 = basis_digits(i, dims)
            .iter()
            .zip(thetas)
            .map(|(&n, &t)| n as f64 * t)
            .sum();
        z * C64::from_polar(1.0, phase)
    });
    StateVector::new(dims.to_vec(), amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_product, coherent_state, CVector};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn bell() -> StateVector {
        let mut v = CVector::zeros(4);
        v[0] = c(1.0);
        v[3] = c(1.0);
        StateVector::normalized(vec![2, 2], v).unwrap()
    }

    fn cat(alpha: f64, d: usize) -> StateVector {
        let dims = [d, d];
        let p = coherent_product(&[c(alpha), c(-alpha)], &dims).unwrap();
        let m = coherent_product(&[c(-alpha), c(alpha)], &dims).unwrap();
        StateVector::normalized(dims.to_vec(), p.amplitudes() + m.amplitudes()).unwrap()
    }

    #[test]
    fn bipartition_validation() {
        assert!(Bipartition::new(&[], 2).is_err());
        assert!(Bipartition::new(&[0, 1], 2).is_err());
        assert!(Bipartition::new(&[2], 2).is_err());
        let b = Bipartition::new(&[2, 0], 4).unwrap();
        assert_eq!(b.side_a(), &[0, 2]);
        assert_eq!(b.side_b(), &[1, 3]);
    }

    #[test]
    fn product_state_has_zero_ln() {
        let a = coherent_state(C64::new(0.7, 0.2), 12).unwrap();
        let b = coherent_state(c(-0.4), 12).unwrap();
        let rho = a.tensor(&b).to_density();
        let split = Bipartition::first_mode(2).unwrap();
        assert!(log_negativity(&rho, &split).unwrap().abs() < 1e-9);
        let mixed = DensityMatrix::maximally_mixed(&[3, 3]).unwrap();
        assert!(log_negativity(&mixed, &split).unwrap().abs() < 1e-9);
    }

    #[test]
    fn bell_state_has_unit_ln_and_entropy() {
        let split = Bipartition::first_mode(2).unwrap();
        let psi = bell();
        assert!((log_negativity(&psi.to_density(), &split).unwrap() - 1.0).abs() < 1e-9);
        assert!((log_negativity_pure(&psi, &split).unwrap() - 1.0).abs() < 1e-12);
        assert!((entanglement_entropy(&psi, &split).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cat_ln_regression() {
        let psi = cat(2.0, 25);
        let split = Bipartition::first_mode(2).unwrap();
        let mixed = log_negativity(&psi.to_density(), &split).unwrap();
        let pure = log_negativity_pure(&psi, &split).unwrap();
        assert!((mixed - pure).abs() < 1e-9);
        // oracle: two Schmidt weights from the Gram matrix of the
        // nonorthogonal branches, w± = (1 ± o)² / (2 (1 + o²)), o = <α|-α>
        let o = coherent_state(c(2.0), 25)
            .unwrap()
            .inner(&coherent_state(c(-2.0), 25).unwrap())
            .unwrap()
            .re;
        let norm = 2.0 * (1.0 + o * o);
        let (wp, wm) = ((1.0 + o).powi(2) / norm, (1.0 - o).powi(2) / norm);
        let want = 2.0 * (wp.sqrt() + wm.sqrt()).log2();
        assert!((pure - want).abs() < 1e-10, "{pure} vs {want}");
        assert!((pure - 0.999_999_83).abs() < 1e-7, "{pure}");
    }

    #[test]
    fn ln_is_symmetric_in_the_split() {
        let rho = cat(1.0, 12).to_density();
        let split = Bipartition::first_mode(2).unwrap();
        let a = log_negativity(&rho, &split).unwrap();
        let b = log_negativity(&rho, &split.swapped()).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn joint_distribution_examples() {
        let vac = StateVector::vacuum(&[4, 5]).unwrap();
        let p = joint_photon_distribution(&vac).unwrap();
        assert_eq!(p[(0, 0)], 1.0);
        assert_eq!(p.sum(), 1.0);

        let (a, b) = (C64::new(0.8, 0.3), c(-1.1));
        let psi = coherent_product(&[a, b], &[16, 18]).unwrap();
        let p = joint_photon_distribution(&psi.to_density()).unwrap();
        let poisson = |m: f64, n: usize| -> f64 {
            (-m + n as f64 * m.ln() - (1..=n).map(|k| (k as f64).ln()).sum::<f64>()).exp()
        };
        // truncated coherent states are renormalised
        let za: f64 = (0..16).map(|n| poisson(a.norm_sqr(), n)).sum();
        let zb: f64 = (0..18).map(|n| poisson(b.norm_sqr(), n)).sum();
        for n1 in 0..16 {
            for n2 in 0..18 {
                let want = poisson(a.norm_sqr(), n1) * poisson(b.norm_sqr(), n2) / (za * zb);
                assert!((p[(n1, n2)] - want).abs() < 1e-8);
            }
        }
        assert!((p.sum() - 1.0).abs() < 1e-9);
        assert!(joint_photon_distribution(&StateVector::vacuum(&[3]).unwrap()).is_err());
    }

    #[test]
    fn fringe_detector() {
        let mut p = DMatrix::zeros(5, 5);
        for (k, v) in [0.1, 0.3, 0.05, 0.3, 0.1].iter().enumerate() {
            p[(k, k)] = *v;
        }
        assert_eq!(diagonal_interference_minima(&p, 0.5, 1e-6), vec![2]);
        p[(2, 2)] = 0.2;
        assert!(diagonal_interference_minima(&p, 0.5, 1e-6).is_empty());
    }

    #[test]
    fn phase_rotation_keeps_ln() {
        let psi = cat(1.2, 13);
        let split = Bipartition::first_mode(2).unwrap();
        let rotated = rotate_phases(&psi, &[0.4, -1.3]).unwrap();
        let a = log_negativity(&psi.to_density(), &split).unwrap();
        let b = log_negativity(&rotated.to_density(), &split).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
