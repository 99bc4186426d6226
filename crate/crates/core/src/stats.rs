//! Ensemble statistics of two-cavity records.
//!
//! All observables act on quadratures `x_i = sqrt(2) Re α_i`: the conditional
//! means `<X_i>_c` for quantum trajectories and `sqrt(2) Re α_i` for the
//! mean-field runs. A ferro/antiferro pair settled at `±(ᾱ, -ᾱ)` with real
//! `ᾱ` therefore gives a mean squared difference of `8ᾱ²`.

use rayon::prelude::*;

use crate::classical::ClassicalTrajectory;
use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::model::SpinConfig;

/// Bose–Einstein occupation `1/(e^{ω/T} - 1)` in units with `ħ = k_B = 1`.
pub fn thermal_occupation(temperature: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidArgument(format!("omega must be > 0, got {omega}")));
    }
    if !(temperature >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// Which series of a record feeds the statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Signal {
    /// Conditional means (quantum) or `sqrt(2) Re α` (classical).
    #[default]
    Denoised,
    /// Homodyne currents as recorded.
    RawCurrent,
}

/// Two-cavity ensemble on a shared time grid, `x[trajectory][mode][time]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    times: Vec<f64>,
    x: Vec<[Vec<f64>; 2]>,
}

impl Ensemble {
    pub fn new(times: Vec<f64>, x: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let mut out = Vec::with_capacity(x.len());
        for (m, modes) in x.into_iter().enumerate() {
            let pair: [Vec<f64>; 2] = modes
                .try_into()
                .map_err(|v: Vec<Vec<f64>>| Error::Shape(format!("trajectory {m} has {} modes, need 2", v.len())))?;
            if pair.iter().any(|s| s.len() != times.len()) {
                return Err(Error::Shape(format!(
                    "trajectory {m} is not aligned with the time grid"
                )));
            }
            out.push(pair);
        }
        Ok(Self { times, x: out })
    }

    pub fn from_quantum(records: &[TrajectoryRecord], signal: Signal) -> Result<Self> {
        let times = records.first().map(|r| r.times.clone()).unwrap_or_default();
        let x = records
            .iter()
            .map(|r| match signal {
                Signal::Denoised => r.cond_x.clone(),
                Signal::RawCurrent => r.currents.clone(),
            })
            .collect();
        Self::check_times(records.iter().map(|r| &r.times), &times)?;
        Self::new(times, x)
    }

    pub fn from_classical(records: &[ClassicalTrajectory], signal: Signal) -> Result<Self> {
        let times = records.first().map(|r| r.times.clone()).unwrap_or_default();
        let sqrt2 = std::f64::consts::SQRT_2;
        let x = records
            .iter()
            .map(|r| match signal {
                Signal::Denoised => r
                    .alphas
                    .iter()
                    .map(|s| s.iter().map(|a| sqrt2 * a.re).collect())
                    .collect(),
                Signal::RawCurrent => r.currents.clone(),
            })
            .collect();
        Self::check_times(records.iter().map(|r| &r.times), &times)?;
        Self::new(times, x)
    }

    fn check_times<'a>(mut all: impl Iterator<Item = &'a Vec<f64>>, times: &[f64]) -> Result<()> {
        if all.any(|t| t.as_slice() != times) {
            return Err(Error::Shape("trajectories use different time grids".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn column(&self, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if k >= self.times.len() {
            return Err(Error::InvalidArgument(format!("time index {k} out of range")));
        }
        Ok(self.x.iter().map(|p| (p[0][k], p[1][k])).unzip())
    }
}

/// A sample estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Normalised cross-correlation at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub se: f64,
    /// One channel had zero variance, so the value is defined as 0.
    pub degenerate: bool,
}

fn need_two(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trajectories, got {m}")));
    }
    Ok(())
}

/// Mean over trajectories of `(x_1 - x_2)²` at time index `k`.
pub fn mean_diff_squared(e: &Ensemble, k: usize) -> Result<Estimate> {
    need_two(e.len())?;
    let (x1, x2) = e.column(k)?;
    let d: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| (a - b).powi(2)).collect();
    let m = d.len() as f64;
    let mean = d.iter().sum::<f64>() / m;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(Estimate {
        value: mean,
        se: (var / m).sqrt(),
    })
}

/// Pearson correlation of the two channels across the ensemble at time
/// index `k`, with standard error `sqrt((1 - R²)/(M - 2))`.
pub fn cross_correlation(e: &Ensemble, k: usize) -> Result<Correlation> {
    need_two(e.len())?;
    let (x1, x2) = e.column(k)?;
    let m = x1.len() as f64;
    let m1 = x1.iter().sum::<f64>() / m;
    let m2 = x2.iter().sum::<f64>() / m;
    let (mut c, mut v1, mut v2) = (0.0, 0.0, 0.0);
    for (a, b) in x1.iter().zip(&x2) {
        c += (a - m1) * (b - m2);
        v1 += (a - m1).powi(2);
        v2 += (b - m2).powi(2);
    }
    let se_of = |r: f64| {
        if m > 2.0 {
            ((1.0 - r * r).max(0.0) / (m - 2.0)).sqrt()
        } else {
            f64::NAN
        }
    };
    if v1 == 0.0 || v2 == 0.0 {
        return Ok(Correlation {
            value: 0.0,
            se: se_of(0.0),
            degenerate: true,
        });
    }
    let r = (c / (v1 * v2).sqrt()).clamp(-1.0, 1.0);
    Ok(Correlation {
        value: r,
        se: se_of(r),
        degenerate: false,
    })
}

/// Fraction of trajectories whose sign pattern at time index `k` disagrees
/// with `target`. A channel that is exactly zero counts as half an error.
pub fn error_probability(e: &Ensemble, k: usize, target: &SpinConfig) -> Result<Estimate> {
    if target.len() != 2 {
        return Err(Error::InvalidArgument("target must be a two-spin configuration".into()));
    }
    if e.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let want = target.spins()[0] * target.spins()[1];
    let (x1, x2) = e.column(k)?;
    let errors: f64 = x1
        .iter()
        .zip(&x2)
        .map(|(a, b)| {
            if *a == 0.0 || *b == 0.0 {
                0.5
            } else if (a.signum() * b.signum()) as i8 == want {
                0.0
            } else {
                1.0
            }
        })
        .sum();
    let m = x1.len() as f64;
    let p = errors / m;
    Ok(Estimate {
        value: p,
        se: (p * (1.0 - p) / m).sqrt(),
    })
}

/// All statistics on the ensemble's time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_diff_sq: Vec<f64>,
    pub mean_diff_sq_se: Vec<f64>,
    pub cross_corr: Vec<f64>,
    pub cross_corr_se: Vec<f64>,
    /// Time indices whose correlation was defined as 0 for lack of variance.
    pub degenerate_corr: Vec<usize>,
    pub pr_error: Vec<f64>,
    pub pr_error_se: Vec<f64>,
    pub n_samples: usize,
}

/// Statistics at every stored time; errors are counted against `target`.
pub fn ensemble_stats(e: &Ensemble, target: &SpinConfig) -> Result<EnsembleStats> {
    need_two(e.len())?;
    let rows: Vec<(Estimate, Correlation, Estimate)> = (0..e.times.len())
        .into_par_iter()
        .map(|k| {
            Ok((
                mean_diff_squared(e, k)?,
                cross_correlation(e, k)?,
                error_probability(e, k, target)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleStats {
        times: e.times.clone(),
        mean_diff_sq: rows.iter().map(|r| r.0.value).collect(),
        mean_diff_sq_se: rows.iter().map(|r| r.0.se).collect(),
        cross_corr: rows.iter().map(|r| r.1.value).collect(),
        cross_corr_se: rows.iter().map(|r| r.1.se).collect(),
        degenerate_corr: rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.1.degenerate)
            .map(|(k, _)| k)
            .collect(),
        pr_error: rows.iter().map(|r| r.2.value).collect(),
        pr_error_se: rows.iter().map(|r| r.2.se).collect(),
        n_samples: e.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn antiferro() -> SpinConfig {
        SpinConfig::new(vec![1, -1]).unwrap()
    }

    fn ens(pairs: &[(f64, f64)]) -> Ensemble {
        Ensemble::new(vec![0.0], pairs.iter().map(|&(a, b)| vec![vec![a], vec![b]]).collect()).unwrap()
    }

    #[test]
    fn thermal_occupation_examples() {
        assert_eq!(thermal_occupation(0.0, 1.0).unwrap(), 0.0);
        assert!((thermal_occupation(1.0, 2f64.ln()).unwrap() - 1.0).abs() < 1e-12);
        assert!((thermal_occupation(1.0, 1.5f64.ln()).unwrap() - 2.0).abs() < 1e-12);
        assert!(thermal_occupation(1.0, 0.0).is_err());
        assert!(thermal_occupation(1.0, -1.0).is_err());
    }

    #[test]
    fn mean_diff_squared_examples() {
        assert_eq!(mean_diff_squared(&ens(&[(0.0, 0.0); 4]), 0).unwrap().value, 0.0);
        let abar: f64 = 0.9;
        let x = std::f64::consts::SQRT_2 * abar;
        let e = ens(&[(x, -x), (-x, x), (x, -x)]);
        let est = mean_diff_squared(&e, 0).unwrap();
        assert!((est.value - 8.0 * abar * abar).abs() < 1e-12);
        assert!(est.se.abs() < 1e-12);
        assert!(mean_diff_squared(&ens(&[(1.0, 0.0)]), 0).is_err());
    }

    #[test]
    fn cross_correlation_examples() {
        let xs = [0.3, -1.2, 0.8, 2.0, -0.4];
        let same: Vec<_> = xs.iter().map(|&x| (x, x)).collect();
        let opp: Vec<_> = xs.iter().map(|&x| (x, -x)).collect();
        assert!((cross_correlation(&ens(&same), 0).unwrap().value - 1.0).abs() < 1e-12);
        assert!((cross_correlation(&ens(&opp), 0).unwrap().value + 1.0).abs() < 1e-12);
        let flat = cross_correlation(&ens(&[(1.0, 0.3), (1.0, -0.2), (1.0, 0.5)]), 0).unwrap();
        assert!(flat.degenerate && flat.value == 0.0);
    }

    #[test]
    fn error_probability_examples() {
        let settled = ens(&[(1.0, -1.2), (-0.9, 1.1), (1.3, -0.7)]);
        assert_eq!(error_probability(&settled, 0, &antiferro()).unwrap().value, 0.0);
        let ferro = ens(&[(1.0, 1.2), (-0.9, -1.1)]);
        assert_eq!(error_probability(&ferro, 0, &antiferro()).unwrap().value, 1.0);
        let vacuum = ens(&[(0.0, 0.0); 6]);
        assert_eq!(error_probability(&vacuum, 0, &antiferro()).unwrap().value, 0.5);
        let ferro_target = SpinConfig::new(vec![1, 1]).unwrap();
        assert_eq!(error_probability(&ferro, 0, &ferro_target).unwrap().value, 0.0);
    }

    #[test]
    fn ensemble_requires_two_aligned_modes() {
        assert!(Ensemble::new(vec![0.0], vec![vec![vec![1.0]]]).is_err());
        assert!(Ensemble::new(vec![0.0, 1.0], vec![vec![vec![1.0], vec![2.0]]]).is_err());
    }

    #[test]
    fn stats_table_is_aligned() {
        let e = Ensemble::new(
            vec![0.0, 1.0],
            vec![
                vec![vec![0.0, 1.0], vec![0.0, -1.0]],
                vec![vec![0.0, -2.0], vec![0.0, 1.5]],
                vec![vec![0.0, 0.5], vec![0.0, -0.1]],
            ],
        )
        .unwrap();
        let s = ensemble_stats(&e, &antiferro()).unwrap();
        assert_eq!(s.n_samples, 3);
        assert_eq!(s.pr_error, vec![0.5, 0.0]);
        assert_eq!(s.degenerate_corr, vec![0]);
        assert_eq!(s.mean_diff_sq.len(), 2);
    }

    fn samples() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..40)
    }

    proptest! {
        #[test]
        fn correlation_is_affine_invariant(pairs in samples(), a in 0.1..10.0f64, b in -3.0..3.0f64) {
            let base = cross_correlation(&ens(&pairs), 0).unwrap();
            let moved: Vec<_> = pairs.iter().map(|&(x, y)| (a * x + b, a * y + b)).collect();
            let r = cross_correlation(&ens(&moved), 0).unwrap();
            prop_assume!(!base.degenerate && !r.degenerate);
            prop_assert!((base.value - r.value).abs() < 1e-9);
        }

        #[test]
        fn statistics_stay_in_range(pairs in samples()) {
            let e = ens(&pairs);
            let r = cross_correlation(&e, 0).unwrap();
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&r.value));
            let p = error_probability(&e, 0, &antiferro()).unwrap();
            prop_assert!((0.0..=1.0).contains(&p.value));
            prop_assert!(mean_diff_squared(&e, 0).unwrap().value >= 0.0);
        }

        #[test]
        fn channel_swap_preserves_everything(pairs in samples()) {
            let swapped: Vec<_> = pairs.iter().map(|&(x, y)| (y, x)).collect();
            let (e, s) = (ens(&pairs), ens(&swapped));
            prop_assert_eq!(mean_diff_squared(&e, 0).unwrap(), mean_diff_squared(&s, 0).unwrap());
            prop_assert_eq!(error_probability(&e, 0, &antiferro()).unwrap(), error_probability(&s, 0, &antiferro()).unwrap());
            prop_assert!((cross_correlation(&e, 0).unwrap().value - cross_correlation(&s, 0).unwrap().value).abs() < 1e-12);
        }
    }
}
