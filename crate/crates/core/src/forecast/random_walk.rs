use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::fmt_f64;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Random walk with drift `theta_t = theta_{t-1} + xi + U_t`, `U_t ~ N(0, Sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftModel {
    pub drift: Vec<f64>,
    /// Innovation covariance per year.
    pub cov: Vec<Vec<f64>>,
    /// Number of differences the estimates are based on.
    pub n_obs: usize,
}

impl DriftModel {
    pub fn dim(&self) -> usize {
        self.drift.len()
    }
}

/// Drift as the mean of first differences, covariance about it with divisor `n - 1`.
pub fn fit_random_walk(series: &[Vec<f64>]) -> Result<DriftModel> {
    if series.len() < 3 {
        return Err(Error::Domain(format!("random walk needs at least 3 observations, got {}", series.len())));
    }
    let d = series[0].len();
    if d == 0 || series.iter().any(|v| v.len() != d) {
        return Err(Error::Structure("index series has inconsistent dimensions".into()));
    }
    let diffs: Vec<Vec<f64>> = series.windows(2).map(|w| (0..d).map(|i| w[1][i] - w[0][i]).collect()).collect();
    let n = diffs.len();
    let drift: Vec<f64> = (0..d).map(|i| diffs.iter().map(|v| v[i]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for v in &diffs {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (v[i] - drift[i]) * (v[j] - drift[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        for c in row.iter_mut() {
            *c /= (n - 1) as f64;
        }
    }
    Ok(DriftModel { drift, cov, n_obs: n })
}

/// Lower-triangular factor of a positive semi-definite matrix.
///
/// Columns with a non-positive pivot are set to zero.
pub fn cholesky_psd(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l[j][k] * l[j][k]).sum();
        let pivot = a[j][j] - s;
        let scale = a[j][j].abs().max(1e-300);
        if pivot <= 1e-14 * scale {
            continue;
        }
        l[j][j] = pivot.sqrt();
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = (a[i][j] - s) / l[j][j];
        }
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexForecastOptions {
    /// Number of simulated future paths.
    pub draws: usize,
    pub seed: u64,
}

impl Default for IndexForecastOptions {
    fn default() -> Self {
        Self { draws: 0, seed: 1 }
    }
}

/// Index paths for years `first_year ..` (one entry per horizon step).
#[derive(Debug, Clone, PartialEq)]
pub struct IndexForecast {
    pub first_year: i32,
    pub mean: Vec<Vec<f64>>,
    pub lo95: Vec<Vec<f64>>,
    pub hi95: Vec<Vec<f64>>,
    /// Bands that also account for the estimated drift.
    pub lo95_param: Vec<Vec<f64>>,
    pub hi95_param: Vec<Vec<f64>>,
    /// `draws[k][j]` is path `k` at horizon step `j + 1`.
    pub draws: Vec<Vec<Vec<f64>>>,
}

impl IndexForecast {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,component,mean,lo95,hi95,lo95_param,hi95_param")?;
        for j in 0..self.horizon() {
            let t = self.first_year + j as i32;
            for c in 0..self.mean[j].len() {
                writeln!(
                    out,
                    "{t},{},{},{},{},{},{}",
                    c + 1,
                    fmt_f64(self.mean[j][c]),
                    fmt_f64(self.lo95[j][c]),
                    fmt_f64(self.hi95[j][c]),
                    fmt_f64(self.lo95_param[j][c]),
                    fmt_f64(self.hi95_param[j][c])
                )?;
            }
        }
        Ok(())
    }
}

/// Mean path `last + j xi`, marginal 95% bands, and optional simulated paths.
pub fn forecast_index(
    model: &DriftModel,
    last: &[f64],
    first_year: i32,
    horizon: usize,
    options: &IndexForecastOptions,
) -> Result<IndexForecast> {
    if horizon == 0 {
        return Err(Error::Domain("forecast horizon must be at least 1".into()));
    }
    let d = model.dim();
    if last.len() != d {
        return Err(Error::Structure(format!("last index has dimension {}, model {d}", last.len())));
    }
    let n = model.n_obs as f64;
    let mut out = IndexForecast {
        first_year,
        mean: Vec::with_capacity(horizon),
        lo95: Vec::with_capacity(horizon),
        hi95: Vec::with_capacity(horizon),
        lo95_param: Vec::with_capacity(horizon),
        hi95_param: Vec::with_capacity(horizon),
        draws: Vec::new(),
    };
    for step in 1..=horizon {
        let j = step as f64;
        let mean: Vec<f64> = (0..d).map(|i| last[i] + j * model.drift[i]).collect();
        let half: Vec<f64> = (0..d).map(|i| Z95 * (j * model.cov[i][i]).sqrt()).collect();
        let half_p: Vec<f64> =
            (0..d).map(|i| Z95 * (j * model.cov[i][i] + j * j * model.cov[i][i] / n).sqrt()).collect();
        out.lo95.push((0..d).map(|i| mean[i] - half[i]).collect());
        out.hi95.push((0..d).map(|i| mean[i] + half[i]).collect());
        out.lo95_param.push((0..d).map(|i| mean[i] - half_p[i]).collect());
        out.hi95_param.push((0..d).map(|i| mean[i] + half_p[i]).collect());
        out.mean.push(mean);
    }
    if options.draws > 0 {
        let l = cholesky_psd(&model.cov);
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        for _ in 0..options.draws {
            let mut state = last.to_vec();
            let mut path = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                for i in 0..d {
                    let shock: f64 = (0..=i).map(|k| l[i][k] * z[k]).sum();
                    state[i] += model.drift[i] + shock;
                }
                path.push(state.clone());
            }
            out.draws.push(path);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_series_has_no_noise() {
        let s: Vec<Vec<f64>> = (0..10).map(|t| vec![2.0 * t as f64]).collect();
        let m = fit_random_walk(&s).unwrap();
        assert_eq!(m.drift, vec![2.0]);
        assert_eq!(m.cov, vec![vec![0.0]]);
        let f = forecast_index(&m, &[18.0], 2010, 3, &IndexForecastOptions::default()).unwrap();
        assert_eq!(f.mean[2], vec![24.0]);
        assert_eq!(f.lo95, f.mean);
        assert_eq!(f.hi95_param, f.mean);
    }

    #[test]
    fn constant_series() {
        let m = fit_random_walk(&vec![vec![1.5, -2.0]; 5]).unwrap();
        assert_eq!(m.drift, vec![0.0, 0.0]);
        assert!(m.cov.iter().flatten().all(|v| *v == 0.0));
        assert!(fit_random_walk(&vec![vec![1.0]; 2]).is_err());
    }

    #[test]
    fn one_step_half_width() {
        let m = DriftModel { drift: vec![0.0], cov: vec![vec![4.0]], n_obs: 100 };
        let f = forecast_index(&m, &[0.0], 2000, 1, &IndexForecastOptions::default()).unwrap();
        assert!((f.hi95[0][0] - 1.959964 * 2.0).abs() < 1e-5);
        assert!((f.hi95_param[0][0] - Z95 * (4.0f64 + 0.04).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs_and_handles_singular() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky_psd(&a);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - a[i][j]).abs() < 1e-12);
            }
        }
        let s = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let l = cholesky_psd(&s);
        assert_eq!(l[1][1], 0.0);
        assert_eq!(l[1][0], 1.0);
    }

    #[test]
    fn draws_are_seeded() {
        let m = DriftModel { drift: vec![-1.0, 0.5], cov: vec![vec![1.0, 0.2], vec![0.2, 0.5]], n_obs: 30 };
        let opts = IndexForecastOptions { draws: 5, seed: 9 };
        let a = forecast_index(&m, &[0.0, 0.0], 2000, 4, &opts).unwrap();
        let b = forecast_index(&m, &[0.0, 0.0], 2000, 4, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 5);
    }
}
