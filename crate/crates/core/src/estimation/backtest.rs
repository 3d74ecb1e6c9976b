use std::io::{self, Write};

use super::profile::{search_sigma2, spec_for, SearchConfig};
use super::{fit_fixed_frailty_with, ModelMode};
use crate::baseline::BaselineModel;
use crate::data::MortalitySurface;
use crate::error::{Error, Result};
use crate::forecast::{fit_random_walk, forecast_index, forecast_mortality, IndexForecastOptions};
use crate::frailty::FrailtyFamily;
use crate::lexis::LexisWindow;
use crate::numeric::{compensated_sum, fmt_f64, poisson_term, poisson_term_centered};

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub family: FrailtyFamily,
    pub model: BaselineModel,
    /// Variances at which the forecast fit is reported.
    pub curve: Vec<f64>,
    pub search: SearchConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            family: FrailtyFamily::Gamma,
            model: BaselineModel::LeeCarter,
            curve: (0..=40).map(|i| i as f64 * 0.05).collect(),
            search: SearchConfig { sigma2_tol: 1e-6, ..SearchConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub sigma2: f64,
    /// Forecast fit at `sigma2`.
    pub f: f64,
    /// `(sigma2, f)` at the configured grid; `NaN` where the fit failed.
    pub curve: Vec<(f64, f64)>,
}

impl BacktestResult {
    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sigma2,f")?;
        for (s, f) in &self.curve {
            writeln!(out, "{},{}", fmt_f64(*s), fmt_f64(*f))?;
        }
        Ok(())
    }
}

struct Split {
    fit: MortalitySurface,
    test: MortalitySurface,
}

fn split(surface: &MortalitySurface, fit_window: &LexisWindow, test_window: &LexisWindow) -> Result<Split> {
    if test_window.t_min != fit_window.t_max + 1 {
        return Err(Error::Structure(format!(
            "test years must start right after the fitting years ({} follows {})",
            test_window.t_min, fit_window.t_max
        )));
    }
    if test_window.x_min != fit_window.x_min || test_window.x_max != fit_window.x_max {
        return Err(Error::Structure("fitting and test windows must cover the same ages".into()));
    }
    Ok(Split { fit: surface.restrict(fit_window)?, test: surface.restrict(test_window)? })
}

/// Forecast fit `f(sigma2)` and its centered counterpart.
fn forecast_fit(split: &Split, sigma2: f64, config: &BacktestConfig) -> Result<(f64, f64)> {
    let spec = spec_for(config.family, 0.0, sigma2)?;
    let fitted =
        fit_fixed_frailty_with(&spec, &split.fit, ModelMode::PeriodMultiplicative, config.model, &config.search.fit)?;
    let series = fitted.baseline.index_series();
    let rw = fit_random_walk(&series)?;
    let horizon = split.test.window().n_years();
    let path = forecast_index(
        &rw,
        series.last().unwrap(),
        split.fit.window().t_max + 1,
        horizon,
        &IndexForecastOptions::default(),
    )?;
    let (mu, _) = forecast_mortality(&fitted, &path.mean, None)?;
    let d = split.test.deaths();
    let e = split.test.exposures();
    let mut raw = Vec::new();
    let mut centered = Vec::new();
    for (t, x, m) in mu.iter() {
        let exposure = e.at(t, x);
        if exposure > 0.0 {
            let bad = || Error::Evaluation(format!("non-positive forecast intensity at (t={t}, x={x})"));
            raw.push(poisson_term(d.at(t, x), m, exposure).ok_or_else(bad)?);
            centered.push(poisson_term_centered(d.at(t, x), m, exposure).ok_or_else(bad)?);
        }
    }
    Ok((compensated_sum(raw), compensated_sum(centered)))
}

/// Chooses the frailty variance that maximizes the out-of-sample forecast fit.
///
/// Each candidate is fitted in period mode on `fit_window`, forecast along
/// the mean index path over `test_window`, and scored with the Poisson
/// log-likelihood of the test data.
pub fn backtest_sigma2(
    surface: &MortalitySurface,
    fit_window: &LexisWindow,
    test_window: &LexisWindow,
    config: &BacktestConfig,
) -> Result<BacktestResult> {
    let split = split(surface, fit_window, test_window)?;
    let eval = |s: &f64| (*s, forecast_fit(&split, *s, config).map(|v| v.0).unwrap_or(f64::NAN));
    #[cfg(feature = "parallel")]
    let curve: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        config.curve.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let curve: Vec<(f64, f64)> = config.curve.iter().map(eval).collect();

    let sigma2 = search_sigma2(|s| forecast_fit(&split, s, config).ok().map(|v| v.1), &config.search)?;
    let (f, _) = forecast_fit(&split, sigma2, config)?;
    Ok(BacktestResult { sigma2, f, curve })
}
