//! Forecasts of the period index, the integrated baseline and the cohort
//! intensities, with period life expectancy and improvement rates.

mod random_walk;

pub use random_walk::{
    cholesky_psd, fit_random_walk, forecast_index, DriftModel, IndexForecast, IndexForecastOptions, Z95,
};

use std::io::{self, Write};

use crate::baseline::fit_logistic_extension;
use crate::data::HazardMode;
use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::lexis::{Grid, LexisWindow, MAX_AGE};
use crate::numeric::fmt_f64;

/// Integrated baseline over the fitting window followed by `index_path.len()` forecast years.
///
/// Inside the window this is `nu^{-1}` of the fitted hazard table. Beyond it,
/// cohort models run the diagonal recursion with the baseline at the previous
/// year's index (the last fitted index for the first forecast year); period
/// models sum the baseline over ages within each forecast year.
pub fn forecast_integrated_baseline(fitted: &FittedModel, index_path: &[Vec<f64>]) -> Result<Grid> {
    let w = *fitted.hazard_table.window();
    let ext = w.extended(index_path.len());
    let (h, _) = fitted.hazard_table.floored();
    let mut out = Grid::filled(ext, 0.0);
    for (t, x, v) in h.iter() {
        out.set(t, x, fitted.frailty.nu_inverse(v)?);
    }
    let baseline = &fitted.baseline;
    let last_fitted = baseline.index(w.t_max)?;
    let index_at = |t: i32| -> &[f64] {
        if t <= w.t_max {
            &last_fitted
        } else {
            &index_path[(t - w.t_max - 1) as usize]
        }
    };
    for t in w.t_max + 1..=ext.t_max {
        match fitted.mode.hazard_mode() {
            HazardMode::Cohort => {
                for x in w.x_min + 1..=w.x_max {
                    let v = out.at(t - 1, x - 1) + baseline.eval_at_index(index_at(t - 1), x - 1)?;
                    out.set(t, x, v);
                }
            }
            HazardMode::Period => {
                let mut acc = 0.0;
                for x in w.x_min + 1..=w.x_max {
                    acc += baseline.eval_at_index(index_at(t), x - 1)?;
                    out.set(t, x, acc);
                }
            }
        }
    }
    Ok(out)
}

/// Forecast intensities `nu'(I) F (+ G)` for the years after the fitting window.
///
/// Without an explicit background path the background index stays at its last
/// fitted value.
pub fn forecast_mortality(
    fitted: &FittedModel,
    index_path: &[Vec<f64>],
    background_path: Option<&[Vec<f64>]>,
) -> Result<(Grid, Grid)> {
    let w = *fitted.hazard_table.window();
    let horizon = index_path.len();
    if horizon == 0 {
        return Err(Error::Domain("forecast horizon must be at least 1".into()));
    }
    if let Some(p) = background_path {
        if p.len() != horizon {
            return Err(Error::Structure("background path length differs from the horizon".into()));
        }
    }
    let integrated = forecast_integrated_baseline(fitted, index_path)?;
    let region = LexisWindow::new(w.t_max + 1, w.t_max + horizon as i32, w.x_min, w.x_max)?;
    let frozen = match &fitted.background {
        Some(g) => Some(g.index(w.t_max)?),
        None => None,
    };
    let mu = Grid::try_from_fn(region, |t, x| {
        let j = (t - w.t_max - 1) as usize;
        let f = fitted.baseline.eval_at_index(&index_path[j], x)?;
        let mut m = fitted.frailty.nu_prime(integrated.at(t, x))? * f;
        if let Some(g) = &fitted.background {
            let zeta = match background_path {
                Some(p) => p[j].as_slice(),
                None => frozen.as_deref().unwrap(),
            };
            m += g.eval_at_index(zeta, x)?;
        }
        Ok(m)
    })?;
    Ok((mu, integrated))
}

/// Period life expectancy at the first age of `rates` under piecewise-constant intensities.
///
/// `rates[j]` applies on `[x0 + j, x0 + j + 1)`; the sum ends at age 110.
pub fn period_life_expectancy(rates: &[f64]) -> Result<f64> {
    let mut survival = 1.0;
    let mut e = 0.0;
    for &mu in rates {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Domain(format!("invalid intensity {mu}")));
        }
        let q = -(-mu).exp_m1();
        e += if mu > 0.0 { survival * q / mu } else { survival };
        survival *= (-mu).exp();
    }
    Ok(e)
}

/// `e_{x0}(t)` for every year of `mu`; ages above the grid come from a logistic fit at 70-90.
pub fn life_expectancy_series(mu: &Grid, x0: i32) -> Result<Vec<(i32, f64)>> {
    let w = mu.window();
    if x0 < w.x_min || x0 >= MAX_AGE {
        return Err(Error::Domain(format!("life expectancy age {x0} not covered by {w}")));
    }
    let extension = if w.x_max < MAX_AGE - 1 { Some(fit_logistic_extension(mu)?) } else { None };
    w.years()
        .map(|t| {
            let rates = (x0..MAX_AGE)
                .map(|x| if x <= w.x_max { Ok(mu.at(t, x)) } else { extension.as_ref().unwrap().eval(t, x) })
                .collect::<Result<Vec<f64>>>()?;
            Ok((t, period_life_expectancy(&rates)?))
        })
        .collect()
}

pub fn write_life_expectancy_csv<W: Write>(mut out: W, series: &[(i32, f64)]) -> io::Result<()> {
    writeln!(out, "t,e")?;
    for (t, e) in series {
        writeln!(out, "{t},{}", fmt_f64(*e))?;
    }
    Ok(())
}

/// `rho(t,x) = -(log mu(t+1,x) - log mu(t,x))` for `t_min <= t < t_max`.
pub fn improvement_rates(mu: &Grid) -> Result<Grid> {
    let w = mu.window();
    if w.t_min == w.t_max {
        return Err(Error::Domain("improvement rates need at least two years".into()));
    }
    if let Some((t, x, v)) = mu.iter().find(|(_, _, v)| !(*v > 0.0)) {
        return Err(Error::Domain(format!("non-positive intensity {v} at (t={t}, x={x})")));
    }
    let out = LexisWindow::new(w.t_min, w.t_max - 1, w.x_min, w.x_max)?;
    Ok(Grid::from_fn(out, |t, x| -(mu.at(t + 1, x).ln() - mu.at(t, x).ln())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastOptions {
    pub index: IndexForecastOptions,
    /// Age for the life expectancy series.
    pub life_expectancy_age: i32,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        Self { index: IndexForecastOptions::default(), life_expectancy_age: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub drift: DriftModel,
    pub index: IndexForecast,
    /// Intensities over the forecast years.
    pub mu: Grid,
    /// Integrated baseline over the fitting window and the forecast years.
    pub integrated: Grid,
    /// `None` when the age range cannot be extended to 110.
    pub life_expectancy: Option<Vec<(i32, f64)>>,
}

/// Random walk on the fitted index, mean-path intensities and life expectancy.
pub fn forecast(fitted: &FittedModel, horizon: usize, options: &ForecastOptions) -> Result<ForecastResult> {
    let w = *fitted.hazard_table.window();
    let series = fitted.baseline.index_series();
    let drift = fit_random_walk(&series)?;
    let index = forecast_index(&drift, series.last().unwrap(), w.t_max + 1, horizon, &options.index)?;
    let (mu, integrated) = forecast_mortality(fitted, &index.mean, None)?;
    let x0 = options.life_expectancy_age;
    let life_expectancy = if x0 >= w.x_min && (w.x_max >= MAX_AGE - 1 || (w.x_min <= 70 && w.x_max >= 90)) {
        Some(life_expectancy_series(&mu, x0)?)
    } else {
        None
    };
    Ok(ForecastResult { drift, index, mu, integrated, life_expectancy })
}
