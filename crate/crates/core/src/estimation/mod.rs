//! Pseudo-likelihood fitting of multiplicative and additive frailty models.

mod backtest;
mod em;
mod profile;
mod switching;

pub use backtest::{backtest_sigma2, BacktestConfig, BacktestResult};
pub use em::{em_fit_additive, em_fit_additive_fixed, split_deaths, EmControl, FrailtyChoice};
pub use profile::{profile_fit, profile_grid, write_profile_points, ProfileFit, ProfilePoint, SearchConfig};
pub use switching::{gamma_sigma2_derivatives, gamma_sigma2_step, switching_fit, SwitchingControl};

use std::io::{self, Write};

use crate::baseline::{fit_weighted_poisson, BaselineModel, BaselineParams, FitControl};
use crate::data::{cumulative_hazard, death_rates, CumulativeHazardTable, HazardMode, MortalitySurface};
use crate::error::{Error, Result};
use crate::frailty::FrailtySpec;
use crate::lexis::Grid;
use crate::numeric::{compensated_sum, fmt_f64, poisson_saturated_offset, poisson_term, poisson_term_centered};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelMode {
    CohortMultiplicative,
    PeriodMultiplicative,
    CohortAdditive,
}

impl ModelMode {
    pub fn name(self) -> &'static str {
        match self {
            ModelMode::CohortMultiplicative => "cohort",
            ModelMode::PeriodMultiplicative => "period",
            ModelMode::CohortAdditive => "additive",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "cohort" | "cohort-multiplicative" => Some(ModelMode::CohortMultiplicative),
            "period" | "period-multiplicative" => Some(ModelMode::PeriodMultiplicative),
            "additive" | "cohort-additive" => Some(ModelMode::CohortAdditive),
            _ => None,
        }
    }

    pub fn hazard_mode(self) -> HazardMode {
        match self {
            ModelMode::PeriodMultiplicative => HazardMode::Period,
            _ => HazardMode::Cohort,
        }
    }
}

/// A fitted frailty model together with the hazard table it was fitted against.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub frailty: FrailtySpec,
    pub baseline: BaselineParams,
    pub background: Option<BaselineParams>,
    pub hazard_table: CumulativeHazardTable,
    pub mode: ModelMode,
    /// `sum D log mu - mu E` over cells with positive exposure.
    pub loglik: f64,
    /// Data-only constant: `loglik = trace value + loglik_offset` at the optimum.
    pub loglik_offset: f64,
    /// `(iteration, log-likelihood relative to the saturated model)`.
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    /// Cells where the cumulative hazard was negative and clipped to zero.
    pub floored_cells: usize,
}

impl FittedModel {
    /// Pseudo intensities on the fitting window.
    pub fn fitted_rates(&self) -> Result<Grid> {
        pseudo_rates(&self.frailty, &self.baseline, self.background.as_ref(), &self.hazard_table)
    }

    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iter,loglik")?;
        for (i, v) in &self.trace {
            writeln!(out, "{i},{}", fmt_f64(*v))?;
        }
        Ok(())
    }
}

/// Mean frailty factors `nu'(nu^{-1}(H))`, with `H` clipped at zero.
pub fn adjustment_factors(frailty: &FrailtySpec, hazard: &CumulativeHazardTable) -> Result<Grid> {
    let (h, _) = hazard.floored();
    Grid::try_from_fn(*h.window(), |t, x| frailty.mean_frailty_from_h(h.at(t, x)))
}

/// `mu = nu'(nu^{-1}(H)) F (+ G)` on the hazard table's window.
pub fn pseudo_rates(
    frailty: &FrailtySpec,
    baseline: &BaselineParams,
    background: Option<&BaselineParams>,
    hazard: &CumulativeHazardTable,
) -> Result<Grid> {
    let c = adjustment_factors(frailty, hazard)?;
    Grid::try_from_fn(*hazard.window(), |t, x| {
        let f = c.at(t, x) * baseline.eval(t, x)?;
        Ok(match background {
            Some(g) => f + g.eval(t, x)?,
            None => f,
        })
    })
}

fn check_consistent(surface: &MortalitySurface, hazard: &CumulativeHazardTable) -> Result<()> {
    if surface.window() != hazard.window() {
        return Err(Error::Structure(format!(
            "hazard table on {} does not match surface on {}",
            hazard.window(),
            surface.window()
        )));
    }
    Ok(())
}

fn likelihood_sum(surface: &MortalitySurface, mu: &Grid, term: impl Fn(f64, f64, f64) -> Option<f64>) -> Result<f64> {
    let d = surface.deaths();
    let e = surface.exposures();
    let mut terms = Vec::with_capacity(mu.values().len());
    for (t, x, m) in mu.iter() {
        let exposure = e.at(t, x);
        if exposure > 0.0 {
            let v = term(d.at(t, x), m, exposure).ok_or_else(|| {
                Error::Evaluation(format!("non-positive intensity {m} at (t={t}, x={x}) with deaths"))
            })?;
            terms.push(v);
        }
    }
    Ok(compensated_sum(terms))
}

/// Pseudo log-likelihood `sum {D log mu - mu E}` over cells with `E > 0`.
pub fn pseudo_log_likelihood(
    frailty: &FrailtySpec,
    baseline: &BaselineParams,
    background: Option<&BaselineParams>,
    surface: &MortalitySurface,
    hazard: &CumulativeHazardTable,
) -> Result<f64> {
    check_consistent(surface, hazard)?;
    let mu = pseudo_rates(frailty, baseline, background, hazard)?;
    likelihood_sum(surface, &mu, poisson_term)
}

/// The same likelihood measured from the saturated model.
pub(crate) fn centered_log_likelihood(surface: &MortalitySurface, mu: &Grid) -> Result<f64> {
    likelihood_sum(surface, mu, poisson_term_centered)
}

pub(crate) fn saturated_offset(surface: &MortalitySurface) -> f64 {
    let e = surface.exposures();
    compensated_sum(surface.deaths().iter().map(|(t, x, d)| poisson_saturated_offset(d, e.at(t, x))))
}

pub(crate) fn hazard_for(surface: &MortalitySurface, mode: ModelMode) -> Result<CumulativeHazardTable> {
    cumulative_hazard(&death_rates(surface), mode.hazard_mode(), None)
}

/// Baseline fit with exposures `c E` for a fixed frailty against a given table.
pub(crate) fn fit_against_table(
    frailty: &FrailtySpec,
    surface: &MortalitySurface,
    hazard: &CumulativeHazardTable,
    mode: ModelMode,
    model: BaselineModel,
    control: &FitControl,
) -> Result<FittedModel> {
    let c = adjustment_factors(frailty, hazard)?;
    let adjusted = Grid::from_fn(*surface.window(), |t, x| c.at(t, x) * surface.exposures().at(t, x));
    let fit = fit_weighted_poisson(model, surface.deaths(), &adjusted, control)?;
    let loglik = pseudo_log_likelihood(frailty, &fit.params, None, surface, hazard)?;
    let iterations = fit.iterations;
    Ok(FittedModel {
        frailty: *frailty,
        baseline: fit.params,
        background: None,
        hazard_table: hazard.clone(),
        mode,
        loglik,
        loglik_offset: saturated_offset(surface),
        trace: fit.trace.into_iter().enumerate().collect(),
        iterations,
        floored_cells: 0,
    })
}

/// Fits the baseline for a fixed frailty distribution (multiplicative modes).
pub fn fit_fixed_frailty(
    frailty: &FrailtySpec,
    surface: &MortalitySurface,
    mode: ModelMode,
    model: BaselineModel,
) -> Result<FittedModel> {
    fit_fixed_frailty_with(frailty, surface, mode, model, &FitControl::default())
}

pub fn fit_fixed_frailty_with(
    frailty: &FrailtySpec,
    surface: &MortalitySurface,
    mode: ModelMode,
    model: BaselineModel,
    control: &FitControl,
) -> Result<FittedModel> {
    if mode == ModelMode::CohortAdditive {
        return Err(Error::Unsupported("additive models are fitted by the EM algorithm".into()));
    }
    frailty.validate()?;
    let hazard = hazard_for(surface, mode)?;
    fit_against_table(frailty, surface, &hazard, mode, model, control)
}
