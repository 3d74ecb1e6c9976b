use std::io::{self, Write};

use super::{fit_against_table, hazard_for, FittedModel, ModelMode};
use crate::baseline::{BaselineModel, FitControl};
use crate::data::{CumulativeHazardTable, MortalitySurface};
use crate::error::{Error, Result};
use crate::frailty::{FrailtyFamily, FrailtySpec};
use crate::numeric::fmt_f64;
use crate::optim::{golden_section_max, nelder_mead_max};

/// Largest admissible stable index in the two-dimensional search.
const ALPHA_MAX: f64 = 1.0 - 1e-6;

/// Settings for the searches over frailty parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Upper end of the initial variance interval `[0, upper]`.
    pub sigma2_upper: f64,
    pub sigma2_tol: f64,
    /// Times the interval is quadrupled when the optimum sits at its upper end.
    pub max_widenings: usize,
    /// Starting `(alpha, sigma2)` for the stable family.
    pub stable_start: (f64, f64),
    pub simplex_tol: f64,
    pub max_simplex_iterations: usize,
    pub fit: FitControl,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            sigma2_upper: 2.0,
            sigma2_tol: 1e-7,
            max_widenings: 3,
            stable_start: (0.25, 0.5),
            simplex_tol: 1e-8,
            max_simplex_iterations: 5000,
            fit: FitControl::default(),
        }
    }
}

/// One evaluation of the profile log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub alpha: f64,
    pub sigma2: f64,
    /// Relative to the saturated model; `NaN` when the inner fit failed.
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFit {
    pub fitted: FittedModel,
    /// Every point visited by the search, in order.
    pub evaluations: Vec<ProfilePoint>,
}

impl ProfileFit {
    pub fn write_profile_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_profile_points(out, &self.evaluations)
    }
}

pub fn write_profile_points<W: Write>(mut out: W, points: &[ProfilePoint]) -> io::Result<()> {
    writeln!(out, "alpha,sigma2,loglik")?;
    for p in points {
        writeln!(out, "{},{},{}", fmt_f64(p.alpha), fmt_f64(p.sigma2), fmt_f64(p.loglik))?;
    }
    Ok(())
}

pub(crate) fn spec_for(family: FrailtyFamily, alpha: f64, sigma2: f64) -> Result<FrailtySpec> {
    if sigma2 == 0.0 {
        return Ok(FrailtySpec::Degenerate);
    }
    family.with_params(sigma2, alpha)
}

/// Centered profile log-likelihood at one frailty specification.
pub(crate) fn profile_value(
    spec: &FrailtySpec,
    surface: &MortalitySurface,
    hazard: &CumulativeHazardTable,
    mode: ModelMode,
    model: BaselineModel,
    control: &FitControl,
) -> Result<f64> {
    let fit = fit_against_table(spec, surface, hazard, mode, model, control)?;
    Ok(fit.trace.last().map(|p| p.1).unwrap_or(f64::NAN))
}

/// Maximizes the profile log-likelihood over the frailty parameters.
///
/// Gamma and inverse Gaussian use golden section on `sigma2`; the stable
/// family uses Nelder-Mead on `(alpha, log sigma2)`.
pub fn profile_fit(
    family: FrailtyFamily,
    surface: &MortalitySurface,
    mode: ModelMode,
    model: BaselineModel,
    config: &SearchConfig,
) -> Result<ProfileFit> {
    if mode == ModelMode::CohortAdditive {
        return Err(Error::Unsupported("additive models are profiled through the EM fit".into()));
    }
    let hazard = hazard_for(surface, mode)?;
    let mut evaluations = Vec::new();
    let mut objective = |alpha: f64, sigma2: f64| -> Option<f64> {
        let v = spec_for(family, alpha, sigma2)
            .and_then(|spec| profile_value(&spec, surface, &hazard, mode, model, &config.fit))
            .ok();
        evaluations.push(ProfilePoint { alpha, sigma2, loglik: v.unwrap_or(f64::NAN) });
        v
    };

    let (alpha, sigma2) = match family {
        FrailtyFamily::Degenerate => (0.0, 0.0),
        FrailtyFamily::Gamma | FrailtyFamily::InverseGaussian => {
            let s = search_sigma2(|s2| objective(0.0, s2), config)?;
            (0.0, s)
        }
        FrailtyFamily::Stable => {
            let (a0, s0) = config.stable_start;
            let res = nelder_mead_max(
                |p| objective(p[0].clamp(0.0, ALPHA_MAX), p[1].exp()),
                &[a0, s0.ln()],
                &[0.1, 0.5],
                config.simplex_tol,
                config.max_simplex_iterations,
            );
            if !res.value.is_finite() {
                return Err(Error::Evaluation("every profile evaluation failed".into()));
            }
            if !res.converged {
                return Err(Error::NonConvergence {
                    iterations: res.iterations,
                    context: "stable profile search".into(),
                    trace: res.trace,
                });
            }
            (res.x[0].clamp(0.0, ALPHA_MAX), res.x[1].exp())
        }
    };

    let spec = spec_for(family, alpha, sigma2)?;
    let mut fitted = fit_against_table(&spec, surface, &hazard, mode, model, &config.fit)?;
    // the search trace: best value found so far after each evaluation
    let mut best = f64::NEG_INFINITY;
    fitted.trace = evaluations
        .iter()
        .enumerate()
        .filter(|(_, p)| p.loglik.is_finite())
        .map(|(i, p)| {
            best = best.max(p.loglik);
            (i, best)
        })
        .collect();
    fitted.iterations = evaluations.len();
    Ok(ProfileFit { fitted, evaluations })
}

/// Golden section on `[0, upper]`, widening the interval while the optimum is at its edge.
pub(crate) fn search_sigma2(mut f: impl FnMut(f64) -> Option<f64>, config: &SearchConfig) -> Result<f64> {
    let mut upper = config.sigma2_upper;
    let mut widenings = 0;
    loop {
        let tol = config.sigma2_tol * upper.max(1.0);
        let (x, v) = golden_section_max(&mut f, 0.0, upper, tol);
        if !v.is_finite() {
            return Err(Error::Evaluation("every profile evaluation failed".into()));
        }
        if x < 0.99 * upper || widenings >= config.max_widenings {
            return Ok(x);
        }
        upper *= 4.0;
        widenings += 1;
    }
}

/// Profile log-likelihood on a rectangular `(alpha, sigma2)` grid.
///
/// Points are evaluated independently (in parallel when enabled); failed
/// inner fits give `NaN`.
pub fn profile_grid(
    family: FrailtyFamily,
    surface: &MortalitySurface,
    mode: ModelMode,
    model: BaselineModel,
    alphas: &[f64],
    sigma2s: &[f64],
    control: &FitControl,
) -> Result<Vec<ProfilePoint>> {
    if mode == ModelMode::CohortAdditive {
        return Err(Error::Unsupported("profile grid for additive models".into()));
    }
    let hazard = hazard_for(surface, mode)?;
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| sigma2s.iter().map(move |&s| (a, s))).collect();
    let eval = |&(alpha, sigma2): &(f64, f64)| ProfilePoint {
        alpha,
        sigma2,
        loglik: spec_for(family, alpha, sigma2)
            .and_then(|spec| profile_value(&spec, surface, &hazard, mode, model, control))
            .unwrap_or(f64::NAN),
    };
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        points.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = points.iter().map(eval).collect();
    Ok(out)
}
