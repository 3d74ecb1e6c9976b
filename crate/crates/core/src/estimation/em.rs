use super::profile::{search_sigma2, spec_for, ProfileFit, ProfilePoint, SearchConfig};
use super::{adjustment_factors, centered_log_likelihood, saturated_offset, FittedModel, ModelMode};
use crate::baseline::{fit_weighted_poisson, BaselineModel, BaselineParams, FitControl};
use crate::data::{cumulative_hazard, death_rates, HazardMode, MortalitySurface};
use crate::error::{Error, Result};
use crate::frailty::{FrailtyFamily, FrailtySpec};
use crate::lexis::Grid;
use crate::optim::nelder_mead_max;

#[derive(Debug, Clone, PartialEq)]
pub struct EmControl {
    pub tol: f64,
    /// Decreases beyond this slack abort the fit.
    pub decrease_tol: f64,
    pub max_iterations: usize,
    pub fit: FitControl,
}

impl Default for EmControl {
    fn default() -> Self {
        Self { tol: 1e-8, decrease_tol: 1e-8, max_iterations: 5000, fit: FitControl::default() }
    }
}

/// Frailty handling for the additive fit.
#[derive(Debug, Clone, PartialEq)]
pub enum FrailtyChoice {
    Fixed(FrailtySpec),
    /// Profile the EM fit over the family's parameters.
    Profile {
        family: FrailtyFamily,
        search: SearchConfig,
    },
}

fn half_min_positive(row: &[f64]) -> Option<f64> {
    row.iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
        .map(|v| 0.5 * v)
}

/// E-step: expected deaths from each cause given intensities `lam_f` and `g`.
pub fn split_deaths(deaths: &Grid, lam_f: &Grid, g: &Grid) -> (Grid, Grid) {
    let w = *deaths.window();
    let base = Grid::from_fn(w, |t, x| {
        let total = lam_f.at(t, x) + g.at(t, x);
        if total > 0.0 {
            deaths.at(t, x) * lam_f.at(t, x) / total
        } else {
            0.0
        }
    });
    let back = Grid::from_fn(w, |t, x| deaths.at(t, x) - base.at(t, x));
    (base, back)
}

/// EM fit of `mu = nu'(nu^{-1}(H)) F + G` for a fixed frailty.
///
/// `H` is the cohort cumulative hazard of `m - G`. Without a background model
/// `G` is zero and the fit reduces to the multiplicative one.
pub fn em_fit_additive_fixed(
    frailty: &FrailtySpec,
    surface: &MortalitySurface,
    baseline_model: BaselineModel,
    background_model: Option<BaselineModel>,
    control: &EmControl,
) -> Result<FittedModel> {
    frailty.validate()?;
    let window = *surface.window();
    let d = surface.deaths();
    let e = surface.exposures();
    let rates = death_rates(surface);

    let mut theta = fit_weighted_poisson(baseline_model, d, e, &control.fit)?.params;
    let mut zeta = match background_model {
        Some(model) => {
            let mut levels = Vec::with_capacity(window.n_years());
            for t in window.years() {
                levels.push(
                    half_min_positive(rates.grid().year_slice(t))
                        .ok_or_else(|| Error::Unidentifiable { year: t, message: "no positive death rate".into() })?,
                );
            }
            let back = Grid::from_fn(window, |t, x| levels[(t - window.t_min) as usize] * e.at(t, x));
            Some(fit_weighted_poisson(model, &back, e, &control.fit)?.params)
        }
        None => None,
    };

    let mut trace: Vec<f64> = Vec::new();
    for iteration in 0..control.max_iterations {
        let g = zeta.as_ref().map(BaselineParams::grid);
        let hazard = cumulative_hazard(&rates, HazardMode::Cohort, g.as_ref())?;
        let (_, floored_cells) = hazard.floored();
        let c = adjustment_factors(frailty, &hazard)?;
        let f = theta.grid();
        let lam_f = Grid::from_fn(window, |t, x| c.at(t, x) * f.at(t, x));
        let mu = Grid::from_fn(window, |t, x| lam_f.at(t, x) + g.as_ref().map_or(0.0, |g| g.at(t, x)));
        let ll = centered_log_likelihood(surface, &mu)?;

        if let Some(&last) = trace.last() {
            if ll < last - control.decrease_tol {
                trace.push(ll);
                return Err(Error::Algorithm {
                    message: format!("EM log-likelihood decreased from {last} to {ll} at iteration {iteration}"),
                    trace,
                });
            }
        }
        let converged = trace.last().is_some_and(|&last| (ll - last).abs() < control.tol);
        trace.push(ll);
        if converged {
            let loglik = super::pseudo_log_likelihood(frailty, &theta, zeta.as_ref(), surface, &hazard)?;
            return Ok(FittedModel {
                frailty: *frailty,
                baseline: theta,
                background: zeta,
                hazard_table: hazard,
                mode: ModelMode::CohortAdditive,
                loglik,
                loglik_offset: saturated_offset(surface),
                trace: trace.into_iter().enumerate().collect(),
                iterations: iteration,
                floored_cells,
            });
        }

        let zero;
        let g_or_zero = match g.as_ref() {
            Some(g) => g,
            None => {
                zero = Grid::filled(window, 0.0);
                &zero
            }
        };
        let (d_base, d_back) = split_deaths(d, &lam_f, g_or_zero);
        let adjusted = Grid::from_fn(window, |t, x| c.at(t, x) * e.at(t, x));
        theta = fit_weighted_poisson(baseline_model, &d_base, &adjusted, &control.fit)?.params;
        if let Some(model) = background_model {
            zeta = Some(fit_weighted_poisson(model, &d_back, e, &control.fit)?.params);
        }
    }
    Err(Error::NonConvergence { iterations: control.max_iterations, context: "EM algorithm".into(), trace })
}

/// Additive fit with the frailty either fixed or chosen by profiling the EM fit.
pub fn em_fit_additive(
    choice: &FrailtyChoice,
    surface: &MortalitySurface,
    baseline_model: BaselineModel,
    background_model: Option<BaselineModel>,
    control: &EmControl,
) -> Result<ProfileFit> {
    let (family, search) = match choice {
        FrailtyChoice::Fixed(spec) => {
            let fitted = em_fit_additive_fixed(spec, surface, baseline_model, background_model, control)?;
            return Ok(ProfileFit { fitted, evaluations: Vec::new() });
        }
        FrailtyChoice::Profile { family, search } => (*family, search),
    };
    let mut evaluations = Vec::new();
    let mut objective = |alpha: f64, sigma2: f64| -> Option<f64> {
        let v = spec_for(family, alpha, sigma2)
            .and_then(|spec| em_fit_additive_fixed(&spec, surface, baseline_model, background_model, control))
            .ok()
            .and_then(|fit| fit.trace.last().map(|p| p.1));
        evaluations.push(ProfilePoint { alpha, sigma2, loglik: v.unwrap_or(f64::NAN) });
        v
    };
    let (alpha, sigma2) = match family {
        FrailtyFamily::Degenerate => (0.0, 0.0),
        FrailtyFamily::Gamma | FrailtyFamily::InverseGaussian => (0.0, search_sigma2(|s| objective(0.0, s), search)?),
        FrailtyFamily::Stable => {
            let (a0, s0) = search.stable_start;
            let res = nelder_mead_max(
                |p| objective(p[0].clamp(0.0, 1.0 - 1e-6), p[1].exp()),
                &[a0, s0.ln()],
                &[0.1, 0.5],
                search.simplex_tol,
                search.max_simplex_iterations,
            );
            if !res.converged {
                return Err(Error::NonConvergence {
                    iterations: res.iterations,
                    context: "stable profile over EM fits".into(),
                    trace: res.trace,
                });
            }
            (res.x[0].clamp(0.0, 1.0 - 1e-6), res.x[1].exp())
        }
    };
    let spec = spec_for(family, alpha, sigma2)?;
    let fitted = em_fit_additive_fixed(&spec, surface, baseline_model, background_model, control)?;
    Ok(ProfileFit { fitted, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexis::LexisWindow;

    #[test]
    fn true_parameters_are_a_fixed_point() {
        let w = LexisWindow::new(2000, 2002, 30, 34).unwrap();
        let e = Grid::filled(w, 1e5);
        let d = e.map(|v| 0.03 * v);
        let (base, back) = split_deaths(&d, &Grid::filled(w, 0.02), &Grid::filled(w, 0.01));
        for (t, x, b) in base.iter() {
            assert!((b / back.at(t, x) - 2.0).abs() < 1e-12);
        }
        let f = fit_weighted_poisson(BaselineModel::ConstantPerYear, &base, &e, &FitControl::default()).unwrap();
        let g = fit_weighted_poisson(BaselineModel::ConstantPerYear, &back, &e, &FitControl::default()).unwrap();
        assert!((f.params.eval(2001, 32).unwrap() - 0.02).abs() < 1e-15);
        assert!((g.params.eval(2001, 32).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn total_rate_is_fitted_with_two_constant_risks() {
        let w = LexisWindow::new(2000, 2002, 30, 34).unwrap();
        let e = Grid::filled(w, 1e5);
        let surface = MortalitySurface::new(e.map(|v| 0.03 * v), e.clone()).unwrap();
        let fit = em_fit_additive_fixed(
            &FrailtySpec::Degenerate,
            &surface,
            BaselineModel::ConstantPerYear,
            Some(BaselineModel::ConstantPerYear),
            &EmControl::default(),
        )
        .unwrap();
        for (_, _, m) in fit.fitted_rates().unwrap().iter() {
            assert!((m - 0.03).abs() < 1e-10);
        }
        for pair in fit.trace.windows(2) {
            assert!(pair[1].1 >= pair[0].1 - 1e-8);
        }
    }
}
