use super::profile::{search_sigma2, spec_for, SearchConfig};
use super::{adjustment_factors, centered_log_likelihood, fit_against_table, hazard_for, FittedModel, ModelMode};
use crate::baseline::BaselineModel;
use crate::data::{CumulativeHazardTable, MortalitySurface};
use crate::error::{Error, Result};
use crate::frailty::{FrailtyFamily, FrailtySpec};
use crate::lexis::Grid;
use crate::numeric::CompensatedSum;
use crate::optim::nelder_mead_max;

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingControl {
    /// Stop when a full round changes the log-likelihood by less than this.
    pub tol: f64,
    /// A decrease larger than this is reported as an algorithm error.
    pub decrease_tol: f64,
    pub max_iterations: usize,
    pub search: SearchConfig,
}

impl Default for SwitchingControl {
    fn default() -> Self {
        Self { tol: 1e-8, decrease_tol: 1e-6, max_iterations: 1000, search: SearchConfig::default() }
    }
}

/// `(l, dl, d2l)` of `l(s) = sum {-s D H - exp(-s H) F E}` at `s = sigma2`.
///
/// `fe` holds the baseline expected counts `F E`; cells with `E = 0` are skipped.
pub fn gamma_sigma2_derivatives(surface: &MortalitySurface, hazard: &Grid, fe: &Grid, sigma2: f64) -> (f64, f64, f64) {
    let mut l = CompensatedSum::default();
    let mut dl = CompensatedSum::default();
    let mut d2l = CompensatedSum::default();
    let e = surface.exposures();
    for (t, x, d) in surface.deaths().iter() {
        if e.at(t, x) <= 0.0 {
            continue;
        }
        let h = hazard.at(t, x);
        let w = (-sigma2 * h).exp() * fe.at(t, x);
        l.add(-sigma2 * d * h - w);
        dl.add(-d * h + h * w);
        d2l.add(-h * h * w);
    }
    (l.value(), dl.value(), d2l.value())
}

/// Maximizer over `sigma2 >= 0` of the Gamma pseudo-likelihood at fixed baseline.
///
/// The score is convex and decreasing in `sigma2`, so Newton iterates started
/// at zero increase monotonically to the root. Returns zero when the score at
/// zero is not positive.
pub fn gamma_sigma2_step(surface: &MortalitySurface, hazard: &Grid, fe: &Grid) -> Result<f64> {
    surface.deaths().same_window(hazard)?;
    surface.deaths().same_window(fe)?;
    let mut s = 0.0;
    let (_, g0, _) = gamma_sigma2_derivatives(surface, hazard, fe, 0.0);
    if !(g0 > 0.0) {
        return Ok(0.0);
    }
    for _ in 0..500 {
        let (_, g, h) = gamma_sigma2_derivatives(surface, hazard, fe, s);
        if !(h < 0.0) {
            break;
        }
        let next = s - g / h;
        if !(next > s) || next - s <= 4.0 * f64::EPSILON * next {
            return Ok(next.max(s));
        }
        s = next;
    }
    Ok(s)
}

fn centered_at_fixed_baseline(
    spec: &FrailtySpec,
    surface: &MortalitySurface,
    hazard: &CumulativeHazardTable,
    f: &Grid,
) -> Result<f64> {
    let c = adjustment_factors(spec, hazard)?;
    let mu = Grid::from_fn(*f.window(), |t, x| c.at(t, x) * f.at(t, x));
    centered_log_likelihood(surface, &mu)
}

/// Alternates a baseline fit at fixed frailty with a frailty update at fixed baseline.
pub fn switching_fit(
    family: FrailtyFamily,
    surface: &MortalitySurface,
    mode: ModelMode,
    model: BaselineModel,
    start: FrailtySpec,
    control: &SwitchingControl,
) -> Result<FittedModel> {
    if mode == ModelMode::CohortAdditive {
        return Err(Error::Unsupported("switching algorithm for additive models".into()));
    }
    if start.family() != family && start != FrailtySpec::Degenerate {
        return Err(Error::ParameterDomain(format!("start value {start} is not in the {} family", family.name())));
    }
    let hazard = hazard_for(surface, mode)?;
    let (h_floor, _) = hazard.floored();
    let fitc = &control.search.fit;
    let mut spec = start;
    let mut trace: Vec<f64> = Vec::new();
    let mut previous_round = f64::NEG_INFINITY;

    let check = |trace: &Vec<f64>, value: f64| -> Result<()> {
        if let Some(&last) = trace.last() {
            if value < last - control.decrease_tol {
                let mut t = trace.clone();
                t.push(value);
                return Err(Error::Algorithm {
                    message: format!("log-likelihood decreased from {last} to {value}"),
                    trace: t,
                });
            }
        }
        Ok(())
    };

    for round in 1..=control.max_iterations {
        let fit = fit_against_table(&spec, surface, &hazard, mode, model, fitc)?;
        let ll_fit = fit.trace.last().map(|p| p.1).unwrap_or(f64::NAN);
        check(&trace, ll_fit)?;
        trace.push(ll_fit);
        if (ll_fit - previous_round).abs() < control.tol || family == FrailtyFamily::Degenerate {
            let mut out = fit;
            out.trace = trace.into_iter().enumerate().collect();
            out.iterations = round;
            return Ok(out);
        }
        previous_round = ll_fit;

        let f = fit.baseline.grid();
        let candidate = match family {
            FrailtyFamily::Gamma => {
                let fe = Grid::from_fn(*f.window(), |t, x| f.at(t, x) * surface.exposures().at(t, x));
                let s = gamma_sigma2_step(surface, &h_floor, &fe)?;
                spec_for(family, 0.0, s)?
            }
            FrailtyFamily::InverseGaussian => {
                let s = search_sigma2(
                    |s2| {
                        spec_for(family, 0.0, s2)
                            .and_then(|sp| centered_at_fixed_baseline(&sp, surface, &hazard, &f))
                            .ok()
                    },
                    &control.search,
                )?;
                spec_for(family, 0.0, s)?
            }
            FrailtyFamily::Stable => {
                let (a0, s0) = match spec {
                    FrailtySpec::Stable { alpha, sigma2 } => (alpha, sigma2),
                    _ => control.search.stable_start,
                };
                let res = nelder_mead_max(
                    |p| {
                        spec_for(family, p[0].clamp(0.0, 1.0 - 1e-6), p[1].exp())
                            .and_then(|sp| centered_at_fixed_baseline(&sp, surface, &hazard, &f))
                            .ok()
                    },
                    &[a0, s0.ln()],
                    &[0.05, 0.25],
                    control.search.simplex_tol,
                    control.search.max_simplex_iterations,
                );
                spec_for(family, res.x[0].clamp(0.0, 1.0 - 1e-6), res.x[1].exp())?
            }
            FrailtyFamily::Degenerate => unreachable!(),
        };
        let current = centered_at_fixed_baseline(&spec, surface, &hazard, &f)?;
        let updated = centered_at_fixed_baseline(&candidate, surface, &hazard, &f)?;
        // a numeric search that lands below the current point keeps the current frailty
        let (next, value) = if updated >= current { (candidate, updated) } else { (spec, current) };
        check(&trace, value)?;
        trace.push(value);
        spec = next;
    }
    Err(Error::NonConvergence { iterations: control.max_iterations, context: "switching algorithm".into(), trace })
}
