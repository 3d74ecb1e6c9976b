use super::{lee_carter, BaselineModel, BaselineParams};
use crate::error::{Error, Result};
use crate::lexis::{Grid, LexisWindow};
use crate::numeric::{compensated_sum, poisson_term, poisson_term_centered};

/// Stopping rules shared by the Newton-type fitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitControl {
    pub max_iterations: usize,
    /// Relative change of the log-likelihood between iterations.
    pub rel_tol: f64,
    /// Sup-norm of the analytic score.
    pub grad_tol: f64,
    pub max_halvings: usize,
}

impl Default for FitControl {
    fn default() -> Self {
        Self { max_iterations: 10_000, rel_tol: 1e-10, grad_tol: 1e-8, max_halvings: 50 }
    }
}

/// Result of a weighted Poisson fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonFit {
    pub params: BaselineParams,
    /// `sum D log mu - mu E` at the optimum.
    pub loglik: f64,
    /// Log-likelihood relative to the saturated model, per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the score at the returned parameters.
    pub gradient_norm: f64,
}

/// Poisson maximum likelihood for `D ~ Poisson(F * E_adj)`.
///
/// `exposures` plays the role of the adjusted exposure; cells with zero
/// exposure are skipped.
pub fn fit_weighted_poisson(
    model: BaselineModel,
    deaths: &Grid,
    exposures: &Grid,
    control: &FitControl,
) -> Result<PoissonFit> {
    deaths.same_window(exposures)?;
    let window = *deaths.window();
    for (t, x, e) in exposures.iter() {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::Cleaning { t, x, message: format!("invalid exposure {e}") });
        }
        let d = deaths.at(t, x);
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::Cleaning { t, x, message: format!("invalid death count {d}") });
        }
        if e == 0.0 && d > 0.0 {
            return Err(Error::Cleaning { t, x, message: "deaths with zero exposure".into() });
        }
    }
    let fit = match model {
        BaselineModel::GompertzPerYear | BaselineModel::ConstantPerYear => {
            fit_per_year(model, deaths, exposures, &window, control)?
        }
        BaselineModel::LeeCarter => lee_carter::fit(deaths, exposures, control)?,
    };
    Ok(fit)
}

/// Raw Poisson log-likelihood of a parameter set.
pub(crate) fn loglik_raw(params: &BaselineParams, deaths: &Grid, exposures: &Grid) -> f64 {
    compensated_sum(deaths.iter().filter_map(|(t, x, d)| {
        let e = exposures.at(t, x);
        (e > 0.0).then(|| {
            let mu = params.eval(t, x).expect("cell in window");
            poisson_term(d, mu, e).unwrap_or(f64::NEG_INFINITY)
        })
    }))
}

/// Newton decrement below which the log-likelihood change is lost in rounding.
pub(crate) const NEWTON_DECREMENT_FLOOR: f64 = 1e-10;

/// Consecutive iterations without progress that count as convergence.
pub(crate) const STAGNATION_STEPS: usize = 3;

struct YearFit {
    level: f64,
    slope: f64,
    trace: Vec<f64>,
    gradient: f64,
}

fn fit_per_year(
    model: BaselineModel,
    deaths: &Grid,
    exposures: &Grid,
    window: &LexisWindow,
    control: &FitControl,
) -> Result<PoissonFit> {
    let ages: Vec<f64> = window.ages().map(|x| x as f64).collect();
    let years: Vec<i32> = window.years().collect();
    let solve = |t: &i32| -> Result<YearFit> {
        let d = deaths.year_slice(*t);
        let e = exposures.year_slice(*t);
        match model {
            BaselineModel::GompertzPerYear => gompertz_year(*t, &ages, d, e, control),
            _ => constant_year(*t, d, e),
        }
    };
    #[cfg(feature = "parallel")]
    let fits: Vec<Result<YearFit>> = {
        use rayon::prelude::*;
        years.par_iter().map(solve).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fits: Vec<Result<YearFit>> = years.iter().map(solve).collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;

    let iterations = fits.iter().map(|f| f.trace.len()).max().unwrap_or(0);
    let trace = (0..iterations)
        .map(|i| compensated_sum(fits.iter().map(|f| *f.trace.get(i).unwrap_or(f.trace.last().unwrap()))))
        .collect();
    let gradient_norm = fits.iter().map(|f| f.gradient).fold(0.0, f64::max);
    let level: Vec<f64> = fits.iter().map(|f| f.level).collect();
    let params = match model {
        BaselineModel::GompertzPerYear => {
            BaselineParams::gompertz(*window, level, fits.iter().map(|f| f.slope).collect())?
        }
        _ => BaselineParams::constant(*window, level)?,
    };
    let loglik = loglik_raw(&params, deaths, exposures);
    Ok(PoissonFit { params, loglik, trace, iterations, gradient_norm })
}

fn constant_year(t: i32, d: &[f64], e: &[f64]) -> Result<YearFit> {
    let dsum = compensated_sum(d.iter().copied());
    let esum = compensated_sum(e.iter().copied());
    if dsum <= 0.0 || esum <= 0.0 {
        return Err(Error::Unidentifiable { year: t, message: "no deaths or no exposure".into() });
    }
    // the Newton fixed point of the one-parameter score is available in closed form
    let level = (dsum / esum).ln();
    let mu = level.exp();
    let ll = compensated_sum(
        d.iter().zip(e).filter(|(_, &e)| e > 0.0).map(|(&d, &e)| poisson_term_centered(d, mu, e).unwrap()),
    );
    let gradient = (dsum - mu * esum).abs();
    Ok(YearFit { level, slope: 0.0, trace: vec![ll], gradient })
}

fn gompertz_year(t: i32, ages: &[f64], d: &[f64], e: &[f64], control: &FitControl) -> Result<YearFit> {
    let cells: Vec<(f64, f64, f64)> =
        ages.iter().zip(d.iter().zip(e)).filter(|(_, (_, &e))| e > 0.0).map(|(&x, (&d, &e))| (x, d, e)).collect();
    if cells.len() < 2 {
        return Err(Error::Unidentifiable { year: t, message: "fewer than two ages with exposure".into() });
    }
    let dsum: f64 = cells.iter().map(|c| c.1).sum();
    if dsum <= 0.0 {
        return Err(Error::Unidentifiable { year: t, message: "no deaths recorded".into() });
    }
    let xbar = cells.iter().map(|c| c.0).sum::<f64>() / cells.len() as f64;

    // weighted least squares on log rates as a starting point
    let mut beta = {
        let pts: Vec<(f64, f64, f64)> =
            cells.iter().map(|&(x, d, e)| (x - xbar, ((d + 0.5) / e).ln(), d + 0.5)).collect();
        let sw: f64 = pts.iter().map(|p| p.2).sum();
        let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
        let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        [my - slope * mx, slope]
    };

    let loglik = |b: &[f64; 2]| -> f64 {
        compensated_sum(cells.iter().map(|&(x, d, e)| {
            let mu = (b[0] + b[1] * (x - xbar)).exp();
            poisson_term_centered(d, mu, e).unwrap_or(f64::NEG_INFINITY)
        }))
    };
    // score and information in the centred parametrisation
    let derivs = |b: &[f64; 2]| {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, d, e) in &cells {
            let xc = x - xbar;
            let w = (b[0] + b[1] * xc).exp() * e;
            let r = d - w;
            g0 += r;
            g1 += xc * r;
            h00 += w;
            h01 += w * xc;
            h11 += w * xc * xc;
        }
        ([g0, g1], [h00, h01, h11])
    };
    // score with respect to (theta1, theta2) = (b0 - b1*xbar, b1)
    let original_grad = |g: &[f64; 2]| g[0].abs().max((g[1] + xbar * g[0]).abs());

    let mut ll = loglik(&beta);
    let mut trace = vec![ll];
    let mut best_gradient = f64::INFINITY;
    let mut quiet = 0;
    for _ in 0..control.max_iterations {
        let (g, h) = derivs(&beta);
        let det = h[0] * h[2] - h[1] * h[1];
        if !(det > 0.0) {
            return Err(Error::Unidentifiable { year: t, message: "singular information matrix".into() });
        }
        let step = [(h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det];
        let decrement = g[0] * step[0] + g[1] * step[1];
        let (cand, lc) = if decrement <= NEWTON_DECREMENT_FLOOR {
            // inside the quadratic region the likelihood gain is below rounding,
            // so the full step is taken without a line search
            let cand = [beta[0] + step[0], beta[1] + step[1]];
            (cand, loglik(&cand))
        } else {
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=control.max_halvings {
                let cand = [beta[0] + scale * step[0], beta[1] + scale * step[1]];
                let lc = loglik(&cand);
                if lc >= ll {
                    accepted = Some((cand, lc));
                    break;
                }
                scale *= 0.5;
            }
            match accepted {
                Some(a) => a,
                None => return Ok(finish(beta, xbar, trace, original_grad(&g))),
            }
        };
        let at_resolution = step.iter().zip(beta.iter()).all(|(s, b)| s.abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        let rel = (lc - ll).abs() / ll.abs().max(1.0);
        beta = cand;
        ll = lc;
        trace.push(ll);
        let (g_new, _) = derivs(&beta);
        let gradient = original_grad(&g_new);
        if gradient < best_gradient {
            best_gradient = gradient;
            quiet = 0;
        } else {
            quiet += 1;
        }
        if (rel < control.rel_tol && gradient < control.grad_tol) || at_resolution || quiet >= STAGNATION_STEPS {
            return Ok(finish(beta, xbar, trace, gradient));
        }
    }
    Err(Error::NonConvergence {
        iterations: control.max_iterations,
        context: format!("Gompertz fit for year {t}"),
        trace,
    })
}

fn finish(beta: [f64; 2], xbar: f64, trace: Vec<f64>, gradient: f64) -> YearFit {
    YearFit { level: beta[0] - beta[1] * xbar, slope: beta[1], trace, gradient }
}
