use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::MortalitySurface;
use crate::baseline::BaselineParams;
use crate::error::{Error, Result};
use crate::frailty::FrailtySpec;
use crate::lexis::{Grid, LexisWindow};

/// Model intensities `nu'(I) F (+ G)` on `window`.
///
/// `I` sums the baseline along cohort diagonals, starting from zero at
/// `x_min`; years before `t_min` use the first-year baseline.
pub fn expected_rates(
    frailty: &FrailtySpec,
    baseline: &BaselineParams,
    background: Option<&BaselineParams>,
    window: LexisWindow,
) -> Result<Grid> {
    frailty.validate()?;
    let f = Grid::try_from_fn(window, |t, x| baseline.eval(t, x))?;
    let g = background.map(|bg| Grid::try_from_fn(window, |t, x| bg.eval(t, x))).transpose()?;

    let mut integrated = Grid::filled(window, 0.0);
    let mut acc = 0.0;
    for x in window.x_min + 1..=window.x_max {
        acc += f.at(window.t_min, x - 1);
        integrated.set(window.t_min, x, acc);
    }
    for t in window.t_min + 1..=window.t_max {
        for x in window.x_min + 1..=window.x_max {
            integrated.set(t, x, integrated.at(t - 1, x - 1) + f.at(t - 1, x - 1));
        }
    }
    Grid::try_from_fn(window, |t, x| {
        let mu = frailty.nu_prime(integrated.at(t, x))? * f.at(t, x);
        Ok(match &g {
            Some(g) => mu + g.at(t, x),
            None => mu,
        })
    })
}

/// Draws a Poisson surface with constant exposure from the model.
///
/// Cells are drawn year by year, ages ascending, from a ChaCha8 stream seeded
/// with `seed`.
pub fn simulate_surface(
    frailty: &FrailtySpec,
    baseline: &BaselineParams,
    background: Option<&BaselineParams>,
    window: LexisWindow,
    exposure_level: f64,
    seed: u64,
) -> Result<MortalitySurface> {
    if !(exposure_level > 0.0 && exposure_level.is_finite()) {
        return Err(Error::ParameterDomain(format!("exposure level {exposure_level} must be positive")));
    }
    let mu = expected_rates(frailty, baseline, background, window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deaths = Grid::filled(window, 0.0);
    for (t, x, m) in mu.iter() {
        let lambda = m * exposure_level;
        if !lambda.is_finite() || lambda > 1e15 {
            return Err(Error::Overflow(format!("expected deaths {lambda} at (t={t}, x={x})")));
        }
        if lambda > 0.0 {
            let dist = Poisson::new(lambda).map_err(|e| Error::Evaluation(e.to_string()))?;
            deaths.set(t, x, dist.sample(&mut rng));
        }
    }
    MortalitySurface::new(deaths, Grid::filled(window, exposure_level))
}
