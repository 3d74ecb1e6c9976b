//! wasm-bindgen exports for the static demo in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function so the numbers can
//! be checked natively.

use frailty_core::baseline::FitControl;
use frailty_core::data::simulate_surface;
use frailty_core::estimation::{fit_fixed_frailty, profile_grid, ModelMode};
use frailty_core::forecast::{forecast, ForecastOptions};
use frailty_core::{BaselineModel, BaselineParams, FrailtyFamily, FrailtySpec, LexisWindow};
use wasm_bindgen::prelude::*;

fn spec(family: &str, sigma2: f64, alpha: f64) -> Result<FrailtySpec, String> {
    let family = FrailtyFamily::parse(family).ok_or_else(|| format!("unknown frailty family '{family}'"))?;
    family.with_params(sigma2, alpha).map_err(|e| e.to_string())
}

/// Improving Gompertz surface the demo fits and forecasts.
fn demo_baseline(w: LexisWindow) -> BaselineParams {
    let n = w.n_years();
    BaselineParams::gompertz(
        w,
        (0..n).map(|i| -10.5 - 0.015 * i as f64).collect(),
        (0..n).map(|i| 0.095 + 0.0001 * i as f64).collect(),
    )
    .expect("valid demo parameters")
}

/// `nu'(nu^{-1}(h))` at `n` evenly spaced points on `[0, h_max]`.
pub fn mean_frailty(family: &str, sigma2: f64, alpha: f64, h_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let spec = spec(family, sigma2, alpha)?;
    if n < 2 || !(h_max > 0.0) {
        return Err("need at least two points and a positive range".into());
    }
    (0..n).map(|i| spec.mean_frailty_from_h(h_max * i as f64 / (n - 1) as f64).map_err(|e| e.to_string())).collect()
}

/// Gamma profile log-likelihood over `sigma2_grid` for data simulated with `true_sigma2`.
pub fn profile(true_sigma2: f64, exposure: f64, seed: u64, sigma2_grid: &[f64]) -> Result<Vec<f64>, String> {
    let w = LexisWindow::new(1990, 2004, 40, 89).map_err(|e| e.to_string())?;
    let truth = spec("gamma", true_sigma2, 0.0)?;
    let s = simulate_surface(&truth, &demo_baseline(w), None, w, exposure, seed).map_err(|e| e.to_string())?;
    let points = profile_grid(
        FrailtyFamily::Gamma,
        &s,
        ModelMode::CohortMultiplicative,
        BaselineModel::GompertzPerYear,
        &[0.0],
        sigma2_grid,
        &FitControl::default(),
    )
    .map_err(|e| e.to_string())?;
    Ok(points.iter().map(|p| p.loglik).collect())
}

/// `(years, e_age)` from a Gamma(`sigma2`) fit to a fixed simulated surface.
pub fn life_expectancy(sigma2: f64, horizon: usize, age: i32) -> Result<(Vec<f64>, Vec<f64>), String> {
    let w = LexisWindow::new(1980, 2009, 40, 95).map_err(|e| e.to_string())?;
    let truth = spec("gamma", 0.3, 0.0)?;
    let s = simulate_surface(&truth, &demo_baseline(w), None, w, 1e6, 2024).map_err(|e| e.to_string())?;
    let fitted = fit_fixed_frailty(
        &spec("gamma", sigma2, 0.0)?,
        &s,
        ModelMode::CohortMultiplicative,
        BaselineModel::GompertzPerYear,
    )
    .map_err(|e| e.to_string())?;
    let opts = ForecastOptions { life_expectancy_age: age, ..ForecastOptions::default() };
    let res = forecast(&fitted, horizon, &opts).map_err(|e| e.to_string())?;
    let e = res.life_expectancy.ok_or("age range too short for life expectancy")?;
    Ok(e.iter().map(|p| (p.0 as f64, p.1)).unzip())
}

#[wasm_bindgen(js_name = meanFrailtyCurve)]
pub fn mean_frailty_curve(family: &str, sigma2: f64, alpha: f64, h_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    mean_frailty(family, sigma2, alpha, h_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = profileCurve)]
pub fn profile_curve(true_sigma2: f64, exposure: f64, seed: u32, sigma2_grid: Vec<f64>) -> Result<Vec<f64>, JsError> {
    profile(true_sigma2, exposure, seed as u64, &sigma2_grid).map_err(|e| JsError::new(&e))
}

/// Years followed by values: `[t_1..t_n, e_1..e_n]`.
#[wasm_bindgen(js_name = lifeExpectancyForecast)]
pub fn life_expectancy_forecast(sigma2: f64, horizon: usize, age: i32) -> Result<Vec<f64>, JsError> {
    let (mut t, e) = life_expectancy(sigma2, horizon, age).map_err(|e| JsError::new(&e))?;
    t.extend(e);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_frailty_starts_at_one_and_falls() {
        let c = mean_frailty("gamma", 0.5, 0.0, 4.0, 5).unwrap();
        assert_eq!(c[0], 1.0);
        assert!((c[4] - (-2.0f64).exp()).abs() < 1e-15);
        assert!(c.windows(2).all(|p| p[1] < p[0]));
        assert!(mean_frailty("none", 0.0, 0.0, 1.0, 3).unwrap().iter().all(|v| *v == 1.0));
        assert!(mean_frailty("lognormal", 0.5, 0.0, 1.0, 3).is_err());
        assert!(mean_frailty("stable", 0.5, 1.5, 1.0, 3).is_err());
    }

    #[test]
    fn profile_peaks_near_the_truth() {
        let grid: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
        let ll = profile(0.5, 1e6, 3, &grid).unwrap();
        let best = (0..ll.len()).max_by(|&a, &b| ll[a].total_cmp(&ll[b])).unwrap();
        assert!((grid[best] - 0.5).abs() <= 0.1 + 1e-12, "peak at {}", grid[best]);
    }

    #[test]
    fn zero_variance_is_the_plain_fit() {
        let (t, plain) = life_expectancy(0.0, 20, 60).unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t[0], 2010.0);
        let w = LexisWindow::new(1980, 2009, 40, 95).unwrap();
        let s = simulate_surface(&FrailtySpec::gamma(0.3).unwrap(), &demo_baseline(w), None, w, 1e6, 2024).unwrap();
        let fit = fit_fixed_frailty(
            &FrailtySpec::Degenerate,
            &s,
            ModelMode::CohortMultiplicative,
            BaselineModel::GompertzPerYear,
        )
        .unwrap();
        let direct = forecast(&fit, 20, &ForecastOptions::default()).unwrap().life_expectancy.unwrap();
        assert!(direct.iter().zip(&plain).all(|(d, p)| d.1 == *p));

        let (_, frail) = life_expectancy(0.3, 20, 60).unwrap();
        assert!(frail.windows(2).all(|p| p[1] > p[0]));
        assert!(frail.iter().zip(&plain).all(|(f, p)| f != p));
    }
}
