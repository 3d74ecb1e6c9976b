#![allow(dead_code)]

use frailty_core::baseline::BaselineParams;
use frailty_core::data::{simulate_surface, MortalitySurface};
use frailty_core::{FrailtySpec, Grid, LexisWindow};

pub const YEARS: (i32, i32) = (1980, 2009);
pub const AGES: (i32, i32) = (20, 99);

pub fn desk_window() -> LexisWindow {
    LexisWindow::new(YEARS.0, YEARS.1, AGES.0, AGES.1).unwrap()
}

/// Gompertz baseline with level improving by 1.5% a year.
pub fn improving_gompertz(w: LexisWindow) -> BaselineParams {
    let n = w.n_years();
    BaselineParams::gompertz(
        w,
        (0..n).map(|i| -10.5 - 0.015 * i as f64).collect(),
        (0..n).map(|i| 0.095 + 0.0001 * i as f64).collect(),
    )
    .unwrap()
}

pub fn constant_background(w: LexisWindow, rate: f64) -> BaselineParams {
    BaselineParams::constant(w, vec![rate.ln(); w.n_years()]).unwrap()
}

pub fn simulate(
    frailty: &FrailtySpec,
    f: &BaselineParams,
    g: Option<&BaselineParams>,
    exposure: f64,
    seed: u64,
) -> MortalitySurface {
    simulate_surface(frailty, f, g, *f.window(), exposure, seed).unwrap()
}

/// Noise-free data that satisfy the Gamma pseudo-model exactly:
/// `D = exp(-s2 H(D)) F E` with `H` the cohort sum of `D / E`.
pub fn exact_pseudo_gamma(sigma2: f64, f: &BaselineParams, exposure: f64) -> MortalitySurface {
    let w = *f.window();
    let mut m = Grid::filled(w, 0.0);
    let mut h = Grid::filled(w, 0.0);
    for t in w.years() {
        for x in w.ages() {
            let hv = if x == w.x_min {
                0.0
            } else if t == w.t_min {
                (w.x_min..x).map(|u| m.at(w.t_min, u)).sum()
            } else {
                h.at(t - 1, x - 1) + m.at(t - 1, x - 1)
            };
            h.set(t, x, hv);
            m.set(t, x, (-sigma2 * hv).exp() * f.eval(t, x).unwrap());
        }
    }
    MortalitySurface::new(m.map(|v| v * exposure), Grid::filled(w, exposure)).unwrap()
}

/// Lee-Carter parameters with a strong downward trend in `k`.
pub fn lc_truth(w: LexisWindow) -> BaselineParams {
    let na = w.n_ages();
    let ny = w.n_years();
    let a: Vec<f64> = (0..na).map(|j| -9.0 + 0.085 * (w.x_min as f64 + j as f64)).collect();
    let raw: Vec<f64> = (0..na).map(|j| 1.5 - j as f64 / na as f64).collect();
    let total: f64 = raw.iter().sum();
    let b: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let k: Vec<f64> =
        (0..ny).map(|i| 50.0 - 100.0 * i as f64 / (ny - 1) as f64 + 3.0 * (i as f64 * 1.3).sin()).collect();
    let mean = k.iter().sum::<f64>() / ny as f64;
    BaselineParams::lee_carter(w, a, b, k.iter().map(|v| v - mean).collect()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
