//! Poisson Lee-Carter fit by cyclic Newton updates.

use super::poisson::{loglik_raw, FitControl, PoissonFit, NEWTON_DECREMENT_FLOOR, STAGNATION_STEPS};
use super::BaselineParams;
use crate::error::{Error, Result};
use crate::lexis::Grid;
use crate::numeric::{compensated_sum, poisson_term_centered};

struct Data {
    ny: usize,
    na: usize,
    d: Vec<f64>,
    e: Vec<f64>,
}

impl Data {
    fn cell(&self, i: usize, j: usize) -> (f64, f64) {
        (self.d[i * self.na + j], self.e[i * self.na + j])
    }
}

fn loglik(data: &Data, a: &[f64], b: &[f64], k: &[f64]) -> f64 {
    let mut terms = Vec::with_capacity(data.ny * data.na);
    for i in 0..data.ny {
        terms.push(year_loglik(data, a, b, k[i], i));
    }
    compensated_sum(terms)
}

fn year_loglik(data: &Data, a: &[f64], b: &[f64], k: f64, i: usize) -> f64 {
    compensated_sum((0..data.na).filter_map(|j| {
        let (d, e) = data.cell(i, j);
        (e > 0.0).then(|| poisson_term_centered(d, (a[j] + b[j] * k).exp(), e).unwrap_or(f64::NEG_INFINITY))
    }))
}

fn age_loglik(data: &Data, a: f64, b: f64, k: &[f64], j: usize) -> f64 {
    compensated_sum((0..data.ny).filter_map(|i| {
        let (d, e) = data.cell(i, j);
        (e > 0.0).then(|| poisson_term_centered(d, (a + b * k[i]).exp(), e).unwrap_or(f64::NEG_INFINITY))
    }))
}

fn update_a(data: &Data, a: &mut [f64], b: &[f64], k: &[f64]) {
    for j in 0..data.na {
        let mut dsum = 0.0;
        let mut w = 0.0;
        for i in 0..data.ny {
            let (d, e) = data.cell(i, j);
            dsum += d;
            w += e * (b[j] * k[i]).exp();
        }
        a[j] = (dsum / w).ln();
    }
}

fn newton_1d(
    current: f64,
    grad_hess: impl Fn(f64) -> (f64, f64),
    objective: impl Fn(f64) -> f64,
    max_halvings: usize,
) -> f64 {
    let (g, h) = grad_hess(current);
    if !(h > 0.0) || g == 0.0 {
        return current;
    }
    let base = objective(current);
    let step = g / h;
    if g * step <= NEWTON_DECREMENT_FLOOR {
        return current + step;
    }
    let mut scale = 1.0;
    for _ in 0..=max_halvings {
        let cand = current + scale * step;
        if objective(cand) >= base {
            return cand;
        }
        scale *= 0.5;
    }
    current
}

fn scores(data: &Data, a: &[f64], b: &[f64], k: &[f64]) -> f64 {
    let mut ga = vec![0.0; data.na];
    let mut gb = vec![0.0; data.na];
    let mut gk = vec![0.0; data.ny];
    for i in 0..data.ny {
        for j in 0..data.na {
            let (d, e) = data.cell(i, j);
            if e == 0.0 {
                continue;
            }
            let r = d - (a[j] + b[j] * k[i]).exp() * e;
            ga[j] += r;
            gb[j] += r * k[i];
            gk[i] += r * b[j];
        }
    }
    ga.iter().chain(&gb).chain(&gk).fold(0.0, |m, v| m.max(v.abs()))
}

fn normalize(a: &mut [f64], b: &mut [f64], k: &mut [f64]) {
    let kbar = k.iter().sum::<f64>() / k.len() as f64;
    for (aj, bj) in a.iter_mut().zip(b.iter()) {
        *aj += bj * kbar;
    }
    for ki in k.iter_mut() {
        *ki -= kbar;
    }
    let s: f64 = b.iter().sum();
    if s != 0.0 && s.is_finite() {
        for bj in b.iter_mut() {
            *bj /= s;
        }
        for ki in k.iter_mut() {
            *ki *= s;
        }
    }
}

pub(super) fn fit(deaths: &Grid, exposures: &Grid, control: &FitControl) -> Result<PoissonFit> {
    let window = *deaths.window();
    let data =
        Data { ny: window.n_years(), na: window.n_ages(), d: deaths.values().to_vec(), e: exposures.values().to_vec() };
    for (i, t) in window.years().enumerate() {
        if (0..data.na).map(|j| data.cell(i, j).0).sum::<f64>() <= 0.0 {
            return Err(Error::Unidentifiable { year: t, message: "no deaths recorded".into() });
        }
    }
    for (j, x) in window.ages().enumerate() {
        if (0..data.ny).map(|i| data.cell(i, j).0).sum::<f64>() <= 0.0 {
            return Err(Error::Unidentifiable {
                year: window.t_min,
                message: format!("age {x} has no deaths in any year"),
            });
        }
    }

    let (ny, na) = (data.ny, data.na);
    let mut a = vec![0.0; na];
    let mut b = vec![1.0 / na as f64; na];
    let mut k = vec![0.0; ny];
    update_a(&data, &mut a, &b, &k);

    let mut ll = loglik(&data, &a, &b, &k);
    let mut trace = vec![ll];
    let mut quiet = 0;
    let mut best_gradient = f64::INFINITY;
    for sweep in 1..=control.max_iterations {
        update_a(&data, &mut a, &b, &k);
        for i in 0..ny {
            let gh = |ki: f64| {
                let (mut g, mut h) = (0.0, 0.0);
                for j in 0..na {
                    let (d, e) = data.cell(i, j);
                    let w = (a[j] + b[j] * ki).exp() * e;
                    g += (d - w) * b[j];
                    h += w * b[j] * b[j];
                }
                (g, h)
            };
            k[i] = newton_1d(k[i], gh, |ki| year_loglik(&data, &a, &b, ki, i), control.max_halvings);
        }
        for j in 0..na {
            let gh = |bj: f64| {
                let (mut g, mut h) = (0.0, 0.0);
                for i in 0..ny {
                    let (d, e) = data.cell(i, j);
                    let w = (a[j] + bj * k[i]).exp() * e;
                    g += (d - w) * k[i];
                    h += w * k[i] * k[i];
                }
                (g, h)
            };
            b[j] = newton_1d(b[j], gh, |bj| age_loglik(&data, a[j], bj, &k, j), control.max_halvings);
        }
        normalize(&mut a, &mut b, &mut k);
        update_a(&data, &mut a, &b, &k);

        let new_ll = loglik(&data, &a, &b, &k);
        let rel = (new_ll - ll).abs() / ll.abs().max(1.0);
        ll = new_ll;
        trace.push(ll);
        let gradient = scores(&data, &a, &b, &k);
        if rel <= 4.0 * f64::EPSILON || gradient >= best_gradient {
            quiet += 1;
        } else {
            quiet = 0;
        }
        best_gradient = best_gradient.min(gradient);
        if (rel < control.rel_tol && gradient < control.grad_tol) || quiet >= STAGNATION_STEPS {
            let params = finish(window, &data, a, b, k)?;
            let loglik = loglik_raw(&params, deaths, exposures);
            return Ok(PoissonFit { params, loglik, trace, iterations: sweep, gradient_norm: gradient });
        }
    }
    Err(Error::NonConvergence { iterations: control.max_iterations, context: "Lee-Carter fit".into(), trace })
}

fn finish(
    window: crate::lexis::LexisWindow,
    data: &Data,
    mut a: Vec<f64>,
    mut b: Vec<f64>,
    mut k: Vec<f64>,
) -> Result<BaselineParams> {
    let spread = b.iter().flat_map(|bj| k.iter().map(move |ki| (bj * ki).abs())).fold(0.0, f64::max);
    if spread < 1e-10 {
        // no period effect: fix the unidentified b at its conventional value
        k.iter_mut().for_each(|v| *v = 0.0);
        b.iter_mut().for_each(|v| *v = 1.0 / data.na as f64);
        update_a(data, &mut a, &b, &k);
    }
    BaselineParams::lee_carter(window, a, b, k)
}
