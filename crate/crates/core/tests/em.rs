mod common;

use common::*;
use frailty_core::baseline::{fit_weighted_poisson, FitControl};
use frailty_core::data::{cumulative_hazard, death_rates, HazardMode};
use frailty_core::estimation::{
    adjustment_factors, em_fit_additive, em_fit_additive_fixed, fit_fixed_frailty, split_deaths, EmControl,
    FrailtyChoice, ModelMode,
};
use frailty_core::numeric::poisson_term;
use frailty_core::{BaselineModel, Error, FrailtySpec, Grid, LexisWindow};

fn window() -> LexisWindow {
    LexisWindow::new(1990, 2004, 30, 89).unwrap()
}

#[test]
fn without_background_em_is_the_multiplicative_fit() {
    let w = window();
    let spec = FrailtySpec::gamma(0.4).unwrap();
    let s = simulate(&spec, &improving_gompertz(w), None, 1e6, 6);
    let em = em_fit_additive_fixed(&spec, &s, BaselineModel::GompertzPerYear, None, &EmControl::default()).unwrap();
    let direct = fit_fixed_frailty(&spec, &s, ModelMode::CohortMultiplicative, BaselineModel::GompertzPerYear).unwrap();
    assert!((em.loglik - direct.loglik).abs() < 1e-6, "{} vs {}", em.loglik, direct.loglik);
    assert_eq!(em.floored_cells, 0);
    assert!(em.background.is_none());
}

#[test]
fn one_step_at_fixed_exposures_never_decreases() {
    let w = window();
    let g0 = constant_background(w, 5e-4);
    let s = simulate(&FrailtySpec::gamma(0.3).unwrap(), &improving_gompertz(w), Some(&g0), 1e6, 9);
    let spec = FrailtySpec::gamma(0.6).unwrap();
    // any adjustment grid will do; the step is an ordinary competing-risks EM step
    let h = cumulative_hazard(&death_rates(&s), HazardMode::Cohort, Some(&g0.grid())).unwrap();
    let c = adjustment_factors(&spec, &h).unwrap();
    let ce = Grid::from_fn(w, |t, x| c.at(t, x) * s.exposures().at(t, x));
    let ll = |f: &Grid, g: &Grid| -> f64 {
        w.cells()
            .map(|(t, x)| {
                poisson_term(s.deaths().at(t, x), c.at(t, x) * f.at(t, x) + g.at(t, x), s.exposures().at(t, x)).unwrap()
            })
            .sum()
    };
    let ctl = FitControl::default();
    let mut f =
        fit_weighted_poisson(BaselineModel::GompertzPerYear, s.deaths(), s.exposures(), &ctl).unwrap().params.grid();
    let mut g = Grid::filled(w, 1e-4);
    let mut last = ll(&f, &g);
    for _ in 0..20 {
        let lam_f = Grid::from_fn(w, |t, x| c.at(t, x) * f.at(t, x) * s.exposures().at(t, x));
        let lam_g = Grid::from_fn(w, |t, x| g.at(t, x) * s.exposures().at(t, x));
        let (d_base, d_back) = split_deaths(s.deaths(), &lam_f, &lam_g);
        f = fit_weighted_poisson(BaselineModel::GompertzPerYear, &d_base, &ce, &ctl).unwrap().params.grid();
        g = fit_weighted_poisson(BaselineModel::ConstantPerYear, &d_back, s.exposures(), &ctl).unwrap().params.grid();
        let now = ll(&f, &g);
        assert!(now >= last - 1e-8 * last.abs(), "{now} < {last}");
        last = now;
    }
}

#[test]
fn recomputed_exposures_drift_only_slightly_near_the_truth() {
    let w = window();
    let g = constant_background(w, 5e-4);
    let s = simulate(&FrailtySpec::gamma(0.3).unwrap(), &improving_gompertz(w), Some(&g), 1e6, 9);
    let ctl = EmControl { decrease_tol: f64::INFINITY, ..EmControl::default() };
    for sigma2 in [0.2, 0.3, 0.4] {
        let fit = em_fit_additive_fixed(
            &FrailtySpec::gamma(sigma2).unwrap(),
            &s,
            BaselineModel::GompertzPerYear,
            Some(BaselineModel::ConstantPerYear),
            &ctl,
        )
        .unwrap();
        let peak = fit.trace.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let last = fit.trace.last().unwrap().1;
        assert!(peak - last < 1e-3, "sigma2 {sigma2}: fixed point {last}, peak {peak}");
        assert!(fit.fitted_rates().unwrap().values().iter().all(|m| *m > 0.0));
    }
}

#[test]
fn decrease_is_reported_with_the_trace() {
    let w = window();
    let g = constant_background(w, 5e-4);
    let s = simulate(&FrailtySpec::gamma(0.3).unwrap(), &improving_gompertz(w), Some(&g), 1e6, 9);
    let out = em_fit_additive_fixed(
        &FrailtySpec::gamma(2.0).unwrap(),
        &s,
        BaselineModel::GompertzPerYear,
        Some(BaselineModel::ConstantPerYear),
        &EmControl::default(),
    );
    match out {
        Err(Error::Algorithm { trace, .. }) => {
            let n = trace.len();
            assert!(n >= 2 && trace[n - 1] < trace[n - 2] - 1e-8);
        }
        other => panic!("expected an algorithm error, got {other:?}"),
    }
}

#[test]
fn fixed_choice_has_no_search_evaluations() {
    let w = LexisWindow::new(1995, 2000, 40, 70).unwrap();
    let s = simulate(&FrailtySpec::Degenerate, &improving_gompertz(w), Some(&constant_background(w, 1e-3)), 1e6, 1);
    let fit = em_fit_additive(
        &FrailtyChoice::Fixed(FrailtySpec::Degenerate),
        &s,
        BaselineModel::GompertzPerYear,
        Some(BaselineModel::ConstantPerYear),
        &EmControl::default(),
    )
    .unwrap();
    assert!(fit.evaluations.is_empty());
    assert_eq!(fit.fitted.mode, ModelMode::CohortAdditive);
}
