mod common;

use common::*;
use frailty_core::baseline::FitControl;
use frailty_core::estimation::{
    fit_fixed_frailty, profile_fit, profile_grid, switching_fit, ModelMode, SearchConfig, SwitchingControl,
};
use frailty_core::{BaselineModel, FrailtyFamily, FrailtySpec, LexisWindow};

fn small_window() -> LexisWindow {
    LexisWindow::new(1990, 2004, 40, 89).unwrap()
}

#[test]
fn degenerate_truth_gives_variance_near_zero() {
    let w = desk_window();
    let s = simulate(&FrailtySpec::Degenerate, &improving_gompertz(w), None, 1e6, 5);
    let fit = profile_fit(
        FrailtyFamily::Gamma,
        &s,
        ModelMode::CohortMultiplicative,
        BaselineModel::GompertzPerYear,
        &SearchConfig::default(),
    )
    .unwrap();
    assert!(fit.fitted.frailty.sigma2() < 0.02, "{}", fit.fitted.frailty);
}

#[test]
fn profile_maximum_dominates_a_sweep() {
    let w = small_window();
    let s = simulate(&FrailtySpec::gamma(0.5).unwrap(), &improving_gompertz(w), None, 1e6, 8);
    let mode = ModelMode::CohortMultiplicative;
    let fit =
        profile_fit(FrailtyFamily::Gamma, &s, mode, BaselineModel::GompertzPerYear, &SearchConfig::default()).unwrap();
    let best = fit.fitted.trace.last().unwrap().1;
    let sweep: Vec<f64> = (0..10).map(|i| 0.1 + 0.1 * i as f64).collect();
    let grid = profile_grid(
        FrailtyFamily::Gamma,
        &s,
        mode,
        BaselineModel::GompertzPerYear,
        &[0.0],
        &sweep,
        &FitControl::default(),
    )
    .unwrap();
    for p in grid {
        assert!(best >= p.loglik, "sigma2 {} beats the search: {} > {best}", p.sigma2, p.loglik);
    }
}

#[test]
fn inverse_gaussian_is_recovered() {
    let w = small_window();
    let s = simulate(&FrailtySpec::inverse_gaussian(0.4).unwrap(), &improving_gompertz(w), None, 1e6, 21);
    let fit = profile_fit(
        FrailtyFamily::InverseGaussian,
        &s,
        ModelMode::CohortMultiplicative,
        BaselineModel::GompertzPerYear,
        &SearchConfig::default(),
    )
    .unwrap();
    assert!((fit.fitted.frailty.sigma2() - 0.4).abs() < 0.1, "{}", fit.fitted.frailty);
}

#[test]
fn switching_from_the_truth_stops_quickly_on_exact_data() {
    let w = small_window();
    let s = exact_pseudo_gamma(0.5, &improving_gompertz(w), 1e6);
    let fit = switching_fit(
        FrailtyFamily::Gamma,
        &s,
        ModelMode::CohortMultiplicative,
        BaselineModel::GompertzPerYear,
        FrailtySpec::gamma(0.5).unwrap(),
        &SwitchingControl::default(),
    )
    .unwrap();
    assert!(fit.iterations <= 3, "{} rounds", fit.iterations);
    assert!((fit.frailty.sigma2() - 0.5).abs() < 1e-6);
    for pair in fit.trace.windows(2) {
        assert!(pair[1].1 >= pair[0].1 - 1e-9);
    }
}

#[test]
fn switching_and_profile_agree_for_inverse_gaussian() {
    let w = small_window();
    let s = simulate(&FrailtySpec::inverse_gaussian(0.4).unwrap(), &improving_gompertz(w), None, 1e6, 22);
    let mode = ModelMode::CohortMultiplicative;
    let p =
        profile_fit(FrailtyFamily::InverseGaussian, &s, mode, BaselineModel::GompertzPerYear, &SearchConfig::default())
            .unwrap();
    let sw = switching_fit(
        FrailtyFamily::InverseGaussian,
        &s,
        mode,
        BaselineModel::GompertzPerYear,
        FrailtySpec::inverse_gaussian(1.0).unwrap(),
        &SwitchingControl::default(),
    )
    .unwrap();
    assert!((p.fitted.loglik - sw.loglik).abs() < 1e-6, "{} vs {}", p.fitted.loglik, sw.loglik);
    assert!((p.fitted.frailty.sigma2() - sw.frailty.sigma2()).abs() < 1e-3);
}

#[test]
fn stable_profile_is_at_least_the_gamma_axis() {
    let w = LexisWindow::new(1990, 1999, 50, 89).unwrap();
    let s = simulate(&FrailtySpec::gamma(0.3).unwrap(), &improving_gompertz(w), None, 1e6, 3);
    let mode = ModelMode::CohortMultiplicative;
    let st =
        profile_fit(FrailtyFamily::Stable, &s, mode, BaselineModel::GompertzPerYear, &SearchConfig::default()).unwrap();
    let ga =
        profile_fit(FrailtyFamily::Gamma, &s, mode, BaselineModel::GompertzPerYear, &SearchConfig::default()).unwrap();
    // alpha = 0 is the gamma axis, so the two-parameter search can only do better
    assert!(st.fitted.loglik >= ga.fitted.loglik - 1e-3, "{} < {}", st.fitted.loglik, ga.fitted.loglik);
    assert!(st.fitted.frailty.alpha().unwrap() < 0.3, "{}", st.fitted.frailty);
}

#[test]
fn period_mode_fit_uses_adjusted_exposures() {
    let w = small_window();
    let s = simulate(&FrailtySpec::Degenerate, &improving_gompertz(w), None, 1e6, 4);
    let spec = FrailtySpec::gamma(0.2).unwrap();
    let fit = fit_fixed_frailty(&spec, &s, ModelMode::PeriodMultiplicative, BaselineModel::GompertzPerYear).unwrap();
    assert_eq!(fit.hazard_table.mode, frailty_core::data::HazardMode::Period);
    assert!(fit.loglik.is_finite());
    for pair in fit.trace.windows(2) {
        assert!(pair[1].1 >= pair[0].1 - 1e-9);
    }
}
