mod common;

use common::lc_truth;
use frailty_core::data::simulate_surface;
use frailty_core::estimation::{backtest_sigma2, BacktestConfig};
use frailty_core::{Error, FrailtySpec, LexisWindow};

fn windows() -> (LexisWindow, LexisWindow, LexisWindow) {
    (
        LexisWindow::new(1970, 1999, 40, 89).unwrap(),
        LexisWindow::new(1970, 1989, 40, 89).unwrap(),
        LexisWindow::new(1990, 1999, 40, 89).unwrap(),
    )
}

#[test]
fn degenerate_truth_prefers_no_frailty() {
    let (all, fit, test) = windows();
    let s = simulate_surface(&FrailtySpec::Degenerate, &lc_truth(all), None, all, 1e6, 31).unwrap();
    let res = backtest_sigma2(&s, &fit, &test, &BacktestConfig::default()).unwrap();
    assert!(res.sigma2 < 0.05, "sigma2 = {}", res.sigma2);

    // the grid maximum sits within one grid step of the search result
    let (grid_arg, grid_max) =
        res.curve.iter().fold((f64::NAN, f64::NEG_INFINITY), |m, &(s, f)| if f > m.1 { (s, f) } else { m });
    assert!((grid_arg - res.sigma2).abs() <= 0.05 + 1e-12, "{grid_arg} vs {}", res.sigma2);
    assert!(res.f >= grid_max - 1e-6 * grid_max.abs());
    let mut csv = Vec::new();
    res.write_curve_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), res.curve.len() + 1);
}

#[test]
fn windows_must_be_adjacent() {
    let (all, fit, _) = windows();
    let s = simulate_surface(&FrailtySpec::Degenerate, &lc_truth(all), None, all, 1e5, 1).unwrap();
    let gap = LexisWindow::new(1991, 1999, 40, 89).unwrap();
    assert!(matches!(backtest_sigma2(&s, &fit, &gap, &BacktestConfig::default()), Err(Error::Structure(_))));
    let ages = LexisWindow::new(1990, 1999, 41, 89).unwrap();
    assert!(matches!(backtest_sigma2(&s, &fit, &ages, &BacktestConfig::default()), Err(Error::Structure(_))));
}
