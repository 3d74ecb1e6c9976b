//! Logistic extension of period rates to the oldest ages.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::lexis::{Grid, MAX_AGE};
use crate::numeric::simple_ols;

/// Ages whose rates determine the logistic fit.
pub const LOGISTIC_FIT_AGES: RangeInclusive<i32> = 70..=90;

/// Per-year `logit m(t,x) = c0_t + c1_t * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticExtension {
    pub years: Vec<i32>,
    pub intercept: Vec<f64>,
    pub slope: Vec<f64>,
}

impl LogisticExtension {
    /// Extended rate `m = 1 / (1 + exp(-(c0 + c1 x)))`.
    pub fn eval(&self, t: i32, x: i32) -> Result<f64> {
        let i = self
            .years
            .iter()
            .position(|&y| y == t)
            .ok_or_else(|| Error::Domain(format!("no logistic fit for year {t}")))?;
        let z = self.intercept[i] + self.slope[i] * x as f64;
        Ok(1.0 / (1.0 + (-z).exp()))
    }

    /// Rates for ages `from..=110` in year `t`.
    pub fn old_age_rates(&self, t: i32, from: i32) -> Result<Vec<f64>> {
        (from..=MAX_AGE).map(|x| self.eval(t, x)).collect()
    }
}

/// Fits the logistic extension year by year to rates at ages 70 to 90.
///
/// Rates outside `(0, 1)` are skipped; a year with fewer than two usable ages
/// is unidentifiable.
pub fn fit_logistic_extension(rates: &Grid) -> Result<LogisticExtension> {
    let w = rates.window();
    if w.x_min > *LOGISTIC_FIT_AGES.start() || w.x_max < *LOGISTIC_FIT_AGES.end() {
        return Err(Error::Structure(format!(
            "logistic extension needs ages {}-{}, window is {w}",
            LOGISTIC_FIT_AGES.start(),
            LOGISTIC_FIT_AGES.end()
        )));
    }
    let mut out = LogisticExtension { years: Vec::new(), intercept: Vec::new(), slope: Vec::new() };
    for t in w.years() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = LOGISTIC_FIT_AGES
            .filter_map(|x| {
                let m = rates.at(t, x);
                (m > 0.0 && m < 1.0).then(|| (x as f64, (m / (1.0 - m)).ln()))
            })
            .unzip();
        let (c0, c1) = simple_ols(&xs, &ys).ok_or_else(|| Error::Unidentifiable {
            year: t,
            message: "fewer than two usable ages for the logistic extension".into(),
        })?;
        out.years.push(t);
        out.intercept.push(c0);
        out.slope.push(c1);
    }
    Ok(out)
}
