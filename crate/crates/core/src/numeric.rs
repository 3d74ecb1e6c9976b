//! Small numeric helpers shared by the likelihood code.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Poisson log-likelihood term `D log(mu) - mu E`, dropping `-log D!`.
///
/// Returns `None` when `mu <= 0` while `D > 0`.
#[inline]
pub fn poisson_term(deaths: f64, mu: f64, exposure: f64) -> Option<f64> {
    if deaths > 0.0 {
        (mu > 0.0).then(|| deaths * mu.ln() - mu * exposure)
    } else {
        Some(-mu * exposure)
    }
}

/// Same term measured against the saturated fit `mu = D/E`.
///
/// Summing these gives the log-likelihood minus a data-only constant; values
/// stay O(1) per cell so differences between nearby fits keep full precision.
#[inline]
pub fn poisson_term_centered(deaths: f64, mu: f64, exposure: f64) -> Option<f64> {
    if deaths > 0.0 {
        if mu <= 0.0 {
            return None;
        }
        let expected = mu * exposure;
        Some(deaths * (expected / deaths).ln() - (expected - deaths))
    } else {
        Some(-mu * exposure)
    }
}

/// The data-only offset: raw term minus centered term.
#[inline]
pub fn poisson_saturated_offset(deaths: f64, exposure: f64) -> f64 {
    if deaths > 0.0 {
        deaths * (deaths / exposure).ln() - deaths
    } else {
        0.0
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `(x, y)` ordinary least squares line, returns `(intercept, slope)`.
pub fn simple_ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1e16, 1.0, -1e16];
        v.extend(std::iter::repeat_n(1.0, 10));
        assert_eq!(compensated_sum(v), 11.0);
    }

    #[test]
    fn centered_plus_offset_is_raw() {
        let (d, mu, e) = (37.5, 0.031, 1100.0);
        let raw = poisson_term(d, mu, e).unwrap();
        let c = poisson_term_centered(d, mu, e).unwrap() + poisson_saturated_offset(d, e);
        assert!((raw - c).abs() < 1e-12);
        assert_eq!(poisson_term(2.0, 0.0, 1.0), None);
        assert_eq!(poisson_term(0.0, 0.0, 1.0), Some(0.0));
    }

    #[test]
    fn fmt_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5e17] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
