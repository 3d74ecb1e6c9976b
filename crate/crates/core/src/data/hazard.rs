use super::{extended_rates, extended_rates_net, RateSurface};
use crate::error::Result;
use crate::lexis::{Grid, LexisWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HazardMode {
    /// Sum along the birth-cohort diagonal, using the extended rates before the window.
    Cohort,
    /// Sum over ages within the same calendar year.
    Period,
}

/// Empirical integrated cohort intensity on the data window.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeHazardTable {
    pub values: Grid,
    pub mode: HazardMode,
    pub background_subtracted: bool,
}

impl CumulativeHazardTable {
    pub fn window(&self) -> &LexisWindow {
        self.values.window()
    }

    pub fn at(&self, t: i32, x: i32) -> f64 {
        self.values.at(t, x)
    }

    /// Values clipped at zero, with the number of cells that were negative.
    pub fn floored(&self) -> (Grid, usize) {
        let mut count = 0;
        let g = self.values.map(|v| {
            if v < 0.0 {
                count += 1;
                0.0
            } else {
                v
            }
        });
        (g, count)
    }
}

/// Builds the cumulative hazard table.
///
/// Cohort mode evaluates `H(t,x) = sum_{u<x} m(u+t-x, u)` over the extended
/// rates through the recursion `H(t,x) = H(t-1,x-1) + m(t-1,x-1)`, so that the
/// diagonal increments are exact in floating point. Period mode sums
/// `m(t, u)` for `x_min <= u < x`. With a background grid `G` the summands are
/// `m - G`; negative summands are kept.
pub fn cumulative_hazard(
    rates: &RateSurface,
    mode: HazardMode,
    background: Option<&Grid>,
) -> Result<CumulativeHazardTable> {
    let ext = match background {
        Some(g) => extended_rates_net(rates, g)?,
        None => extended_rates(rates),
    };
    let w = *rates.window();
    let mut values = Grid::filled(w, 0.0);
    match mode {
        HazardMode::Cohort => {
            // the first year's cohorts have only pre-window history
            let mut acc = 0.0;
            for x in w.x_min + 1..=w.x_max {
                acc += ext.at(w.t_min - 1, x - 1)?;
                values.set(w.t_min, x, acc);
            }
            for t in w.t_min + 1..=w.t_max {
                for x in w.x_min + 1..=w.x_max {
                    let v = values.at(t - 1, x - 1) + ext.at(t - 1, x - 1)?;
                    values.set(t, x, v);
                }
            }
        }
        HazardMode::Period => {
            for t in w.years() {
                let mut acc = 0.0;
                for x in w.x_min + 1..=w.x_max {
                    acc += ext.at(t, x - 1)?;
                    values.set(t, x, acc);
                }
            }
        }
    }
    Ok(CumulativeHazardTable { values, mode, background_subtracted: background.is_some() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::extended_rates;

    fn flat(value: f64) -> RateSurface {
        let w = LexisWindow::new(2000, 2001, 20, 22).unwrap();
        RateSurface::new(Grid::filled(w, value)).unwrap()
    }

    #[test]
    fn flat_surface_hand_sums() {
        let m = flat(0.1);
        let c = cumulative_hazard(&m, HazardMode::Cohort, None).unwrap();
        let p = cumulative_hazard(&m, HazardMode::Period, None).unwrap();
        for t in 2000..=2001 {
            assert_eq!(c.at(t, 20), 0.0);
            assert_eq!(p.at(t, 20), 0.0);
            assert_eq!(c.at(t, 22), 0.2);
            for x in 20..=22 {
                assert!((p.at(t, x) - 0.1 * (x - 20) as f64).abs() < 1e-15);
            }
        }
    }

    /// Direct evaluation of the defining sum, independent of the recursion.
    fn cohort_by_definition(m: &RateSurface, t: i32, x: i32) -> f64 {
        let ext = extended_rates(m);
        (0..x).map(|u| ext.at(u + t - x, u).unwrap()).sum()
    }

    #[test]
    fn cohort_table_matches_defining_sum() {
        let w = LexisWindow::new(1990, 1995, 3, 9).unwrap();
        let m = RateSurface::new(Grid::from_fn(w, |t, x| 0.001 * (1.0 + ((t * 31 + x * 17) % 11) as f64))).unwrap();
        let h = cumulative_hazard(&m, HazardMode::Cohort, None).unwrap();
        for (t, x) in w.cells() {
            assert!((h.at(t, x) - cohort_by_definition(&m, t, x)).abs() < 1e-15);
        }
        // diagonal increments are exact
        for t in 1990..1995 {
            for x in 3..9 {
                assert_eq!(h.at(t + 1, x + 1), h.at(t, x) + m.at(t, x));
            }
        }
    }

    #[test]
    fn zero_background_reproduces_plain_table() {
        let w = LexisWindow::new(1990, 1993, 0, 5).unwrap();
        let m = RateSurface::new(Grid::from_fn(w, |t, x| 0.01 + 0.001 * ((t + x) % 4) as f64)).unwrap();
        let zero = Grid::filled(w, 0.0);
        for mode in [HazardMode::Cohort, HazardMode::Period] {
            let a = cumulative_hazard(&m, mode, None).unwrap();
            let b = cumulative_hazard(&m, mode, Some(&zero)).unwrap();
            assert_eq!(a.values, b.values);
            assert!(b.background_subtracted);
        }
    }

    #[test]
    fn negative_net_rates_are_kept_and_floorable() {
        let m = flat(0.01);
        let g = Grid::filled(*m.window(), 0.02);
        let h = cumulative_hazard(&m, HazardMode::Cohort, Some(&g)).unwrap();
        assert!((h.at(2001, 22) + 0.02).abs() < 1e-15);
        let (floored, count) = h.floored();
        assert_eq!(count, 4);
        assert!(floored.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn mismatched_background_is_rejected() {
        let m = flat(0.01);
        let g = Grid::filled(LexisWindow::new(2000, 2002, 20, 22).unwrap(), 0.0);
        assert!(cumulative_hazard(&m, HazardMode::Period, Some(&g)).is_err());
    }
}
