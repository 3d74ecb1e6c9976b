//! Death counts and exposures on a Lexis window, observed rates, and the
//! cumulative hazard tables that feed the pseudo-likelihood.

mod hazard;
mod hmd;
mod simulate;

pub use hazard::{cumulative_hazard, CumulativeHazardTable, HazardMode};
pub use hmd::{parse_hmd_table, write_hmd_table, HmdRecord, HmdTable, Sex};
pub use simulate::{expected_rates, simulate_surface};

use std::io::{self, BufRead, Write};

use crate::error::{Error, Result};
use crate::lexis::{Grid, LexisWindow};
use crate::numeric::fmt_f64;

/// Deaths `D(t,x)` and exposures `E(t,x)` (person-years) on one window.
///
/// Both grids may hold fractional values. Cells with zero exposure carry zero
/// deaths and are excluded from every likelihood sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalitySurface {
    deaths: Grid,
    exposures: Grid,
    zero_exposure: Vec<(i32, i32)>,
}

impl MortalitySurface {
    pub fn new(deaths: Grid, exposures: Grid) -> Result<Self> {
        deaths.same_window(&exposures)?;
        let mut zero_exposure = Vec::new();
        for ((t, x, d), (_, _, e)) in deaths.iter().zip(exposures.iter()) {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Cleaning { t, x, message: format!("invalid death count {d}") });
            }
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::Cleaning { t, x, message: format!("invalid exposure {e}") });
            }
            if e == 0.0 {
                if d > 0.0 {
                    return Err(Error::Cleaning { t, x, message: format!("{d} deaths recorded with zero exposure") });
                }
                zero_exposure.push((t, x));
            }
        }
        Ok(Self { deaths, exposures, zero_exposure })
    }

    pub fn window(&self) -> &LexisWindow {
        self.deaths.window()
    }

    pub fn deaths(&self) -> &Grid {
        &self.deaths
    }

    pub fn exposures(&self) -> &Grid {
        &self.exposures
    }

    /// Cells flagged during cleaning because their exposure is zero.
    pub fn zero_exposure_cells(&self) -> &[(i32, i32)] {
        &self.zero_exposure
    }

    /// Sub-surface on a window inside this one.
    pub fn restrict(&self, window: &LexisWindow) -> Result<Self> {
        Self::new(self.deaths.restrict(window)?, self.exposures.restrict(window)?)
    }
}

/// Assembles a dense surface from parsed tables, requiring full coverage of `window`.
pub fn build_surface(deaths: &HmdTable, exposures: &HmdTable, window: LexisWindow) -> Result<MortalitySurface> {
    let dmap = deaths.to_map();
    let emap = exposures.to_map();
    let lookup = |map: &std::collections::BTreeMap<(i32, i32), Option<f64>>, what: &str, t, x| match map.get(&(t, x)) {
        None => Err(Error::Structure(format!("{what} table has no cell (t={t}, x={x})"))),
        Some(None) => Err(Error::MissingCell { t, x }),
        Some(Some(v)) if *v < 0.0 => Err(Error::Cleaning { t, x, message: format!("negative {what} {v}") }),
        Some(Some(v)) => Ok(*v),
    };
    let d = Grid::try_from_fn(window, |t, x| lookup(&dmap, "deaths", t, x))?;
    let e = Grid::try_from_fn(window, |t, x| lookup(&emap, "exposures", t, x))?;
    MortalitySurface::new(d, e)
}

/// Observed death rates `m = D / E`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSurface {
    rates: Grid,
}

impl RateSurface {
    pub fn new(rates: Grid) -> Result<Self> {
        if let Some((t, x, v)) = rates.iter().find(|(_, _, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Cleaning { t, x, message: format!("invalid rate {v}") });
        }
        Ok(Self { rates })
    }

    pub fn window(&self) -> &LexisWindow {
        self.rates.window()
    }

    pub fn grid(&self) -> &Grid {
        &self.rates
    }

    pub fn at(&self, t: i32, x: i32) -> f64 {
        self.rates.at(t, x)
    }
}

pub fn death_rates(surface: &MortalitySurface) -> RateSurface {
    let e = surface.exposures();
    let rates = Grid::from_fn(*surface.window(), |t, x| {
        let exposure = e.at(t, x);
        if exposure > 0.0 {
            surface.deaths().at(t, x) / exposure
        } else {
            0.0
        }
    });
    RateSurface { rates }
}

/// Rates extended to the left of and below the window.
///
/// Years before `t_min` reuse the `t_min` rate for the same age, ages below
/// `x_min` have rate zero. With a background grid the in-window values have the
/// background subtracted, and the pre-window copy uses those subtracted values.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedRates<'a> {
    rates: &'a RateSurface,
    background: Option<&'a Grid>,
}

impl<'a> ExtendedRates<'a> {
    pub fn at(&self, t: i32, x: i32) -> Result<f64> {
        let w = self.rates.window();
        if t > w.t_max || x > w.x_max || x < 0 {
            return Err(Error::Domain(format!("extended rates undefined at (t={t}, x={x}) beyond {w}")));
        }
        if x < w.x_min {
            return Ok(0.0);
        }
        let year = t.max(w.t_min);
        let m = self.rates.at(year, x);
        Ok(match self.background {
            Some(g) => m - g.at(year, x),
            None => m,
        })
    }
}

pub fn extended_rates(rates: &RateSurface) -> ExtendedRates<'_> {
    ExtendedRates { rates, background: None }
}

/// Extended rates with background intensity `G` removed inside the window.
pub fn extended_rates_net<'a>(rates: &'a RateSurface, background: &'a Grid) -> Result<ExtendedRates<'a>> {
    rates.grid().same_window(background)?;
    Ok(ExtendedRates { rates, background: Some(background) })
}

/// Writes `t,x,value` CSV with LF endings and round-trip precision.
pub fn write_grid_csv<W: Write>(mut out: W, grid: &Grid, value_name: &str) -> io::Result<()> {
    writeln!(out, "t,x,{value_name}")?;
    for (t, x, v) in grid.iter() {
        writeln!(out, "{t},{x},{}", fmt_f64(v))?;
    }
    Ok(())
}

/// Reads a grid written by [`write_grid_csv`]; the window is inferred from the cells.
pub fn read_grid_csv<R: BufRead>(input: R) -> Result<Grid> {
    let mut cells = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse { line: idx + 1, message: m.to_string() };
        let mut it = line.split(',');
        let t: i32 = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad year"))?;
        let x: i32 = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad age"))?;
        let v: f64 = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad value"))?;
        cells.push((t, x, v));
    }
    let (t_min, t_max, x_min, x_max) =
        cells.iter().fold((i32::MAX, i32::MIN, i32::MAX, i32::MIN), |(a, b, c, d), &(t, x, _)| {
            (a.min(t), b.max(t), c.min(x), d.max(x))
        });
    if cells.is_empty() {
        return Err(Error::Structure("grid CSV has no rows".into()));
    }
    let window = LexisWindow::new(t_min, t_max, x_min, x_max)?;
    if cells.len() != window.len() {
        return Err(Error::Structure(format!("grid CSV has {} rows but spans {window}", cells.len())));
    }
    let mut grid = Grid::filled(window, f64::NAN);
    for (t, x, v) in cells {
        grid.set(t, x, v);
    }
    if grid.values().iter().any(|v| v.is_nan()) {
        return Err(Error::Structure("grid CSV has duplicate or missing cells".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(i32, i32, Option<f64>)]) -> HmdTable {
        HmdTable { records: rows.iter().map(|&(year, age, value)| HmdRecord { year, age, value }).collect() }
    }

    #[test]
    fn complete_grids_build() {
        let d = table(&[(2000, 0, Some(1.0)), (2000, 1, Some(2.0)), (2001, 0, Some(3.0)), (2001, 1, Some(4.0))]);
        let e = table(&[(2000, 0, Some(10.0)), (2000, 1, Some(20.0)), (2001, 0, Some(30.0)), (2001, 1, Some(40.0))]);
        let s = build_surface(&d, &e, LexisWindow::new(2000, 2001, 0, 1).unwrap()).unwrap();
        assert_eq!(s.window().len(), 4);
        assert_eq!(s.deaths().at(2001, 1), 4.0);
    }

    #[test]
    fn missing_exposure_cell_is_structural() {
        let d = table(&[(2000, 0, Some(1.0)), (2000, 1, Some(2.0))]);
        let e = table(&[(2000, 0, Some(10.0))]);
        let err = build_surface(&d, &e, LexisWindow::new(2000, 2000, 0, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Structure(ref m) if m.contains("t=2000, x=1")), "{err}");
    }

    #[test]
    fn missing_marker_in_window_is_rejected() {
        let d = table(&[(2000, 0, None)]);
        let e = table(&[(2000, 0, Some(10.0))]);
        let err = build_surface(&d, &e, LexisWindow::new(2000, 2000, 0, 0).unwrap()).unwrap_err();
        assert_eq!(err, Error::MissingCell { t: 2000, x: 0 });
    }

    #[test]
    fn deaths_without_exposure_fail_cleaning() {
        let d = table(&[(2000, 0, Some(3.0))]);
        let e = table(&[(2000, 0, Some(0.0))]);
        let err = build_surface(&d, &e, LexisWindow::new(2000, 2000, 0, 0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Cleaning { t: 2000, x: 0, .. }));
    }

    #[test]
    fn zero_exposure_cells_are_flagged() {
        let w = LexisWindow::new(2000, 2000, 0, 1).unwrap();
        let s = MortalitySurface::new(
            Grid::from_values(w, vec![0.0, 1.0]).unwrap(),
            Grid::from_values(w, vec![0.0, 100.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(s.zero_exposure_cells(), &[(2000, 0)]);
        let m = death_rates(&s);
        assert_eq!(m.at(2000, 0), 0.0);
        assert_eq!(m.at(2000, 1), 0.01);
    }

    #[test]
    fn rates_are_elementwise_division() {
        let w = LexisWindow::new(2000, 2002, 10, 12).unwrap();
        let d = Grid::from_fn(w, |t, x| ((t - 1990) * x) as f64 * 0.5);
        let e = Grid::from_fn(w, |t, x| 1000.0 + (t - 2000) as f64 * 37.0 + x as f64);
        let s = MortalitySurface::new(d.clone(), e.clone()).unwrap();
        let m = death_rates(&s);
        for t in 2000..=2002 {
            for x in 10..=12 {
                assert_eq!(m.at(t, x), d.at(t, x) / e.at(t, x));
            }
        }
        let single = MortalitySurface::new(
            Grid::filled(LexisWindow::new(1, 1, 0, 0).unwrap(), 30.0),
            Grid::filled(LexisWindow::new(1, 1, 0, 0).unwrap(), 1000.0),
        )
        .unwrap();
        assert_eq!(death_rates(&single).at(1, 0), 0.03);
    }

    #[test]
    fn extension_rule() {
        let w = LexisWindow::new(2000, 2001, 20, 22).unwrap();
        let m = RateSurface::new(Grid::from_fn(w, |t, x| (t - 1999) as f64 * 0.01 + x as f64 * 1e-4)).unwrap();
        let ext = extended_rates(&m);
        assert_eq!(ext.at(1995, 22).unwrap(), m.at(2000, 22));
        assert_eq!(ext.at(2001, 19).unwrap(), 0.0);
        assert_eq!(ext.at(1900, 0).unwrap(), 0.0);
        assert_eq!(ext.at(2001, 21).unwrap(), m.at(2001, 21));
        assert!(matches!(ext.at(2002, 21), Err(Error::Domain(_))));
        assert!(matches!(ext.at(2000, 23), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_csv_round_trip() {
        let w = LexisWindow::new(1980, 1982, 0, 3).unwrap();
        let g = Grid::from_fn(w, |t, x| ((t * 7 + x) as f64).sin() / 3.0);
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &g, "value").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,value\n"));
        assert!(!text.contains('\r'));
        let back = read_grid_csv(&buf[..]).unwrap();
        assert_eq!(back, g);
    }
}
