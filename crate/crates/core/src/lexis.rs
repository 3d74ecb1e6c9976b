//! Rectangular windows on the Lexis plane and dense grids over them.

use crate::error::{Error, Result};

/// Oldest single-year age carried anywhere in the crate; `110+` maps here.
pub const MAX_AGE: i32 = 110;

/// Calendar years `t_min..=t_max` crossed with ages `x_min..=x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LexisWindow {
    pub t_min: i32,
    pub t_max: i32,
    pub x_min: i32,
    pub x_max: i32,
}

impl LexisWindow {
    pub fn new(t_min: i32, t_max: i32, x_min: i32, x_max: i32) -> Result<Self> {
        if t_min > t_max {
            return Err(Error::Domain(format!("t_min ({t_min}) exceeds t_max ({t_max})")));
        }
        if x_min < 0 {
            return Err(Error::Domain(format!("x_min ({x_min}) is negative")));
        }
        if x_min > x_max {
            return Err(Error::Domain(format!("x_min ({x_min}) exceeds x_max ({x_max})")));
        }
        if x_max > MAX_AGE {
            return Err(Error::Domain(format!("x_max ({x_max}) exceeds {MAX_AGE}")));
        }
        Ok(Self { t_min, t_max, x_min, x_max })
    }

    pub fn n_years(&self) -> usize {
        (self.t_max - self.t_min + 1) as usize
    }

    pub fn n_ages(&self) -> usize {
        (self.x_max - self.x_min + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.n_years() * self.n_ages()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: i32, x: i32) -> bool {
        (self.t_min..=self.t_max).contains(&t) && (self.x_min..=self.x_max).contains(&x)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + Clone {
        self.t_min..=self.t_max
    }

    pub fn ages(&self) -> impl Iterator<Item = i32> + Clone {
        self.x_min..=self.x_max
    }

    /// All cells in year-major order.
    pub fn cells(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        self.years().flat_map(move |t| self.ages().map(move |x| (t, x)))
    }

    pub fn index(&self, t: i32, x: i32) -> Option<usize> {
        self.contains(t, x).then(|| (t - self.t_min) as usize * self.n_ages() + (x - self.x_min) as usize)
    }

    /// Same ages, years extended by `horizon`.
    pub fn extended(&self, horizon: usize) -> Self {
        Self { t_max: self.t_max + horizon as i32, ..*self }
    }

    /// True when `inner` lies inside `self`.
    pub fn covers(&self, inner: &LexisWindow) -> bool {
        self.contains(inner.t_min, inner.x_min) && self.contains(inner.t_max, inner.x_max)
    }
}

impl std::fmt::Display for LexisWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "years {}-{}, ages {}-{}", self.t_min, self.t_max, self.x_min, self.x_max)
    }
}

/// Dense year-major grid of reals over a [`LexisWindow`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    window: LexisWindow,
    values: Vec<f64>,
}

impl Grid {
    pub fn filled(window: LexisWindow, value: f64) -> Self {
        Self { window, values: vec![value; window.len()] }
    }

    pub fn from_fn(window: LexisWindow, mut f: impl FnMut(i32, i32) -> f64) -> Self {
        let values = window.cells().map(|(t, x)| f(t, x)).collect();
        Self { window, values }
    }

    pub fn try_from_fn(window: LexisWindow, mut f: impl FnMut(i32, i32) -> Result<f64>) -> Result<Self> {
        let values = window.cells().map(|(t, x)| f(t, x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { window, values })
    }

    pub fn from_values(window: LexisWindow, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::Structure(format!(
                "grid over {window} needs {} values, got {}",
                window.len(),
                values.len()
            )));
        }
        Ok(Self { window, values })
    }

    pub fn window(&self) -> &LexisWindow {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, t: i32, x: i32) -> Option<f64> {
        self.window.index(t, x).map(|i| self.values[i])
    }

    /// Panics when `(t, x)` lies outside the window.
    pub fn at(&self, t: i32, x: i32) -> f64 {
        match self.window.index(t, x) {
            Some(i) => self.values[i],
            None => panic!("cell (t={t}, x={x}) outside {}", self.window),
        }
    }

    pub fn set(&mut self, t: i32, x: i32, value: f64) {
        let i = self.window.index(t, x).unwrap_or_else(|| panic!("cell (t={t}, x={x}) outside {}", self.window));
        self.values[i] = value;
    }

    /// Values for one year, ordered by age.
    pub fn year_slice(&self, t: i32) -> &[f64] {
        let n = self.window.n_ages();
        let start = (t - self.window.t_min) as usize * n;
        &self.values[start..start + n]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, i32, f64)> + '_ {
        self.window.cells().zip(self.values.iter()).map(|((t, x), &v)| (t, x, v))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Grid {
        Grid { window: self.window, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Restriction to a sub-window.
    pub fn restrict(&self, window: &LexisWindow) -> Result<Grid> {
        if !self.window.covers(window) {
            return Err(Error::Structure(format!("{window} is not inside {}", self.window)));
        }
        Ok(Grid::from_fn(*window, |t, x| self.at(t, x)))
    }

    pub fn same_window(&self, other: &Grid) -> Result<()> {
        if self.window == other.window {
            Ok(())
        } else {
            Err(Error::Structure(format!("grid windows differ: {} vs {}", self.window, other.window)))
        }
    }
}
