//! Baseline intensities `F(theta_t, eta_x)` and background intensities
//! `G(zeta_t, omega_x)`, fitted by Poisson maximum likelihood with
//! user-supplied (frailty-adjusted) exposures.

mod lee_carter;
mod logistic;
mod poisson;

pub use logistic::{fit_logistic_extension, LogisticExtension, LOGISTIC_FIT_AGES};
pub use poisson::{fit_weighted_poisson, FitControl, PoissonFit};

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::lexis::{Grid, LexisWindow};
use crate::numeric::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineModel {
    /// `exp(theta1_t + theta2_t * x)`, fitted year by year.
    GompertzPerYear,
    /// `exp(zeta_t)`, the same at every age.
    ConstantPerYear,
    /// `exp(a_x + b_x * k_t)` with `sum k = 0`, `sum b = 1`.
    LeeCarter,
}

impl BaselineModel {
    pub fn name(self) -> &'static str {
        match self {
            BaselineModel::GompertzPerYear => "gompertz",
            BaselineModel::ConstantPerYear => "constant",
            BaselineModel::LeeCarter => "lee-carter",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "gompertz" | "gompertz-per-year" => Some(BaselineModel::GompertzPerYear),
            "constant" | "constant-per-year" => Some(BaselineModel::ConstantPerYear),
            "lee-carter" | "leecarter" | "lc" => Some(BaselineModel::LeeCarter),
            _ => None,
        }
    }

    /// Dimension of the period index `theta_t`.
    pub fn index_dim(self) -> usize {
        match self {
            BaselineModel::GompertzPerYear => 2,
            BaselineModel::ConstantPerYear | BaselineModel::LeeCarter => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineKind {
    GompertzPerYear { level: Vec<f64>, slope: Vec<f64> },
    ConstantPerYear { level: Vec<f64> },
    LeeCarter { a: Vec<f64>, b: Vec<f64>, k: Vec<f64> },
}

/// Fitted (or user-specified) parameters of one intensity model on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    window: LexisWindow,
    kind: BaselineKind,
}

impl BaselineParams {
    pub fn new(window: LexisWindow, kind: BaselineKind) -> Result<Self> {
        let (ny, na) = (window.n_years(), window.n_ages());
        let ok = match &kind {
            BaselineKind::GompertzPerYear { level, slope } => level.len() == ny && slope.len() == ny,
            BaselineKind::ConstantPerYear { level } => level.len() == ny,
            BaselineKind::LeeCarter { a, b, k } => a.len() == na && b.len() == na && k.len() == ny,
        };
        if !ok {
            return Err(Error::Structure(format!("parameter dimensions do not match {window}")));
        }
        Ok(Self { window, kind })
    }

    pub fn gompertz(window: LexisWindow, level: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        Self::new(window, BaselineKind::GompertzPerYear { level, slope })
    }

    pub fn constant(window: LexisWindow, level: Vec<f64>) -> Result<Self> {
        Self::new(window, BaselineKind::ConstantPerYear { level })
    }

    pub fn lee_carter(window: LexisWindow, a: Vec<f64>, b: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        Self::new(window, BaselineKind::LeeCarter { a, b, k })
    }

    pub fn model(&self) -> BaselineModel {
        match self.kind {
            BaselineKind::GompertzPerYear { .. } => BaselineModel::GompertzPerYear,
            BaselineKind::ConstantPerYear { .. } => BaselineModel::ConstantPerYear,
            BaselineKind::LeeCarter { .. } => BaselineModel::LeeCarter,
        }
    }

    pub fn kind(&self) -> &BaselineKind {
        &self.kind
    }

    pub fn window(&self) -> &LexisWindow {
        &self.window
    }

    fn year_index(&self, t: i32) -> Result<usize> {
        if (self.window.t_min..=self.window.t_max).contains(&t) {
            Ok((t - self.window.t_min) as usize)
        } else {
            Err(Error::Domain(format!("year {t} outside {}", self.window)))
        }
    }

    /// Period index `theta_t` as a vector.
    pub fn index(&self, t: i32) -> Result<Vec<f64>> {
        let i = self.year_index(t)?;
        Ok(match &self.kind {
            BaselineKind::GompertzPerYear { level, slope } => vec![level[i], slope[i]],
            BaselineKind::ConstantPerYear { level } => vec![level[i]],
            BaselineKind::LeeCarter { k, .. } => vec![k[i]],
        })
    }

    /// The full index series, one vector per year.
    pub fn index_series(&self) -> Vec<Vec<f64>> {
        self.window.years().map(|t| self.index(t).expect("year in window")).collect()
    }

    /// `F(index, eta_x)`; the index need not belong to a fitted year.
    pub fn eval_at_index(&self, index: &[f64], x: i32) -> Result<f64> {
        if index.len() != self.model().index_dim() {
            return Err(Error::Structure(format!(
                "index of dimension {} given to {} model",
                index.len(),
                self.model().name()
            )));
        }
        Ok(match &self.kind {
            BaselineKind::GompertzPerYear { .. } => (index[0] + index[1] * x as f64).exp(),
            BaselineKind::ConstantPerYear { .. } => index[0].exp(),
            BaselineKind::LeeCarter { a, b, .. } => {
                if !(self.window.x_min..=self.window.x_max).contains(&x) {
                    return Err(Error::Domain(format!("age {x} outside {}", self.window)));
                }
                let j = (x - self.window.x_min) as usize;
                (a[j] + b[j] * index[0]).exp()
            }
        })
    }

    /// `F(theta_t, eta_x)` at a fitted cell.
    pub fn eval(&self, t: i32, x: i32) -> Result<f64> {
        if !self.window.contains(t, x) {
            return Err(Error::Domain(format!("(t={t}, x={x}) outside {}", self.window)));
        }
        self.eval_at_index(&self.index(t)?, x)
    }

    pub fn grid(&self) -> Grid {
        Grid::from_fn(self.window, |t, x| self.eval(t, x).expect("cell in window"))
    }

    /// Rows of `series,t_or_x,component,value`.
    pub fn csv_rows(&self, role: ParamRole) -> Vec<(String, i32, usize, f64)> {
        let years = self.window.years();
        let ages = self.window.ages();
        let mut rows = Vec::new();
        match &self.kind {
            BaselineKind::GompertzPerYear { level, slope } => {
                let name = role.index_name();
                for (i, t) in years.enumerate() {
                    rows.push((name.to_string(), t, 1, level[i]));
                    rows.push((name.to_string(), t, 2, slope[i]));
                }
            }
            BaselineKind::ConstantPerYear { level } => {
                let name = role.index_name();
                for (i, t) in years.enumerate() {
                    rows.push((name.to_string(), t, 1, level[i]));
                }
            }
            BaselineKind::LeeCarter { a, b, k } => {
                for (j, x) in ages.enumerate() {
                    rows.push(("a".to_string(), x, 1, a[j]));
                    rows.push(("b".to_string(), x, 1, b[j]));
                }
                for (i, t) in years.enumerate() {
                    rows.push(("k".to_string(), t, 1, k[i]));
                }
            }
        }
        rows
    }

    /// Rebuilds parameters from CSV rows written by [`csv_rows`](Self::csv_rows).
    pub fn from_csv_rows(
        model: BaselineModel,
        role: ParamRole,
        window: LexisWindow,
        rows: &[(String, i32, usize, f64)],
    ) -> Result<Self> {
        let pick = |series: &str, component: usize, keys: &mut dyn Iterator<Item = i32>| -> Result<Vec<f64>> {
            keys.map(|key| {
                rows.iter()
                    .find(|(s, k, c, _)| s == series && *k == key && *c == component)
                    .map(|r| r.3)
                    .ok_or_else(|| Error::Structure(format!("parameter {series}[{key}].{component} missing")))
            })
            .collect()
        };
        let name = role.index_name();
        let kind = match model {
            BaselineModel::GompertzPerYear => BaselineKind::GompertzPerYear {
                level: pick(name, 1, &mut window.years())?,
                slope: pick(name, 2, &mut window.years())?,
            },
            BaselineModel::ConstantPerYear => {
                BaselineKind::ConstantPerYear { level: pick(name, 1, &mut window.years())? }
            }
            BaselineModel::LeeCarter => BaselineKind::LeeCarter {
                a: pick("a", 1, &mut window.ages())?,
                b: pick("b", 1, &mut window.ages())?,
                k: pick("k", 1, &mut window.years())?,
            },
        };
        Self::new(window, kind)
    }
}

/// Whether a parameter set describes the frailty-loaded or the background term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Baseline,
    Background,
}

impl ParamRole {
    fn index_name(self) -> &'static str {
        match self {
            ParamRole::Baseline => "theta",
            ParamRole::Background => "zeta",
        }
    }
}

pub fn write_params_csv<W: Write>(mut out: W, sets: &[(&BaselineParams, ParamRole)]) -> io::Result<()> {
    writeln!(out, "series,t_or_x,component,value")?;
    for (params, role) in sets {
        for (s, key, c, v) in params.csv_rows(*role) {
            writeln!(out, "{s},{key},{c},{}", fmt_f64(v))?;
        }
    }
    Ok(())
}

pub fn read_params_csv(text: &str) -> Result<Vec<(String, i32, usize, f64)>> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::Parse { line: i + 1, message: format!("bad parameter row '{line}'") };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok((
                f[0].to_string(),
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
                f[3].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> LexisWindow {
        LexisWindow::new(2000, 2001, 59, 61).unwrap()
    }

    #[test]
    fn closed_form_evaluations() {
        let g = BaselineParams::gompertz(w(), vec![-10.0, -10.0], vec![0.1, 0.1]).unwrap();
        assert!((g.eval(2000, 60).unwrap() - (-4.0f64).exp()).abs() < 1e-16);
        assert!((g.eval(2000, 60).unwrap() - 0.0183156).abs() < 1e-7);

        let lc = BaselineParams::lee_carter(w(), vec![-4.0; 3], vec![0.02; 3], vec![0.0, 0.0]).unwrap();
        assert_eq!(lc.eval(2001, 60).unwrap(), (-4.0f64).exp());

        let c = BaselineParams::constant(w(), vec![-6.0, -6.0]).unwrap();
        assert_eq!(c.eval(2000, 59).unwrap(), c.eval(2000, 61).unwrap());
        assert_eq!(c.eval(2000, 59).unwrap(), (-6.0f64).exp());
    }

    #[test]
    fn out_of_window_is_domain_error() {
        let c = BaselineParams::constant(w(), vec![-6.0, -6.0]).unwrap();
        assert!(matches!(c.eval(1999, 60), Err(Error::Domain(_))));
        assert!(matches!(c.eval(2000, 62), Err(Error::Domain(_))));
        assert!(BaselineParams::constant(w(), vec![-6.0]).is_err());
    }

    #[test]
    fn params_csv_round_trip() {
        let lc = BaselineParams::lee_carter(w(), vec![-4.0, -3.9, -3.8], vec![0.3, 0.3, 0.4], vec![-3.2, 3.2]).unwrap();
        let bg = BaselineParams::constant(w(), vec![-7.0, -7.1]).unwrap();
        let mut buf = Vec::new();
        write_params_csv(&mut buf, &[(&lc, ParamRole::Baseline), (&bg, ParamRole::Background)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("k,2000,1,-3.2\n"));
        let rows = read_params_csv(&text).unwrap();
        let lc2 = BaselineParams::from_csv_rows(BaselineModel::LeeCarter, ParamRole::Baseline, w(), &rows).unwrap();
        let bg2 =
            BaselineParams::from_csv_rows(BaselineModel::ConstantPerYear, ParamRole::Background, w(), &rows).unwrap();
        assert_eq!(lc2, lc);
        assert_eq!(bg2, bg);
    }
}
