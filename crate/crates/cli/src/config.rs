//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use frailty_core::data::Sex;
use frailty_core::estimation::ModelMode;
use frailty_core::{BaselineModel, FrailtyFamily, LexisWindow};

use crate::error::CliError;

/// Every recognised key with its default (`None` = unset unless given).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("deaths", None),
    ("exposures", None),
    ("sex", Some("male")),
    ("t_min", None),
    ("t_max", None),
    ("x_min", None),
    ("x_max", None),
    ("baseline", Some("gompertz")),
    ("frailty", Some("none")),
    ("sigma2", None),
    ("alpha", None),
    ("mode", Some("cohort")),
    ("background", Some("constant")),
    ("sigma2_upper", Some("2")),
    ("sigma2_tol", Some("1e-7")),
    ("horizon", Some("0")),
    ("draws", Some("0")),
    ("seed", Some("1")),
    ("e_age", Some("60")),
    ("test_t_max", None),
    ("curve_step", Some("0.05")),
    ("curve_max", Some("2")),
    ("sim_exposure", Some("1e6")),
    ("sim_level", Some("-10.5")),
    ("sim_level_drift", Some("-0.015")),
    ("sim_slope", Some("0.095")),
    ("sim_slope_drift", Some("0")),
    ("sim_params", None),
    ("sim_background", None),
    ("threads", Some("0")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
    /// Directory relative paths are resolved against.
    base: PathBuf,
}

fn known(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown key '{key}'")))
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("{origin}:{}: expected key = value, got '{line}'", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        known(k).map_err(|e| CliError::Config(format!("{origin}:{}: {e}", i + 1)))?;
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(CliError::Config(format!("{origin}:{}: key '{k}' given twice", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl Settings {
    pub fn defaults(base: PathBuf) -> Self {
        let values = KEYS.iter().filter_map(|(k, d)| d.map(|d| (k.to_string(), d.to_string()))).collect();
        Settings { values, base }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut s = Settings::defaults(base);
        for (k, v) in parse_pairs(&text, &path.display().to_string())? {
            s.values.insert(k, v);
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        known(key)?;
        if value.is_empty() {
            self.values.remove(key);
        } else {
            self.values.insert(key.to_string(), value.to_string());
        }
        Ok(())
    }

    /// `KEY=VALUE` from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{pair}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| CliError::Config(format!("{key}: expected {what}, got '{v}'"))))
            .transpose()
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        let v: Option<f64> = self.parsed(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(CliError::Config(format!("{key}: expected a finite number, got {x}"))),
            _ => Ok(v),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.require(key)?;
        Ok(self.f64_opt(key)?.unwrap())
    }

    pub fn i32(&self, key: &str) -> Result<i32, CliError> {
        self.require(key)?;
        Ok(self.parsed(key, "an integer")?.unwrap())
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.require(key)?;
        Ok(self.parsed(key, "a non-negative integer")?.unwrap())
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.require(key)?;
        Ok(self.parsed(key, "a non-negative integer")?.unwrap())
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        let p = PathBuf::from(self.require(key)?);
        let p = if p.is_absolute() { p } else { self.base.join(p) };
        if !p.is_file() {
            return Err(CliError::Config(format!("{key}: file {} does not exist", p.display())));
        }
        Ok(p)
    }

    /// Years `t_min..=t_max` and ages `x_min..=x_max`.
    pub fn window(&self) -> Result<LexisWindow, CliError> {
        let (t_min, t_max) = (self.i32("t_min")?, self.i32("t_max")?);
        let (x_min, x_max) = (self.i32("x_min")?, self.i32("x_max")?);
        if t_min > t_max {
            return Err(CliError::Config(format!("t_min ({t_min}) is greater than t_max ({t_max})")));
        }
        if x_min > x_max {
            return Err(CliError::Config(format!("x_min ({x_min}) is greater than x_max ({x_max})")));
        }
        if x_min < 0 {
            return Err(CliError::Config(format!("x_min ({x_min}) is negative")));
        }
        LexisWindow::new(t_min, t_max, x_min, x_max).map_err(|e| CliError::Config(format!("x_max: {e}")))
    }

    pub fn sex(&self) -> Result<Sex, CliError> {
        let v = self.require("sex")?;
        Sex::parse(v).ok_or_else(|| CliError::Config(format!("sex: expected female, male or total, got '{v}'")))
    }

    pub fn baseline(&self) -> Result<BaselineModel, CliError> {
        self.model("baseline")
    }

    pub fn model(&self, key: &str) -> Result<BaselineModel, CliError> {
        let v = self.require(key)?;
        BaselineModel::parse(v)
            .ok_or_else(|| CliError::Config(format!("{key}: expected gompertz, constant or lee-carter, got '{v}'")))
    }

    pub fn family(&self) -> Result<FrailtyFamily, CliError> {
        let v = self.require("frailty")?;
        FrailtyFamily::parse(v).ok_or_else(|| {
            CliError::Config(format!("frailty: expected none, gamma, inverse-gaussian or stable, got '{v}'"))
        })
    }

    pub fn mode(&self) -> Result<ModelMode, CliError> {
        let v = self.require("mode")?;
        ModelMode::parse(v)
            .ok_or_else(|| CliError::Config(format!("mode: expected cohort, period or additive, got '{v}'")))
    }

    /// Resolved settings, one `key = value` line each, in key order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            if let Some(v) = self.values.get(*k) {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// The same as [`echo`](Self::echo) with paths made absolute, so the file can be used from anywhere.
    pub fn echo_resolved(&self) -> String {
        let mut copy = self.clone();
        for key in ["deaths", "exposures", "sim_params"] {
            if let Some(v) = self.get(key) {
                let p = PathBuf::from(v);
                if p.is_relative() {
                    let joined = self.base.join(p);
                    let abs = joined.canonicalize().unwrap_or(joined);
                    copy.values.insert(key.into(), abs.display().to_string());
                }
            }
        }
        copy.echo()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        KEYS.iter().filter_map(|(k, _)| self.values.get(*k).map(|v| (*k, v.as_str())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_defaults_and_overrides() {
        let mut s = Settings::defaults(PathBuf::new());
        for (k, v) in parse_pairs("# run\nt_min = 1990 # first\n\nt_max=2000\n", "cfg").unwrap() {
            s.set(&k, &v).unwrap();
        }
        s.set_pair("t_max=2001").unwrap();
        assert_eq!(s.get("t_max"), Some("2001"));
        assert_eq!(s.get("baseline"), Some("gompertz"));
        assert!(s.echo().starts_with("sex = male\nt_min = 1990\nt_max = 2001\n"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_pairs("tmin = 3", "cfg"), Err(CliError::Config(m)) if m.contains("tmin")));
        assert!(parse_pairs("t_min 3", "cfg").is_err());
        assert!(parse_pairs("seed = 1\nseed = 2", "cfg").is_err());
        let mut s = Settings::defaults(PathBuf::new());
        s.set("sigma2", "abc").unwrap();
        assert!(matches!(s.f64_opt("sigma2"), Err(CliError::Config(m)) if m.starts_with("sigma2")));
    }

    #[test]
    fn window_order_is_checked() {
        let mut s = Settings::defaults(PathBuf::new());
        for (k, v) in [("t_min", "2010"), ("t_max", "2000"), ("x_min", "40"), ("x_max", "90")] {
            s.set(k, v).unwrap();
        }
        match s.window() {
            Err(CliError::Config(m)) => assert!(m.contains("t_min") && m.contains("t_max")),
            other => panic!("{other:?}"),
        }
    }
}
