//! The four commands. Everything numerical is delegated to `frailty_core`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use frailty_core::baseline::{read_params_csv, write_params_csv, ParamRole};
use frailty_core::data::{
    build_surface, cumulative_hazard, death_rates, parse_hmd_table, simulate_surface, write_grid_csv, write_hmd_table,
};
use frailty_core::estimation::{
    backtest_sigma2, em_fit_additive, fit_fixed_frailty_with, profile_fit, write_profile_points, BacktestConfig,
    EmControl, FittedModel, FrailtyChoice, ModelMode, ProfilePoint, SearchConfig,
};
use frailty_core::forecast::{forecast, write_life_expectancy_csv, ForecastOptions, IndexForecastOptions};
use frailty_core::numeric::fmt_f64;
use frailty_core::{BaselineModel, BaselineParams, FrailtyFamily, FrailtySpec, LexisWindow, MortalitySurface};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory plus the manifest being assembled.
pub struct Run {
    command: &'static str,
    settings: Settings,
    out: PathBuf,
    inputs: Map<String, Value>,
    results: Map<String, Value>,
    outputs: Vec<String>,
}

impl Run {
    /// Nothing is created on disk until the first output is written.
    pub fn new(command: &'static str, settings: Settings, out: PathBuf) -> Self {
        Run { command, settings, out, inputs: Map::new(), results: Map::new(), outputs: Vec::new() }
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Output(format!("cannot create {}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn result(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_string(), value);
    }

    fn read_input(&mut self, key: &str) -> Result<String, CliError> {
        let path = self.settings.path(key)?;
        let bytes = fs::read(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.inputs
            .insert(key.to_string(), json!({ "path": path.display().to_string(), "sha256": sha256_hex(&bytes) }));
        String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{}: not UTF-8 text", path.display())))
    }

    fn surface(&mut self, window: LexisWindow) -> Result<MortalitySurface, CliError> {
        let sex = self.settings.sex()?;
        let mut table = |key: &str| -> Result<_, CliError> {
            let text = self.read_input(key)?;
            parse_hmd_table(&text, sex).map_err(|e| CliError::Data(format!("{key} file: {e}")))
        };
        let (d, e) = (table("deaths")?, table("exposures")?);
        Ok(build_surface(&d, &e, window)?)
    }

    /// Writes `config.txt` (rerunnable as `--config`) and `manifest.json`.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        let echo = self.settings.echo_resolved();
        self.write("config.txt", |w| w.write_all(echo.as_bytes()))?;
        let config: Map<String, Value> =
            self.settings.pairs().map(|(k, v)| (k.to_string(), Value::String(v.to_string()))).collect();
        let manifest = json!({
            "command": self.command,
            "versions": { "frailty-cli": env!("CARGO_PKG_VERSION"), "frailty-core": frailty_core::VERSION },
            "config": config,
            "seed": self.settings.u64("seed")?,
            "inputs": self.inputs,
            "results": self.results,
            "outputs": self.outputs,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
        fs::write(self.out.join("manifest.json"), text)
            .map_err(|e| CliError::Output(format!("{}: {e}", self.out.display())))?;
        Ok(self.out)
    }
}

fn search_config(s: &Settings) -> Result<SearchConfig, CliError> {
    let upper = s.f64("sigma2_upper")?;
    let tol = s.f64("sigma2_tol")?;
    if upper <= 0.0 || tol <= 0.0 {
        return Err(CliError::Config("sigma2_upper and sigma2_tol must be positive".into()));
    }
    Ok(SearchConfig { sigma2_upper: upper, sigma2_tol: tol, ..SearchConfig::default() })
}

/// The configured frailty when `sigma2` is given, `None` when it is to be estimated.
fn fixed_frailty(s: &Settings) -> Result<Option<FrailtySpec>, CliError> {
    let family = s.family()?;
    let sigma2 = s.f64_opt("sigma2")?;
    let alpha = s.f64_opt("alpha")?;
    if alpha.is_some() && family != FrailtyFamily::Stable {
        return Err(CliError::Config(format!("alpha: only used with frailty = stable, not {}", family.name())));
    }
    match (family, sigma2) {
        (FrailtyFamily::Degenerate, None | Some(0.0)) => Ok(Some(FrailtySpec::Degenerate)),
        (FrailtyFamily::Degenerate, Some(v)) => {
            Err(CliError::Config(format!("sigma2: frailty = none takes no variance, got {v}")))
        }
        (_, None) => Ok(None),
        (_, Some(v)) if v < 0.0 => Err(CliError::Config(format!("sigma2: must be non-negative, got {v}"))),
        (FrailtyFamily::Stable, Some(v)) => {
            let a = alpha
                .ok_or_else(|| CliError::Config("alpha: required with frailty = stable and a fixed sigma2".into()))?;
            Ok(Some(FrailtyFamily::Stable.with_params(v, a).map_err(|e| CliError::Config(format!("alpha: {e}")))?))
        }
        (f, Some(v)) => Ok(Some(f.with_params(v, 0.0)?)),
    }
}

/// Fits the configured model; the profile points are empty for a fixed frailty.
pub fn fit_model(s: &Settings, surface: &MortalitySurface) -> Result<(FittedModel, Vec<ProfilePoint>), CliError> {
    let mode = s.mode()?;
    let model = s.baseline()?;
    let search = search_config(s)?;
    let fixed = fixed_frailty(s)?;
    if mode == ModelMode::CohortAdditive {
        let background = s.model("background")?;
        let choice = match fixed {
            Some(spec) => FrailtyChoice::Fixed(spec),
            None => FrailtyChoice::Profile { family: s.family()?, search: search.clone() },
        };
        let control = EmControl { fit: search.fit, ..EmControl::default() };
        let p = em_fit_additive(&choice, surface, model, Some(background), &control)?;
        return Ok((p.fitted, p.evaluations));
    }
    match fixed {
        Some(spec) => Ok((fit_fixed_frailty_with(&spec, surface, mode, model, &search.fit)?, Vec::new())),
        None => {
            let p = profile_fit(s.family()?, surface, mode, model, &search)?;
            Ok((p.fitted, p.evaluations))
        }
    }
}

fn frailty_json(spec: &FrailtySpec) -> Value {
    json!({ "family": spec.family().name(), "sigma2": spec.sigma2(), "alpha": spec.alpha() })
}

fn param_sets(fitted: &FittedModel) -> Vec<(&BaselineParams, ParamRole)> {
    let mut sets = vec![(&fitted.baseline, ParamRole::Baseline)];
    if let Some(g) = &fitted.background {
        sets.push((g, ParamRole::Background));
    }
    sets
}

pub fn cmd_fit(run: &mut Run) -> Result<(), CliError> {
    let window = run.settings.window()?;
    let surface = run.surface(window)?;
    let (fitted, points) = fit_model(&run.settings, &surface)?;
    let mu = fitted.fitted_rates()?;

    run.write("params.csv", |w| write_params_csv(w, &param_sets(&fitted)))?;
    run.write("trace.csv", |w| fitted.write_trace_csv(w))?;
    run.write("fitted_mu.csv", |w| write_grid_csv(w, &mu, "mu"))?;
    if !points.is_empty() {
        run.write("profile.csv", |w| write_profile_points(w, &points))?;
    }
    run.result("frailty", frailty_json(&fitted.frailty));
    run.result("mode", json!(fitted.mode.name()));
    run.result("loglik", json!(fitted.loglik));
    run.result("loglik_offset", json!(fitted.loglik_offset));
    run.result("iterations", json!(fitted.iterations));
    run.result("floored_cells", json!(fitted.floored_cells));
    Ok(())
}

fn read_fit_manifest(dir: &Path) -> Result<Value, CliError> {
    let path = dir.join("manifest.json");
    let text =
        fs::read_to_string(&path).map_err(|e| CliError::Config(format!("fit artifacts: {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if v["command"] != "fit" {
        return Err(CliError::Config(format!("{} is not a fit run", dir.display())));
    }
    Ok(v)
}

/// Rebuilds the fitted model from a fit run directory and the data it names.
///
/// Parameters are stored in shortest round-trip form, so the model is
/// bit-identical to the one the fit produced.
fn load_fit(run: &mut Run, dir: &Path) -> Result<FittedModel, CliError> {
    let manifest = read_fit_manifest(dir)?;
    let s = &run.settings;
    let window = s.window()?;
    let mode = s.mode()?;
    let model = s.baseline()?;
    let number = |v: &Value, what: &str| {
        v.as_f64().ok_or_else(|| CliError::Data(format!("fit manifest: {what} missing or not a number")))
    };
    let r = &manifest["results"];
    let family = r["frailty"]["family"]
        .as_str()
        .and_then(FrailtyFamily::parse)
        .ok_or_else(|| CliError::Data("fit manifest: frailty family missing".into()))?;
    let sigma2 = number(&r["frailty"]["sigma2"], "sigma2")?;
    let alpha = r["frailty"]["alpha"].as_f64().unwrap_or(0.0);
    let frailty = family.with_params(sigma2, alpha)?;

    let params_path = dir.join("params.csv");
    let text = fs::read_to_string(&params_path)
        .map_err(|e| CliError::Config(format!("fit artifacts: {}: {e}", params_path.display())))?;
    let rows = read_params_csv(&text)?;
    let baseline = BaselineParams::from_csv_rows(model, ParamRole::Baseline, window, &rows)?;
    let background = if mode == ModelMode::CohortAdditive {
        Some(BaselineParams::from_csv_rows(s.model("background")?, ParamRole::Background, window, &rows)?)
    } else {
        None
    };
    let loglik = number(&r["loglik"], "loglik")?;
    let loglik_offset = number(&r["loglik_offset"], "loglik_offset")?;

    let surface = run.surface(window)?;
    for key in ["deaths", "exposures"] {
        if manifest["inputs"][key]["sha256"] != run.inputs[key]["sha256"] {
            return Err(CliError::Data(format!("{key} file changed since the fit in {}", dir.display())));
        }
    }
    let g = background.as_ref().map(BaselineParams::grid);
    let hazard = cumulative_hazard(&death_rates(&surface), mode.hazard_mode(), g.as_ref())?;
    let floored_cells = hazard.floored().1;
    Ok(FittedModel {
        frailty,
        baseline,
        background,
        hazard_table: hazard,
        mode,
        loglik,
        loglik_offset,
        trace: Vec::new(),
        iterations: 0,
        floored_cells,
    })
}

pub fn cmd_forecast(run: &mut Run, fit_dir: &Path) -> Result<(), CliError> {
    let fitted = load_fit(run, fit_dir)?;
    let horizon = run.settings.usize("horizon")?;
    let draws = run.settings.usize("draws")?;
    let seed = run.settings.u64("seed")?;
    let e_age = run.settings.i32("e_age")?;
    run.inputs.insert(
        "fit".into(),
        json!({ "path": fit_dir.display().to_string(),
        "sha256": sha256_hex(&fs::read(fit_dir.join("params.csv"))?) }),
    );

    let mu = fitted.fitted_rates()?;
    run.write("fitted_mu.csv", |w| write_grid_csv(w, &mu, "mu"))?;
    run.result("horizon", json!(horizon));
    if horizon == 0 {
        return Ok(());
    }
    let options = ForecastOptions { index: IndexForecastOptions { draws, seed }, life_expectancy_age: e_age };
    let res = forecast(&fitted, horizon, &options)?;
    run.write("index.csv", |w| res.index.write_csv(w))?;
    if draws > 0 {
        run.write("index_draws.csv", |w| {
            writeln!(w, "path,t,component,value")?;
            for (k, path) in res.index.draws.iter().enumerate() {
                for (j, step) in path.iter().enumerate() {
                    for (c, v) in step.iter().enumerate() {
                        writeln!(w, "{},{},{},{}", k + 1, res.index.first_year + j as i32, c + 1, fmt_f64(*v))?;
                    }
                }
            }
            Ok(())
        })?;
    }
    run.write("forecast_mu.csv", |w| write_grid_csv(w, &res.mu, "mu"))?;
    match &res.life_expectancy {
        Some(e) => {
            run.write("life_expectancy.csv", |w| write_life_expectancy_csv(w, e))?;
            run.result("life_expectancy_last", json!(e.last().map(|p| p.1)));
        }
        None => eprintln!("note: ages do not reach 90 from {e_age} or below; no life expectancy written"),
    }
    run.result("drift", json!(res.drift.drift));
    run.result("drift_cov", json!(res.drift.cov));
    Ok(())
}

pub fn cmd_backtest(run: &mut Run) -> Result<(), CliError> {
    let s = &run.settings;
    let fit_w = s.window()?;
    let test_t_max = s.i32("test_t_max")?;
    if test_t_max <= fit_w.t_max {
        return Err(CliError::Config(format!("test_t_max ({test_t_max}) must be after t_max ({})", fit_w.t_max)));
    }
    let family = s.family()?;
    if family == FrailtyFamily::Degenerate || family == FrailtyFamily::Stable {
        return Err(CliError::Config(format!(
            "frailty: back-test needs gamma or inverse-gaussian, got {}",
            family.name()
        )));
    }
    let (step, max) = (s.f64("curve_step")?, s.f64("curve_max")?);
    if step <= 0.0 || max < 0.0 {
        return Err(CliError::Config("curve_step must be positive and curve_max non-negative".into()));
    }
    let n = (max / step + 1e-9).floor() as usize;
    let config = BacktestConfig {
        family,
        model: s.baseline()?,
        curve: (0..=n).map(|i| i as f64 * step).collect(),
        search: search_config(s)?,
    };
    let test_w = LexisWindow::new(fit_w.t_max + 1, test_t_max, fit_w.x_min, fit_w.x_max)?;
    let all = LexisWindow::new(fit_w.t_min, test_t_max, fit_w.x_min, fit_w.x_max)?;
    let surface = run.surface(all)?;
    let res = backtest_sigma2(&surface, &fit_w, &test_w, &config)?;
    run.write("curve.csv", |w| res.write_curve_csv(w))?;
    run.result("sigma2", json!(res.sigma2));
    run.result("f", json!(res.f));
    Ok(())
}

fn sim_truth(s: &Settings, window: LexisWindow) -> Result<BaselineParams, CliError> {
    let model = s.baseline()?;
    if s.get("sim_params").is_some() {
        let path = s.path("sim_params")?;
        let text = fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        return Ok(BaselineParams::from_csv_rows(model, ParamRole::Baseline, window, &read_params_csv(&text)?)?);
    }
    if model != BaselineModel::GompertzPerYear {
        return Err(CliError::Config(format!("sim_params: required for baseline {}", model.name())));
    }
    let n = window.n_years();
    let (l0, dl) = (s.f64("sim_level")?, s.f64("sim_level_drift")?);
    let (s0, ds) = (s.f64("sim_slope")?, s.f64("sim_slope_drift")?);
    Ok(BaselineParams::gompertz(
        window,
        (0..n).map(|i| l0 + dl * i as f64).collect(),
        (0..n).map(|i| s0 + ds * i as f64).collect(),
    )?)
}

pub fn cmd_simulate(run: &mut Run) -> Result<(), CliError> {
    let s = &run.settings;
    let window = s.window()?;
    let frailty = fixed_frailty(s)?
        .ok_or_else(|| CliError::Config("sigma2: required for simulate unless frailty = none".into()))?;
    let truth = sim_truth(s, window)?;
    let background = s
        .f64_opt("sim_background")?
        .map(|g| {
            if g > 0.0 {
                Ok(BaselineParams::constant(window, vec![g.ln(); window.n_years()])?)
            } else {
                Err(CliError::Config(format!("sim_background: must be positive, got {g}")))
            }
        })
        .transpose()?;
    let exposure = s.f64("sim_exposure")?;
    if exposure <= 0.0 {
        return Err(CliError::Config(format!("sim_exposure: must be positive, got {exposure}")));
    }
    let seed = s.u64("seed")?;
    let surface = simulate_surface(&frailty, &truth, background.as_ref(), window, exposure, seed)?;

    run.write("Deaths_1x1.txt", |w| write_hmd_table(w, "Simulated deaths (period 1x1)", surface.deaths()))?;
    run.write("Exposures_1x1.txt", |w| write_hmd_table(w, "Simulated exposures (period 1x1)", surface.exposures()))?;
    let mut sets = vec![(&truth, ParamRole::Baseline)];
    if let Some(g) = &background {
        sets.push((g, ParamRole::Background));
    }
    run.write("truth_params.csv", |w| write_params_csv(w, &sets))?;
    run.result("frailty", frailty_json(&frailty));
    run.result("total_deaths", json!(surface.deaths().values().iter().sum::<f64>()));
    Ok(())
}
