//! Subcommands: evaluation, fitting and artifact writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use oscmeas::analysis::{
    analytic_wavenumber, fit_oscillation, standard_wavenumber, threshold_corrected_wavenumber, threshold_scan,
    FitOptions, InterferenceTerm, ScanPipeline, ThresholdScanResult,
};
use oscmeas::engine::{evaluate, DetectionCurve, Method};
use serde::Serialize;
use thiserror::Error;

use crate::config::{parse_scenario, DetectionSpec, Issue, RunSpec, ScenarioFile, ScenarioSpec, SCHEMA_VERSION};
use crate::output::{density_table, emit_plot_data};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Density,
    Baselines,
    Fit,
    Scan,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Density => "density",
            Command::Baselines => "baselines",
            Command::Fit => "fit",
            Command::Scan => "scan",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    /// Overrides `run.quadrature_tolerance`.
    pub quadrature_tol: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario file:\n{}", format_issues(.0))]
    Config(Vec<Issue>),
    #[error(transparent)]
    Core(#[from] oscmeas::Error),
    #[error("{0}")]
    Io(String),
    #[error("fit incomplete: {0}")]
    Fit(String),
}

fn format_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// 1 for invalid input, 2 for accuracy or budget failures, 3 for fits.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                oscmeas::Error::Accuracy { .. } | oscmeas::Error::Budget(_) => 2,
                oscmeas::Error::FitFailed(_) | oscmeas::Error::IndeterminateFrequency { .. } => 3,
                _ => 1,
            },
            CliError::Fit(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSummary {
    pub mass: f64,
    pub momentum: f64,
    pub width: f64,
    pub energy: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameters {
    pub scenario: ScenarioSpec,
    pub states: Vec<StateSummary>,
    pub detection: DetectionSpec,
    pub saddle_rates: Vec<f64>,
    pub run: RunSpec,
    /// Starting window of the automatic `T` search.
    pub initial_auto_window: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairWavenumbers {
    pub i: usize,
    pub j: usize,
    pub analytic: f64,
    pub standard: f64,
    pub threshold_corrected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub method: Method,
    pub t_final: Option<f64>,
    pub log_scale: f64,
    pub window_doublings: usize,
    pub relative_change: f64,
    pub nodes: usize,
    pub imag_residual: f64,
    pub clamped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_rms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_to_standard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_to_analytic: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub amplitudes: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<InterferenceTerm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    #[serde(flatten)]
    pub result: ThresholdScanResult,
    pub method: Method,
    pub partial: bool,
    pub slope_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: i64,
    pub command: &'static str,
    pub parameters: Parameters,
    pub analytic: Vec<PairWavenumbers>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<CurveSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<FitSummary>,
    /// `"a/b"` → `k_fit(a) / k_fit(b)` over successful fits.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub ratios: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSummary>,
}

pub fn load(path: &Path, options: &Options) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut file = parse_scenario(&text).map_err(CliError::Config)?;
    if let Some(tol) = options.quadrature_tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Config(vec![Issue {
                path: "--quadrature-tol".into(),
                message: format!("must lie in (0, 1), got {tol}"),
            }]));
        }
        file.run.quadrature_tolerance = tol;
        file.request.quadrature.tolerance = tol;
    }
    Ok(file)
}

fn parameters(file: &ScenarioFile) -> Parameters {
    let states = file
        .oscillation()
        .states()
        .iter()
        .map(|s| StateSummary {
            mass: s.mass,
            momentum: s.momentum,
            width: s.decay_rate,
            energy: s.energy(),
            velocity: s.velocity(),
        })
        .collect();
    Parameters {
        scenario: file.scenario.clone(),
        states,
        detection: file.detection.clone(),
        saddle_rates: file.detector().saddle_rates(),
        run: file.run.clone(),
        initial_auto_window: file.request.initial_auto_window(),
    }
}

fn analytic(file: &ScenarioFile) -> Vec<PairWavenumbers> {
    let (s, d) = (file.oscillation(), file.detector());
    let mut out = Vec::new();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            out.push(PairWavenumbers {
                i,
                j,
                analytic: analytic_wavenumber(s, d, i, j),
                standard: standard_wavenumber(s, i, j),
                threshold_corrected: threshold_corrected_wavenumber(s, d, i, j),
            });
        }
    }
    out
}

fn curve_summary(method: Method, curve: &DetectionCurve) -> CurveSummary {
    let m = &curve.metadata;
    CurveSummary {
        method,
        t_final: m.t_final,
        log_scale: m.log_scale,
        window_doublings: m.window_doublings,
        relative_change: m.relative_change,
        nodes: m.nodes,
        imag_residual: m.imag_residual,
        clamped: m.clamped,
    }
}

fn require_fit_grid(file: &ScenarioFile) -> Result<(), CliError> {
    let sigma = file.scenario.sigma;
    if file.run.lengths.start < 6.0 * sigma {
        return Err(CliError::Config(vec![Issue {
            path: "run.lengths.start".into(),
            message: format!(
                "fits need L >= 6 sigma = {} (the damped-cosine form ignores the source edge)",
                6.0 * sigma
            ),
        }]));
    }
    Ok(())
}

fn fit_options(file: &ScenarioFile) -> FitOptions {
    FitOptions::new(file.run.flavor).with_start(file.run.fit_start)
}

fn fit_curve(file: &ScenarioFile, method: Method, curve: &DetectionCurve) -> FitSummary {
    let (s, d) = (file.oscillation(), file.detector());
    match fit_oscillation(curve, s, d, &fit_options(file)) {
        Ok(fit) => {
            let term = &fit.terms[0];
            let (i, j) = (term.i, term.j);
            FitSummary {
                method,
                wavenumber: Some(fit.wavenumber),
                uncertainty: Some(fit.wavenumber_uncertainty),
                residual_rms: Some(fit.residual_rms),
                ratio_to_standard: Some(fit.wavenumber / standard_wavenumber(s, i, j).abs()),
                ratio_to_analytic: Some(fit.wavenumber / analytic_wavenumber(s, d, i, j).abs()),
                amplitudes: fit.amplitudes,
                terms: fit.terms,
                error: None,
            }
        }
        Err(e) => FitSummary {
            method,
            wavenumber: None,
            uncertainty: None,
            residual_rms: None,
            ratio_to_standard: None,
            ratio_to_analytic: None,
            amplitudes: Vec::new(),
            terms: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn ratios(fits: &[FitSummary]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for a in fits {
        for b in fits {
            if let (Some(ka), Some(kb)) = (a.wavenumber, b.wavenumber) {
                if a.method != b.method {
                    out.insert(format!("{}/{}", a.method.as_str(), b.method.as_str()), ka / kb);
                }
            }
        }
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Output directory: `--out`, else `output.directory`, else the working directory.
pub fn output_dir(file: &ScenarioFile, options: &Options) -> PathBuf {
    options
        .out
        .clone()
        .or_else(|| file.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs `command` on a loaded scenario; artifacts are written before a fit
/// failure is reported.
pub fn execute(command: Command, file: &ScenarioFile, options: &Options) -> Result<Summary, CliError> {
    let mut summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: command.as_str(),
        parameters: parameters(file),
        analytic: analytic(file),
        curves: Vec::new(),
        fits: Vec::new(),
        ratios: BTreeMap::new(),
        scan: None,
    };
    if command == Command::Validate {
        return Ok(summary);
    }
    let dir = output_dir(file, options);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let mut failure = None;
    match command {
        Command::Validate => unreachable!(),
        Command::Density | Command::Baselines | Command::Fit => {
            if command != Command::Density {
                require_fit_grid(file)?;
            }
            let methods: Vec<Method> = if command == Command::Baselines {
                Method::ALL.to_vec()
            } else {
                file.run.methods.clone()
            };
            let mut curves = Vec::new();
            for &method in &methods {
                log::info!("evaluating {}", method.as_str());
                let curve = evaluate(&file.request, method)?;
                summary.curves.push(curve_summary(method, &curve));
                curves.push((method, curve));
            }
            if command != Command::Density {
                for (method, curve) in &curves {
                    let fit = fit_curve(file, *method, curve);
                    if let Some(e) = &fit.error {
                        log::warn!("fit of {} failed: {e}", method.as_str());
                        failure.get_or_insert_with(|| format!("{}: {e}", method.as_str()));
                    }
                    summary.fits.push(fit);
                }
                summary.ratios = ratios(&summary.fits);
            }
            write(&dir, &file.output.density_file, &density_table(&curves))?;
            write(&dir, &file.output.plot_file, &emit_plot_data(&curves))?;
        }
        Command::Scan => {
            require_fit_grid(file)?;
            if file.run.thresholds.is_empty() {
                return Err(CliError::Config(vec![Issue {
                    path: "run.thresholds".into(),
                    message: "the scan command needs at least one threshold".into(),
                }]));
            }
            let mut pipeline = ScanPipeline::new(file.request.clone());
            pipeline.method = file.run.scan_method;
            pipeline.fit = fit_options(file);
            let result = threshold_scan(&file.run.thresholds, &pipeline)?;
            if result.is_partial() {
                failure = Some(format!(
                    "{} of {} scan points failed",
                    result.failures.len(),
                    file.run.thresholds.len()
                ));
            }
            summary.scan = Some(ScanSummary {
                method: pipeline.method,
                partial: result.is_partial(),
                slope_deviation: result.slope_deviation(),
                result,
            });
        }
    }
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    write(&dir, &file.output.summary_file, &json)?;
    match failure {
        Some(message) => Err(CliError::Fit(message)),
        None => Ok(summary),
    }
}
