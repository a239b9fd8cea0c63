//! Scenario files (TOML, `schema_version = 1`).
//!
//! ```toml
//! schema_version = 1
//!
//! [scenario]
//! masses = [0.1, 0.2]
//! momenta = [10.0, 10.0]
//! widths = [0.0, 0.0]          # optional, default 0
//! sigma = 50.0
//! initial_flavor = 0
//! mixing = { angle = 0.7853981633974483 }
//! # or mixing = { real = [[...], ...], imag = [[...], ...] }   (imag optional)
//!
//! [detection]
//! threshold = 0.0
//! product_masses = [100.0]
//! localization = 1.0
//! constant = 1.0               # optional, default 1
//!
//! [run]
//! flavor = 1
//! lengths = { start = 300.0, stop = 6583.2, count = 181 }
//! methods = ["amplitude_sum", "time_averaged", "equal_time", "component_arrival"]
//! thresholds = [0.0, 1.0, 2.0]  # required by `scan`
//! scan_method = "amplitude_sum" # optional
//! window = "auto"               # "auto", "unbounded" or a number
//! lower_limit = "auto"          # "auto", "finite" or "extended"
//! quadrature_tolerance = 1e-8   # optional
//! fit_start = "scan"            # "scan", "analytic" or a factor of |k_analytic|
//!
//! [output]                      # optional
//! directory = "out"
//! density_file = "density.csv"
//! plot_file = "plot.csv"
//! summary_file = "summary.json"
//! ```

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use oscmeas::analysis::FrequencyStart;
use oscmeas::engine::{length_grid, DensityQuadrature, DensityRequest, LowerLimit, Method, WindowPolicy};
use oscmeas::linalg::CMatrix;
use oscmeas::oscillation::{DetectionModel, MassEigenstate, MixingMatrix, OscillationScenario};
use serde::Serialize;
use toml::{Table, Value};

pub const SCHEMA_VERSION: i64 = 1;

/// One problem found while reading a scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSpec {
    pub masses: Vec<f64>,
    pub momenta: Vec<f64>,
    pub widths: Vec<f64>,
    pub sigma: f64,
    pub initial_flavor: usize,
    pub mixing_angle: Option<f64>,
    pub mixing_real: Vec<Vec<f64>>,
    pub mixing_imag: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionSpec {
    pub threshold: f64,
    pub product_masses: Vec<f64>,
    pub localization: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSpec {
    pub flavor: usize,
    pub lengths: GridSpec,
    pub methods: Vec<Method>,
    pub thresholds: Vec<f64>,
    pub scan_method: Method,
    pub window: WindowPolicy,
    pub lower_limit: LowerLimit,
    pub quadrature_tolerance: f64,
    pub fit_start: FrequencyStart,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSpec {
    pub directory: Option<String>,
    pub density_file: String,
    pub plot_file: String,
    pub summary_file: String,
}

/// A fully validated scenario file together with the objects it describes.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub schema_version: i64,
    pub scenario: ScenarioSpec,
    pub detection: DetectionSpec,
    pub run: RunSpec,
    pub output: OutputSpec,
    pub request: DensityRequest,
}

impl ScenarioFile {
    pub fn oscillation(&self) -> &OscillationScenario {
        &self.request.scenario
    }

    pub fn detector(&self) -> &DetectionModel {
        &self.request.detection
    }
}

/// Reads one table, remembering which keys were consumed.
struct Section<'a> {
    path: String,
    table: &'a Table,
    used: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: &'a Table) -> Self {
        Section {
            path: path.to_string(),
            table,
            used: BTreeSet::new(),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'a str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.get(key)
    }

    fn required(&mut self, key: &'a str, issues: &mut Vec<Issue>) -> Option<&'a Value> {
        let value = self.get(key);
        if value.is_none() {
            issues.push(Issue {
                path: self.key_path(key),
                message: "missing required key".into(),
            });
        }
        value
    }

    fn bad(&self, key: &str, message: impl Into<String>, issues: &mut Vec<Issue>) {
        issues.push(Issue {
            path: self.key_path(key),
            message: message.into(),
        });
    }

    fn number(&mut self, key: &'a str, issues: &mut Vec<Issue>) -> Option<f64> {
        let value = self.required(key, issues)?;
        let out = as_number(value);
        if out.is_none() {
            self.bad(key, "expected a number", issues);
        }
        out
    }

    fn optional_number(&mut self, key: &'a str, default: f64, issues: &mut Vec<Issue>) -> Option<f64> {
        match self.get(key) {
            None => Some(default),
            Some(v) => {
                let out = as_number(v);
                if out.is_none() {
                    self.bad(key, "expected a number", issues);
                }
                out
            }
        }
    }

    fn index(&mut self, key: &'a str, issues: &mut Vec<Issue>) -> Option<usize> {
        let value = self.required(key, issues)?;
        match value.as_integer() {
            Some(n) if n >= 0 => Some(n as usize),
            _ => {
                self.bad(key, "expected a nonnegative integer", issues);
                None
            }
        }
    }

    fn numbers(&mut self, key: &'a str, issues: &mut Vec<Issue>) -> Option<Vec<f64>> {
        let value = self.required(key, issues)?;
        let out = as_numbers(value);
        if out.is_none() {
            self.bad(key, "expected an array of numbers", issues);
        }
        out
    }

    fn optional_numbers(&mut self, key: &'a str, issues: &mut Vec<Issue>) -> Option<Option<Vec<f64>>> {
        match self.get(key) {
            None => Some(None),
            Some(v) => match as_numbers(v) {
                Some(x) => Some(Some(x)),
                None => {
                    self.bad(key, "expected an array of numbers", issues);
                    None
                }
            },
        }
    }

    fn optional_string(&mut self, key: &'a str, issues: &mut Vec<Issue>) -> Option<Option<&'a str>> {
        match self.get(key) {
            None => Some(None),
            Some(Value::String(s)) => Some(Some(s.as_str())),
            Some(_) => {
                self.bad(key, "expected a string", issues);
                None
            }
        }
    }

    fn subtable(&mut self, key: &'a str, required: bool, issues: &mut Vec<Issue>) -> Option<Section<'a>> {
        let path = self.key_path(key);
        match self.get(key) {
            Some(Value::Table(t)) => Some(Section::new(&path, t)),
            Some(_) => {
                self.bad(key, "expected a table", issues);
                None
            }
            None => {
                if required {
                    self.bad(key, "missing required table", issues);
                }
                None
            }
        }
    }

    fn finish(self, issues: &mut Vec<Issue>) {
        for key in self.table.keys() {
            if !self.used.contains(key.as_str()) {
                issues.push(Issue {
                    path: self.key_path(key),
                    message: "unknown key".into(),
                });
            }
        }
    }
}

fn as_number(value: &Value) -> Option<f64> {
    match value {
        Value::Float(x) => Some(*x),
        Value::Integer(n) => Some(*n as f64),
        _ => None,
    }
}

fn as_numbers(value: &Value) -> Option<Vec<f64>> {
    value.as_array()?.iter().map(as_number).collect()
}

fn as_matrix(value: &Value) -> Option<Vec<Vec<f64>>> {
    value.as_array()?.iter().map(as_numbers).collect()
}

/// Parses and validates a scenario file, reporting every problem found.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, Vec<Issue>> {
    let root: Table = toml::from_str(text).map_err(|e| {
        vec![Issue {
            path: "<file>".into(),
            message: e.message().to_string(),
        }]
    })?;
    let mut issues = Vec::new();
    let mut top = Section::new("", &root);

    match top.required("schema_version", &mut issues).map(|v| v.as_integer()) {
        Some(Some(SCHEMA_VERSION)) | None => {}
        Some(Some(v)) => top.bad(
            "schema_version",
            format!("version {v} is not supported; this build reads version {SCHEMA_VERSION}"),
            &mut issues,
        ),
        Some(None) => top.bad("schema_version", "expected an integer", &mut issues),
    }

    let scenario = top
        .subtable("scenario", true, &mut issues)
        .and_then(|s| read_scenario(s, &mut issues));
    let detection = top
        .subtable("detection", true, &mut issues)
        .and_then(|s| read_detection(s, &mut issues));
    let run = top
        .subtable("run", true, &mut issues)
        .and_then(|s| read_run(s, &mut issues));
    let output = match top.subtable("output", false, &mut issues) {
        Some(s) => read_output(s, &mut issues),
        None => Some(OutputSpec {
            directory: None,
            density_file: "density.csv".into(),
            plot_file: "plot.csv".into(),
            summary_file: "summary.json".into(),
        }),
    };
    top.finish(&mut issues);

    let (Some(scenario), Some(detection), Some(run), Some(output)) = (scenario, detection, run, output) else {
        return Err(issues);
    };
    let request = build(&scenario, &detection, &run, &mut issues);
    match request {
        Some(request) if issues.is_empty() => Ok(ScenarioFile {
            schema_version: SCHEMA_VERSION,
            scenario,
            detection,
            run,
            output,
            request,
        }),
        _ => Err(issues),
    }
}

fn read_scenario(mut s: Section<'_>, issues: &mut Vec<Issue>) -> Option<ScenarioSpec> {
    let masses = s.numbers("masses", issues);
    let momenta = s.numbers("momenta", issues);
    let widths = s.optional_numbers("widths", issues);
    let sigma = s.number("sigma", issues);
    let initial_flavor = s.index("initial_flavor", issues);
    let mut mixing = None;
    if let Some(mut m) = s.subtable("mixing", true, issues) {
        let angle = m.get("angle");
        let real = m.get("real");
        let imag = m.get("imag");
        mixing = match (angle, real) {
            (Some(a), None) => {
                if imag.is_some() {
                    m.bad("imag", "not allowed together with angle", issues);
                }
                match as_number(a) {
                    Some(theta) => {
                        let (c, sn) = (theta.cos(), theta.sin());
                        Some((Some(theta), vec![vec![c, sn], vec![-sn, c]], vec![vec![0.0; 2]; 2]))
                    }
                    None => {
                        m.bad("angle", "expected a number", issues);
                        None
                    }
                }
            }
            (None, Some(r)) => {
                let re = as_matrix(r);
                if re.is_none() {
                    m.bad("real", "expected an array of number arrays", issues);
                }
                let im = match imag {
                    None => re
                        .as_ref()
                        .map(|re| re.iter().map(|row| vec![0.0; row.len()]).collect()),
                    Some(v) => {
                        let im = as_matrix(v);
                        if im.is_none() {
                            m.bad("imag", "expected an array of number arrays", issues);
                        }
                        im
                    }
                };
                re.zip(im).map(|(re, im)| (None, re, im))
            }
            (Some(_), Some(_)) => {
                m.bad("angle", "give either angle or real/imag, not both", issues);
                None
            }
            (None, None) => {
                m.bad("angle", "missing: give angle or real (and optionally imag)", issues);
                None
            }
        };
        m.finish(issues);
    }
    s.finish(issues);
    let (masses, momenta, sigma, initial_flavor, (angle, real, imag)) =
        (masses?, momenta?, sigma?, initial_flavor?, mixing?);
    let widths = match widths? {
        Some(w) => w,
        None => vec![0.0; masses.len()],
    };
    Some(ScenarioSpec {
        masses,
        momenta,
        widths,
        sigma,
        initial_flavor,
        mixing_angle: angle,
        mixing_real: real,
        mixing_imag: imag,
    })
}

fn read_detection(mut s: Section<'_>, issues: &mut Vec<Issue>) -> Option<DetectionSpec> {
    let threshold = s.number("threshold", issues);
    let product_masses = s.numbers("product_masses", issues);
    let localization = s.number("localization", issues);
    let constant = s.optional_number("constant", 1.0, issues);
    s.finish(issues);
    Some(DetectionSpec {
        threshold: threshold?,
        product_masses: product_masses?,
        localization: localization?,
        constant: constant?,
    })
}

fn parse_methods(s: &Section<'_>, key: &str, value: &Value, issues: &mut Vec<Issue>) -> Option<Vec<Method>> {
    let Some(items) = value.as_array() else {
        s.bad(key, "expected an array of method names", issues);
        return None;
    };
    let mut out = Vec::new();
    let mut ok = true;
    for item in items {
        match item.as_str().and_then(Method::parse) {
            Some(m) if !out.contains(&m) => out.push(m),
            Some(m) => {
                s.bad(key, format!("method {} listed twice", m.as_str()), issues);
                ok = false;
            }
            None => {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                s.bad(
                    key,
                    format!("unknown method {item}; expected one of {}", names.join(", ")),
                    issues,
                );
                ok = false;
            }
        }
    }
    if out.is_empty() && ok {
        s.bad(key, "at least one method is required", issues);
        ok = false;
    }
    ok.then_some(out)
}

fn read_run(mut s: Section<'_>, issues: &mut Vec<Issue>) -> Option<RunSpec> {
    let flavor = s.index("flavor", issues);
    let lengths = match s.subtable("lengths", true, issues) {
        Some(mut g) => {
            let start = g.number("start", issues);
            let stop = g.number("stop", issues);
            let count = g.index("count", issues);
            g.finish(issues);
            match (start, stop, count) {
                (Some(start), Some(stop), Some(count)) => Some(GridSpec { start, stop, count }),
                _ => None,
            }
        }
        None => None,
    };
    let methods = s
        .required("methods", issues)
        .and_then(|v| parse_methods(&s, "methods", v, issues));
    let thresholds = s.optional_numbers("thresholds", issues).map(|t| t.unwrap_or_default());
    let scan_method = match s.optional_string("scan_method", issues) {
        Some(None) => Some(Method::AmplitudeSum),
        Some(Some(name)) => {
            let m = Method::parse(name);
            if m.is_none() {
                s.bad("scan_method", format!("unknown method \"{name}\""), issues);
            }
            m
        }
        None => None,
    };
    let window = match s.get("window") {
        None => Some(WindowPolicy::Auto),
        Some(Value::String(w)) if w == "auto" => Some(WindowPolicy::Auto),
        Some(Value::String(w)) if w == "unbounded" => Some(WindowPolicy::Unbounded),
        Some(v) => match as_number(v) {
            Some(t) => Some(WindowPolicy::Explicit(t)),
            None => {
                s.bad("window", "expected \"auto\", \"unbounded\" or a number", issues);
                None
            }
        },
    };
    let lower_limit = match s.optional_string("lower_limit", issues) {
        Some(None) | Some(Some("auto")) => Some(LowerLimit::Auto),
        Some(Some("finite")) => Some(LowerLimit::Finite),
        Some(Some("extended")) => Some(LowerLimit::Extended),
        Some(Some(other)) => {
            s.bad(
                "lower_limit",
                format!("expected \"auto\", \"finite\" or \"extended\", got \"{other}\""),
                issues,
            );
            None
        }
        None => None,
    };
    let quadrature_tolerance =
        s.optional_number("quadrature_tolerance", DensityQuadrature::default().tolerance, issues);
    let fit_start = match s.get("fit_start") {
        None => Some(FrequencyStart::Scan),
        Some(Value::String(v)) if v == "scan" => Some(FrequencyStart::Scan),
        Some(Value::String(v)) if v == "analytic" => Some(FrequencyStart::Analytic),
        Some(v) => match as_number(v) {
            Some(f) if f > 0.0 => Some(FrequencyStart::Scaled(f)),
            _ => {
                s.bad(
                    "fit_start",
                    "expected \"scan\", \"analytic\" or a positive factor",
                    issues,
                );
                None
            }
        },
    };
    s.finish(issues);
    Some(RunSpec {
        flavor: flavor?,
        lengths: lengths?,
        methods: methods?,
        thresholds: thresholds?,
        scan_method: scan_method?,
        window: window?,
        lower_limit: lower_limit?,
        quadrature_tolerance: quadrature_tolerance?,
        fit_start: fit_start?,
    })
}

fn read_output(mut s: Section<'_>, issues: &mut Vec<Issue>) -> Option<OutputSpec> {
    let directory = s.optional_string("directory", issues);
    let density = s.optional_string("density_file", issues);
    let plot = s.optional_string("plot_file", issues);
    let summary = s.optional_string("summary_file", issues);
    s.finish(issues);
    Some(OutputSpec {
        directory: directory?.map(str::to_string),
        density_file: density?.unwrap_or("density.csv").to_string(),
        plot_file: plot?.unwrap_or("plot.csv").to_string(),
        summary_file: summary?.unwrap_or("summary.json").to_string(),
    })
}

fn core_issue(path: &str, error: oscmeas::Error) -> Issue {
    match error {
        oscmeas::Error::Validation { field, message } => Issue {
            path: format!("{path}.{field}"),
            message,
        },
        other => Issue {
            path: path.to_string(),
            message: other.to_string(),
        },
    }
}

/// Re-runs every library-level check on the parsed values.
fn build(
    scenario: &ScenarioSpec,
    detection: &DetectionSpec,
    run: &RunSpec,
    issues: &mut Vec<Issue>,
) -> Option<DensityRequest> {
    let n = scenario.masses.len();
    let mut ok = true;
    if scenario.momenta.len() != n {
        issues.push(Issue {
            path: "scenario.momenta".into(),
            message: format!("has {} entries for {n} masses", scenario.momenta.len()),
        });
        ok = false;
    }
    if scenario.widths.len() != n {
        issues.push(Issue {
            path: "scenario.widths".into(),
            message: format!("has {} entries for {n} masses", scenario.widths.len()),
        });
        ok = false;
    }
    let mut states = Vec::new();
    for k in 0..n.min(scenario.momenta.len()).min(scenario.widths.len()) {
        match MassEigenstate::new(scenario.masses[k], scenario.momenta[k], scenario.widths[k]) {
            Ok(s) => states.push(s),
            Err(e) => {
                issues.push(core_issue(&format!("scenario.masses[{k}]"), e));
                ok = false;
            }
        }
    }
    let rows = scenario.mixing_real.len();
    let square = |m: &Vec<Vec<f64>>| m.len() == rows && m.iter().all(|r| r.len() == rows);
    let mixing = if !square(&scenario.mixing_real) || !square(&scenario.mixing_imag) {
        issues.push(Issue {
            path: "scenario.mixing".into(),
            message: "real and imag parts must be square matrices of the same size".into(),
        });
        None
    } else {
        let entries = CMatrix::from_fn(rows, rows, |r, c| {
            Complex64::new(scenario.mixing_real[r][c], scenario.mixing_imag[r][c])
        });
        match MixingMatrix::new(entries) {
            Ok(m) => Some(m),
            Err(e) => {
                issues.push(core_issue("scenario.mixing", e));
                None
            }
        }
    };
    let oscillation = match (ok, mixing) {
        (true, Some(mixing)) => match OscillationScenario::new(states, mixing, scenario.sigma, scenario.initial_flavor)
        {
            Ok(s) => Some(s),
            Err(e) => {
                issues.push(core_issue("scenario", e));
                None
            }
        },
        _ => None,
    };
    let detector = match DetectionModel::new(
        detection.threshold,
        detection.product_masses.clone(),
        detection.localization,
        detection.constant,
    ) {
        Ok(d) => Some(d),
        Err(e) => {
            issues.push(core_issue("detection", e));
            None
        }
    };
    if let Some(w) = run.thresholds.windows(2).find(|w| !(w[1] > w[0])) {
        issues.push(Issue {
            path: "run.thresholds".into(),
            message: format!("values must be strictly increasing ({} then {})", w[0], w[1]),
        });
    }
    if run.lengths.count < 2 || !(run.lengths.stop > run.lengths.start) {
        issues.push(Issue {
            path: "run.lengths".into(),
            message: "need count >= 2 and stop > start".into(),
        });
        return None;
    }
    let (oscillation, detector) = (oscillation?, detector?);
    let quadrature = DensityQuadrature {
        tolerance: run.quadrature_tolerance,
        ..DensityQuadrature::default()
    };
    let lengths = length_grid(run.lengths.start, run.lengths.stop, run.lengths.count);
    let request = DensityRequest::new(oscillation, detector, run.flavor, lengths)
        .and_then(|r| r.with_window(run.window))
        .map(|r| r.with_lower_limit(run.lower_limit).with_quadrature(quadrature))
        .and_then(|r| r.validate().map(|_| r));
    match request {
        Ok(r) => Some(r),
        Err(e) => {
            issues.push(core_issue("run", e));
            None
        }
    }
}
