//! The simulator boundary: analytic builtins, table replay of precomputed
//! results, and an external-command protocol.
//!
//! Everything behind [`Simulator::evaluate`] is deterministic; identical raw
//! inputs always produce identical outputs.

use std::collections::BTreeMap;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{DimensionSpec, ParameterSpace};

/// What to do when a query fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Stop the run and surface the failure.
    #[default]
    Abort,
    /// Drop the failed pool point and ask the sampler again.
    Resample,
}

/// Which backend evaluates queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Analytic { analytic_name: String },
    Table { table_path: PathBuf },
    /// Executable path followed by fixed leading arguments; the raw
    /// coordinates are appended in dimension order.
    Command { command: Vec<String> },
}

/// Full simulator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSpec {
    #[serde(flatten)]
    pub backend: BackendSpec,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default)]
    pub failure_policy: FailurePolicy,
}

fn default_timeout_s() -> u64 {
    60
}

impl SimulatorSpec {
    pub fn analytic(name: &str) -> Self {
        SimulatorSpec {
            backend: BackendSpec::Analytic {
                analytic_name: name.to_string(),
            },
            timeout_s: default_timeout_s(),
            failure_policy: FailurePolicy::Abort,
        }
    }
}

/// The analytic builtins, in `list-sims` order.
pub const BUILTIN_NAMES: [&str; 5] = [
    "mixer_2d_smooth",
    "orifice_2d_plateau",
    "inline_mixer_2d",
    "inline_mixer_6d",
    "multimodal_2d",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AnalyticCase {
    Mixer2dSmooth,
    Orifice2dPlateau,
    InlineMixer2d,
    InlineMixer6d,
    Multimodal2d,
}

#[derive(Debug, Clone)]
enum Backend {
    Analytic(AnalyticCase),
    /// Lookup keyed on coordinates rounded to 12 significant digits.
    Table(BTreeMap<Vec<String>, f64>),
    Command(Vec<String>),
}

/// An evaluable response function over a parameter space.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: SimulatorSpec,
    space: ParameterSpace,
    response_label: String,
    backend: Backend,
}

impl Simulator {
    pub fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn response_label(&self) -> &str {
        &self.response_label
    }

    pub fn failure_policy(&self) -> FailurePolicy {
        self.spec.failure_policy
    }

    /// Builds a simulator from a spec. Analytic specs carry their own
    /// space; table and command specs use the provided one.
    pub fn from_spec(
        spec: SimulatorSpec,
        space: Option<ParameterSpace>,
        response_label: Option<&str>,
    ) -> Result<Simulator> {
        match &spec.backend {
            BackendSpec::Analytic { analytic_name } => {
                let mut sim = builtin_analytic(analytic_name)?;
                sim.spec.timeout_s = spec.timeout_s;
                sim.spec.failure_policy = spec.failure_policy;
                Ok(sim)
            }
            BackendSpec::Table { table_path } => {
                let space = space.ok_or_else(|| {
                    Error::Config("table simulators need an explicit space".into())
                })?;
                let label = response_label.ok_or_else(|| {
                    Error::Config("table simulators need a response_label".into())
                })?;
                let mut sim = load_table(table_path, space, label)?;
                sim.spec.timeout_s = spec.timeout_s;
                sim.spec.failure_policy = spec.failure_policy;
                Ok(sim)
            }
            BackendSpec::Command { command } => {
                let space = space.ok_or_else(|| {
                    Error::Config("command simulators need an explicit space".into())
                })?;
                if command.is_empty() {
                    return Err(Error::Config("empty command line".into()));
                }
                Ok(Simulator {
                    backend: Backend::Command(command.clone()),
                    space,
                    response_label: response_label.unwrap_or("f").to_string(),
                    spec,
                })
            }
        }
    }

    /// Evaluates the response at a raw-unit point inside the space bounds.
    pub fn evaluate(&self, raw: &[f64]) -> Result<f64> {
        self.space.to_unit(raw)?; // bounds check
        match &self.backend {
            Backend::Analytic(case) => Ok(analytic_response(*case, raw)),
            Backend::Table(rows) => {
                let key = table_key(raw);
                rows.get(&key).copied().ok_or_else(|| Error::QueryFailure {
                    point: raw.to_vec(),
                    cause: "table miss: point not among stored rows".into(),
                })
            }
            Backend::Command(argv) => self.run_command(argv, raw),
        }
    }

    /// Spawns the external program with the raw coordinates appended as
    /// shortest round-trip decimal text; the first stdout line must parse
    /// as a real. stderr is folded into the failure cause.
    fn run_command(&self, argv: &[String], raw: &[f64]) -> Result<f64> {
        let fail = |cause: String| Error::QueryFailure {
            point: raw.to_vec(),
            cause,
        };
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]);
        for v in raw {
            cmd.arg(format!("{v}"));
        }
        let mut child = cmd
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("spawn failed: {e}")))?;

        let deadline = Instant::now() + Duration::from_secs(self.spec.timeout_s);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(fail(format!(
                            "timeout after {} s",
                            self.spec.timeout_s
                        )));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(fail(format!("wait failed: {e}"))),
            }
        };

        let mut stdout = String::new();
        let mut stderr = String::new();
        if let Some(mut h) = child.stdout.take() {
            let _ = h.read_to_string(&mut stdout);
        }
        if let Some(mut h) = child.stderr.take() {
            let _ = h.read_to_string(&mut stderr);
        }
        let diag = |msg: &str| {
            if stderr.trim().is_empty() {
                msg.to_string()
            } else {
                format!("{msg}; stderr: {}", stderr.trim())
            }
        };
        if !status.success() {
            return Err(fail(diag(&format!("exit status {status}"))));
        }
        let first = stdout.lines().next().unwrap_or("").trim();
        first
            .parse::<f64>()
            .map_err(|_| fail(diag(&format!("unparseable output line `{first}`"))))
    }
}

/// Returns one of the named analytic simulators.
pub fn builtin_analytic(name: &str) -> Result<Simulator> {
    let (case, space, label) = match name {
        // Smooth response over a baffled-vessel-like design plane.
        "mixer_2d_smooth" => (
            AnalyticCase::Mixer2dSmooth,
            ParameterSpace::new(vec![
                DimensionSpec::linear("baffle_length_ratio", 0.2, 0.3),
                DimensionSpec::linear("baffle_angle", 0.8, 1.57),
            ])?,
            "log c_v",
        ),
        // Near-zero plateau over most of the domain, steep rise near the
        // high end of the area ratio.
        "orifice_2d_plateau" => (
            AnalyticCase::Orifice2dPlateau,
            ParameterSpace::new(vec![
                DimensionSpec::linear("area_ratio", 0.3, 0.9),
                DimensionSpec::linear("spacing_ratio", 0.5, 2.0),
            ])?,
            "log c_v",
        ),
        "inline_mixer_2d" => (
            AnalyticCase::InlineMixer2d,
            ParameterSpace::new(vec![
                DimensionSpec::log10("re", 1.0, 1000.0),
                DimensionSpec::linear("alpha", 0.05, 0.25),
                DimensionSpec::linear("n", 0.5, 1.5),
                DimensionSpec::linear("n_blades", 4.0, 12.0),
            ])?,
            "log n_p_2d",
        ),
        "inline_mixer_6d" => (
            AnalyticCase::InlineMixer6d,
            ParameterSpace::new(vec![
                DimensionSpec::log10("re", 1.0, 1000.0),
                DimensionSpec::linear("alpha", 0.05, 0.25),
                DimensionSpec::linear("n", 0.5, 1.5),
                DimensionSpec::linear("n_blades", 4.0, 12.0),
                DimensionSpec::log10("re_ax", 1.0, 100.0),
                DimensionSpec::linear("le_over_d", 1.0, 5.0),
            ])?,
            "log n_p_2d",
        ),
        // Multiple local optima on the unit square; response never zero.
        "multimodal_2d" => (
            AnalyticCase::Multimodal2d,
            ParameterSpace::new(vec![
                DimensionSpec::linear("x", 0.0, 1.0),
                DimensionSpec::linear("y", 0.0, 1.0),
            ])?,
            "f",
        ),
        other => return Err(Error::UnknownSimulator(other.to_string())),
    };
    Ok(Simulator {
        spec: SimulatorSpec::analytic(name),
        space,
        response_label: label.to_string(),
        backend: Backend::Analytic(case),
    })
}

/// Power-draw constant vs. solid fraction: log-linear through the two
/// measured anchors (2-D variant: 2950 at alpha = 0.057, 1690 at 0.2).
fn k_p_2d(alpha: f64) -> f64 {
    log_linear(alpha, 0.057, 2950.0, 0.2, 1690.0)
}

/// 3-D variant anchors: 3030 at alpha = 0.057, 1800 at 0.2.
fn k_p_3d(alpha: f64) -> f64 {
    log_linear(alpha, 0.057, 3030.0, 0.2, 1800.0)
}

fn log_linear(x: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let t = (x - x0) / (x1 - x0);
    (y0.ln() + t * (y1 / y0).ln()).exp()
}

/// Flow-index factor, normalized so Newtonian fluids (n = 1) contribute 1.
/// The exponential shape is a benchmark choice, not a measured correlation.
fn flow_index_factor(n: f64) -> f64 {
    (0.8 * (1.0 - n)).exp()
}

/// Blade-count factor, normalized to 1 at the 8-blade reference geometry.
/// The power-law shape is a benchmark choice, not a measured correlation.
fn blade_factor(n_blades: f64) -> f64 {
    (n_blades / 8.0).powf(0.3)
}

/// Axial-Reynolds factor, normalized to 1 at re_ax = 10; a weak power law.
fn axial_factor(re_ax: f64) -> f64 {
    (re_ax / 10.0).powf(-0.05)
}

fn analytic_response(case: AnalyticCase, raw: &[f64]) -> f64 {
    match case {
        AnalyticCase::Mixer2dSmooth => {
            // Smooth log-variance surrogate surface: mixing improves with
            // longer baffles and steeper angles, with mild interaction.
            let u = (raw[0] - 0.2) / 0.1;
            let v = (raw[1] - 0.8) / 0.77;
            -1.2 - 1.8 * u - 0.9 * v + 0.6 * u * v + 0.3 * (2.0 * u + v).sin()
        }
        AnalyticCase::Orifice2dPlateau => {
            // Near-zero plateau for area ratios below 0.7, then a steep
            // cubic rise; spacing tilts the plateau slightly.
            let a = raw[0];
            let t = (raw[1] - 0.5) / 1.5;
            let excess = (a - 0.7).max(0.0);
            0.01 * (1.0 + 0.3 * t) + 40.0 * excess.powi(3)
        }
        AnalyticCase::InlineMixer2d => {
            let (re, alpha, n, n_blades) = (raw[0], raw[1], raw[2], raw[3]);
            // log10 of the 2-D power number k_p(alpha) g(n) h(N_b) / Re
            // (unit element length-to-diameter ratio).
            (k_p_2d(alpha) * flow_index_factor(n) * blade_factor(n_blades) / re).log10()
        }
        AnalyticCase::InlineMixer6d => {
            let (re, alpha, n, n_blades, re_ax, le_d) =
                (raw[0], raw[1], raw[2], raw[3], raw[4], raw[5]);
            (k_p_3d(alpha) * flow_index_factor(n) * blade_factor(n_blades) * axial_factor(re_ax)
                / (re * le_d))
                .log10()
        }
        AnalyticCase::Multimodal2d => {
            // Two-bump surface plus a tilt; strictly positive everywhere.
            let (x, y) = (raw[0], raw[1]);
            2.0 + (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).sin()
                + 0.35 * (x + y)
        }
    }
}

/// Rounds a coordinate to 12 significant digits for exact-match lookup.
fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

fn table_key(raw: &[f64]) -> Vec<String> {
    raw.iter().map(|&v| sig12(v)).collect()
}

/// Loads a comma-separated table whose header is the dimension names in
/// space order followed by the response label. Duplicate coordinates with
/// conflicting responses are rejected.
pub fn load_table(path: &Path, space: ParameterSpace, response_label: &str) -> Result<Simulator> {
    let terr = |reason: String| Error::Table {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| terr("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let expected: Vec<String> = space
        .dims()
        .iter()
        .map(|d| d.name.clone())
        .chain([response_label.to_string()])
        .collect();
    if cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(terr(format!(
            "header {cols:?} does not match space columns {expected:?}"
        )));
    }

    let nf = space.n_features();
    let mut rows: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != nf + 1 {
            return Err(terr(format!(
                "line {}: expected {} fields, got {}",
                lineno + 1,
                nf + 1,
                fields.len()
            )));
        }
        let mut raw = Vec::with_capacity(nf);
        for (f, d) in fields[..nf].iter().zip(space.dims()) {
            let v: f64 = f.parse().map_err(|_| {
                terr(format!("line {}: bad value `{f}` for {}", lineno + 1, d.name))
            })?;
            raw.push(v);
        }
        let y: f64 = fields[nf]
            .parse()
            .map_err(|_| terr(format!("line {}: bad response `{}`", lineno + 1, fields[nf])))?;
        let key = table_key(&raw);
        if let Some(&prev) = rows.get(&key) {
            if prev != y {
                return Err(terr(format!(
                    "line {}: duplicate coordinates with conflicting responses {prev} vs {y}",
                    lineno + 1
                )));
            }
        } else {
            rows.insert(key, y);
        }
    }

    Ok(Simulator {
        spec: SimulatorSpec {
            backend: BackendSpec::Table {
                table_path: path.to_path_buf(),
            },
            timeout_s: default_timeout_s(),
            failure_policy: FailurePolicy::Abort,
        },
        space,
        response_label: response_label.to_string(),
        backend: Backend::Table(rows),
    })
}
