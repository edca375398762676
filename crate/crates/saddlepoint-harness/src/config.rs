//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "instance": {
//!     "kind": "quadratic", "n": 8, "m": 8,
//!     "params": { "m_x": 1, "m_y": 1, "l_x": 1e4, "l_xy": 10, "l_y": 1e4 }
//!   },
//!   "solvers": [{ "solver": "pbr" }, { "solver": "rhss", "k": 2 }],
//!   "mode": "practical",
//!   "epsilon": 1e-6,
//!   "seeds": [0, 1, 2, 3, 4],
//!   "grid": { "parameter": "l_xy", "values": [10, 100, 1000] },
//!   "output": { "dir": "out" }
//! }
//! ```
//!
//! Instance kinds are `quadratic`, `log_perturbed` (adds `rho`),
//! `separable` (explicit spectra `a` and `c`) and `matrix_market` (a
//! sidecar JSON listing the matrix files). Solvers are `abr`, `pbr`,
//! `rhss` (with `k`), `extragradient` and `gda`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use saddlepoint::{SmoothnessParams, SolveMode, SpectrumShape};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub m_x: f64,
    pub m_y: f64,
    pub l_x: f64,
    pub l_xy: f64,
    pub l_y: f64,
}

impl ParamsConfig {
    pub fn to_params(&self, field: &str) -> Result<SmoothnessParams> {
        SmoothnessParams::new(self.m_x, self.m_y, self.l_x, self.l_xy, self.l_y)
            .map_err(|e| HarnessError::config(field, e.to_string()))
    }
}

impl From<SmoothnessParams> for ParamsConfig {
    fn from(p: SmoothnessParams) -> Self {
        Self { m_x: p.m_x(), m_y: p.m_y(), l_x: p.l_x(), l_xy: p.l_xy(), l_y: p.l_y() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    #[default]
    Endpoints,
    LogUniform,
    Clustered,
}

impl From<ShapeName> for SpectrumShape {
    fn from(s: ShapeName) -> Self {
        match s {
            ShapeName::Endpoints => SpectrumShape::Endpoints,
            ShapeName::LogUniform => SpectrumShape::LogUniform,
            ShapeName::Clustered => SpectrumShape::Clustered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceConfig {
    Quadratic {
        n: usize,
        m: usize,
        params: ParamsConfig,
        #[serde(default)]
        shape: ShapeName,
    },
    LogPerturbed {
        n: usize,
        m: usize,
        params: ParamsConfig,
        rho: f64,
        #[serde(default)]
        shape: ShapeName,
    },
    Separable {
        a: Vec<f64>,
        c: Vec<f64>,
    },
    MatrixMarket {
        sidecar: PathBuf,
    },
}

impl InstanceConfig {
    /// Declared parameters, when the config carries them.
    pub fn params(&self) -> Option<ParamsConfig> {
        match self {
            Self::Quadratic { params, .. } | Self::LogPerturbed { params, .. } => Some(*params),
            _ => None,
        }
    }

    fn params_mut(&mut self) -> Option<&mut ParamsConfig> {
        match self {
            Self::Quadratic { params, .. } | Self::LogPerturbed { params, .. } => Some(params),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverChoice {
    Abr,
    Pbr,
    Rhss { k: u32 },
    Extragradient,
    Gda,
}

impl SolverChoice {
    pub fn label(&self) -> String {
        match self {
            Self::Abr => "abr".into(),
            Self::Pbr => "pbr".into(),
            Self::Rhss { k } => format!("rhss_k{k}"),
            Self::Extragradient => "extragradient".into(),
            Self::Gda => "gda".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Practical,
    Theoretical,
}

impl ModeName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Practical => "practical",
            Self::Theoretical => "theoretical",
        }
    }
}

impl From<ModeName> for SolveMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Practical => SolveMode::Practical,
            ModeName::Theoretical => SolveMode::Theoretical,
        }
    }
}

/// Which declared parameter a sweep varies. `l` sets `L_x` and `L_y`
/// together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridParameter {
    LXy,
    LX,
    LY,
    L,
    MX,
    MY,
}

impl GridParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LXy => "l_xy",
            Self::LX => "l_x",
            Self::LY => "l_y",
            Self::L => "l",
            Self::MX => "m_x",
            Self::MY => "m_y",
        }
    }

    pub fn apply(&self, p: &mut ParamsConfig, value: f64) {
        match self {
            Self::LXy => p.l_xy = value,
            Self::LX => p.l_x = value,
            Self::LY => p.l_y = value,
            Self::L => {
                p.l_x = value;
                p.l_y = value;
            }
            Self::MX => p.m_x = value,
            Self::MY => p.m_y = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub parameter: GridParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `rows.csv`, `summary.csv`, `bounds.csv` and
    /// `report.json`. Nothing is written when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    pub solvers: Vec<SolverChoice>,
    #[serde(default)]
    pub mode: ModeName,
    /// Target ratio `‖z_T − z*‖/‖z_0 − z*‖`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|source| HarnessError::Json { path: origin.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves a relative `matrix_market` sidecar path
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        if let InstanceConfig::MatrixMarket { sidecar } = &mut cfg.instance {
            if sidecar.is_relative() {
                if let Some(dir) = path.parent() {
                    *sidecar = dir.join(&*sidecar);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Semantic checks beyond the JSON schema.
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(HarnessError::config("solvers", "at least one solver is required"));
        }
        for (i, s) in self.solvers.iter().enumerate() {
            if let SolverChoice::Rhss { k } = s {
                if *k == 0 {
                    return Err(HarnessError::config(format!("solvers[{i}].k"), "must be at least 1"));
                }
                if matches!(self.instance, InstanceConfig::LogPerturbed { .. }) {
                    return Err(HarnessError::config(format!("solvers[{i}]"), "rhss needs a quadratic instance"));
                }
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(HarnessError::config("epsilon", "must lie in (0, 1)"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds", "at least one seed is required"));
        }
        match &self.instance {
            InstanceConfig::Quadratic { n, m, params, .. } | InstanceConfig::LogPerturbed { n, m, params, .. } => {
                if *n == 0 {
                    return Err(HarnessError::config("instance.n", "must be at least 1"));
                }
                if *m == 0 {
                    return Err(HarnessError::config("instance.m", "must be at least 1"));
                }
                params.to_params("instance.params")?;
            }
            InstanceConfig::Separable { a, c } => {
                if a.is_empty() || a.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(HarnessError::config("instance.a", "needs positive finite eigenvalues"));
                }
                if c.is_empty() || c.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(HarnessError::config("instance.c", "needs positive finite eigenvalues"));
                }
            }
            InstanceConfig::MatrixMarket { .. } => {}
        }
        if let InstanceConfig::LogPerturbed { rho, .. } = &self.instance {
            if !(*rho >= 0.0 && rho.is_finite()) {
                return Err(HarnessError::config("instance.rho", "must be finite and nonnegative"));
            }
        }
        if let Some(g) = &self.grid {
            if g.values.is_empty() {
                return Err(HarnessError::config("grid.values", "grid must not be empty"));
            }
            let Some(base) = self.instance.params() else {
                return Err(HarnessError::config("grid", "sweeps need an instance with declared params"));
            };
            for (i, &v) in g.values.iter().enumerate() {
                let mut p = base;
                g.parameter.apply(&mut p, v);
                p.to_params(&format!("grid.values[{i}]"))?;
            }
        }
        Ok(())
    }

    /// The instance for one grid value.
    pub fn instance_at(&self, value: Option<f64>) -> InstanceConfig {
        let mut inst = self.instance.clone();
        if let (Some(g), Some(v)) = (&self.grid, value) {
            if let Some(p) = inst.params_mut() {
                g.parameter.apply(p, v);
            }
        }
        inst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "instance": { "kind": "quadratic", "n": 4, "m": 3,
                      "params": { "m_x": 1, "m_y": 1, "l_x": 10, "l_xy": 2, "l_y": 10 } },
        "solvers": [{ "solver": "pbr" }, { "solver": "rhss", "k": 2 }]
    }"#;

    #[test]
    fn defaults_and_round_trip() {
        let cfg = ExperimentConfig::from_json(MINIMAL, "inline").unwrap();
        assert_eq!(cfg.mode, ModeName::Practical);
        assert_eq!(cfg.epsilon, 1e-6);
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.solvers[1], SolverChoice::Rhss { k: 2 });
        let again = ExperimentConfig::from_json(&cfg.to_json(), "again").unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn json_errors_carry_position() {
        let err = ExperimentConfig::from_json("{\n  \"solvers\": [,]\n}", "bad.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json") && msg.contains("line 2"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_field_rejected() {
        let text = MINIMAL.replace("\"solvers\"", "\"solverz\": 1, \"solvers\"");
        assert!(ExperimentConfig::from_json(&text, "x").is_err());
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = MINIMAL.replace("\"m_x\": 1", "\"m_x\": -1");
        let err = ExperimentConfig::from_json(&text, "x").unwrap_err();
        assert!(err.to_string().contains("instance.params"), "{err}");

        let text = MINIMAL.replace("\"k\": 2", "\"k\": 0");
        let err = ExperimentConfig::from_json(&text, "x").unwrap_err();
        assert!(err.to_string().contains("solvers[1].k"), "{err}");

        let text = MINIMAL.replace("[{ \"solver\": \"pbr\" }, { \"solver\": \"rhss\", \"k\": 2 }]", "[]");
        let err = ExperimentConfig::from_json(&text, "x").unwrap_err();
        assert!(err.to_string().contains("solvers"), "{err}");
    }

    #[test]
    fn grid_values_checked_against_base() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL, "x").unwrap();
        cfg.grid = Some(Grid { parameter: GridParameter::MX, values: vec![0.5, 20.0] });
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("grid.values[1]"), "{err}");
        cfg.grid = Some(Grid { parameter: GridParameter::LXy, values: vec![0.0, 5.0] });
        cfg.validate().unwrap();
        assert_eq!(cfg.instance_at(Some(5.0)).params().unwrap().l_xy, 5.0);
    }
}
