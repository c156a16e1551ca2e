//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::problems::ProblemSpec;
use crate::solver::{Method, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Directory of the configuration file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t0: f64,
    pub tf: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t0: 0.0, tf: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write the final low-rank factor `Z` as a dense Matrix Market file.
    pub write_factor: bool,
    /// Node stride for comparison tables; 0 picks one giving about 200 rows.
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            write_factor: false,
            stride: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    M,
    H,
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Methods to sweep; defaults to `solver.method`.
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
}

/// Command-line values that replace configuration keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub m_max: Option<usize>,
    pub tol: Option<f64>,
    pub h: Option<f64>,
    pub bdf_order: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.method {
            self.solver.method = m;
        }
        if let Some(v) = o.m_max {
            self.solver.m_max = v;
        }
        if let Some(v) = o.tol {
            self.solver.tol = v;
        }
        if let Some(v) = o.h {
            self.solver.h = v;
        }
        if let Some(v) = o.bdf_order {
            self.solver.bdf_order = v;
        }
        if let Some(v) = o.seed {
            self.solver.seed = v;
            self.problem.set_seed(v);
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.solver.validate()?;
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.grid.t0, self.grid.tf, self.solver.h)
    }

    pub fn output_stride(&self, grid: &TimeGrid) -> usize {
        if self.output.stride > 0 {
            self.output.stride
        } else {
            grid.steps().div_ceil(200).max(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_parses() {
        let text = r#"
[problem]
kind = "convdiff"
n0 = 10
seed = 42

[grid]
tf = 1.0

[solver]
method = "eba-bdf"
h = 0.01
bdf_order = 3

[output]
dir = "results"
write_factor = true

[sweep]
axis = "m"
values = [1, 2, 3]
"#;
        let cfg = RunConfig::parse(text, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.solver.method, Method::EbaBdf);
        assert_eq!(cfg.solver.bdf_order, 3);
        assert_eq!(cfg.solver.m_max, SolverConfig::default().m_max);
        assert_eq!(cfg.grid.t0, 0.0);
        assert_eq!(cfg.sweep.as_ref().unwrap().axis, SweepAxis::M);
        assert_eq!(cfg.problem.dim(), Some(100));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_field_is_named() {
        let text = "[problem]\nkind = \"diagonal\"\nn = 5\n[solver]\nmmax = 3\n";
        let err = RunConfig::parse(text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("mmax"), "{err}");
    }

    #[test]
    fn overrides_replace_keys() {
        let mut cfg = RunConfig::parse("[problem]\nkind = \"diagonal\"\nn = 5\n", Path::new(".")).unwrap();
        cfg.apply(&Overrides {
            method: Some(Method::EbaBdf),
            tol: Some(1e-6),
            seed: Some(9),
            out: Some(PathBuf::from("x")),
            ..Overrides::default()
        });
        assert_eq!(cfg.solver.method, Method::EbaBdf);
        assert_eq!(cfg.solver.tol, 1e-6);
        assert_eq!(cfg.problem.seed(), 9);
        assert_eq!(cfg.output.dir, PathBuf::from("x"));
        cfg.solver.bdf_order = 5;
        assert!(cfg.validate().is_err());
    }
}
