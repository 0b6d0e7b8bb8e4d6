//! TOML run configuration. Every section rejects unknown keys.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use quasiherm::c64;
use quasiherm::fixedpoint::{FixedPointOptions, ProblemKind, ZWindow};
use quasiherm::frozen::DecomposeOptions;
use quasiherm::operators::{Grid, MassModel, MassSquaredFn};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub fixedpoint: FixedPointSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub metric: MetricSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    Constant {
        m: f64,
    },
    HoQuadratic {
        a: f64,
        e0: f64,
    },
    /// `m²(z, x)` as an expression in `z` and `x`, with an optional imaginary part.
    General {
        mass_squared: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass_squared_imag: Option<String>,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            x_min: -12.0,
            x_max: 12.0,
            n_points: 200,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    /// Frozen parameter for `spectrum`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Schrodinger,
            z: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSection {
    pub branches: Vec<usize>,
    pub windows: Vec<[f64; 2]>,
    pub steps: usize,
    pub max_iterations: usize,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        let opts = FixedPointOptions::default();
        Self {
            branches: vec![0],
            windows: Vec::new(),
            steps: opts.steps,
            max_iterations: opts.max_iterations,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub refine_tol: f64,
    pub tol_real: f64,
    pub overlap_floor: f64,
    pub merge_rel: f64,
    pub degeneracy_rel: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let fp = FixedPointOptions::default();
        Self {
            refine_tol: fp.refine_tol,
            tol_real: fp.tol_real,
            overlap_floor: fp.overlap_floor,
            merge_rel: fp.merge_rel,
            degeneracy_rel: DecomposeOptions::default().degeneracy_rel,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSource {
    #[default]
    Fixedpoint,
    Fixture,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    pub source: LevelSource,
    /// Overlap `⟨φ₁|φ²⟩` of the two-level fixture, as `[re, im]`.
    pub fixture_overlap: [f64; 2],
    pub fixture_energies: [f64; 2],
    pub fixture_dim: usize,
    /// Repeat the first level; an engineered ill-conditioned basis.
    pub duplicate_level: bool,
    pub dump_matrices: bool,
}

impl Default for MetricSection {
    fn default() -> Self {
        Self {
            source: LevelSource::Fixedpoint,
            fixture_overlap: [0.5, 0.0],
            fixture_energies: [1.0, 2.0],
            fixture_dim: 4,
            duplicate_level: false,
            dump_matrices: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    /// `[[0, η], [η, 0]]` with `η` the positive metric of the base operator;
    /// the swap `[[0, I], [I, 0]]` when that operator is Hermitian.
    #[default]
    #[serde(alias = "swap")]
    Block,
    Identity,
    /// The positive metric of the generator itself.
    Positive,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Gaussian { center: f64, width: f64, momentum: f64 },
    Eigenstate { index: usize },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    /// Frozen parameter of the Klein-Gordon block.
    pub z: f64,
    pub t_final: f64,
    pub steps: usize,
    pub metric: MetricChoice,
    pub initial: InitialState,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            z: 0.0,
            t_final: 10.0,
            steps: 200,
            metric: MetricChoice::Block,
            initial: InitialState::Gaussian {
                center: -2.0,
                width: 1.0,
                momentum: 2.0,
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub base_grid: usize,
    pub seed: u64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            base_grid: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self =
            toml::from_str(&text).map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, value) in [
            ("refine_tol", t.refine_tol),
            ("tol_real", t.tol_real),
            ("overlap_floor", t.overlap_floor),
            ("merge_rel", t.merge_rel),
            ("degeneracy_rel", t.degeneracy_rel),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(config_error(format!("tolerances.{name} must be positive, got {value}")));
            }
        }
        if t.overlap_floor > 1.0 {
            return Err(config_error("tolerances.overlap_floor must not exceed 1"));
        }
        for w in &self.fixedpoint.windows {
            if w[0].is_nan() || w[1].is_nan() || w[0] >= w[1] {
                return Err(config_error(format!("fixedpoint window [{}, {}] is empty", w[0], w[1])));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = &self.grid;
        Grid::new(g.x_min, g.x_max, g.n_points).map_err(|e| config_error(e.to_string()))
    }

    pub fn model(&self) -> Result<MassModel, CliError> {
        let section = self
            .model
            .as_ref()
            .ok_or_else(|| config_error("missing [model] section"))?;
        let model = match section {
            ModelSection::Constant { m } => MassModel::constant(*m),
            ModelSection::HoQuadratic { a, e0 } => MassModel::ho_quadratic(*a, *e0),
            ModelSection::General {
                mass_squared,
                mass_squared_imag,
            } => {
                let re = Expression::parse(mass_squared)?;
                let im = mass_squared_imag.as_deref().map(Expression::parse).transpose()?;
                Ok(MassModel::general(MassSquaredFn::new(move |z, x| {
                    let value_re = re.eval(z, x)?;
                    let value_im = im.as_ref().map_or(Ok(0.0), |e| e.eval(z, x))?;
                    Ok(c64::new(value_re, value_im))
                })))
            }
        };
        model.map_err(|e| config_error(e.to_string()))
    }

    pub fn windows(&self) -> Result<Vec<ZWindow>, CliError> {
        if self.fixedpoint.windows.is_empty() {
            return Err(config_error(
                "fixedpoint.windows must list at least one [lo, hi] window",
            ));
        }
        Ok(self
            .fixedpoint
            .windows
            .iter()
            .map(|w| ZWindow::new(w[0], w[1]))
            .collect())
    }

    pub fn fixedpoint_options(&self) -> FixedPointOptions {
        let t = &self.tolerances;
        FixedPointOptions {
            steps: self.fixedpoint.steps,
            overlap_floor: t.overlap_floor,
            tol_real: t.tol_real,
            refine_tol: t.refine_tol,
            max_iterations: self.fixedpoint.max_iterations,
            merge_rel: t.merge_rel,
        }
    }

    pub fn decompose_options(&self) -> DecomposeOptions {
        DecomposeOptions {
            tol_real: self.tolerances.tol_real,
            degeneracy_rel: self.tolerances.degeneracy_rel,
            ..DecomposeOptions::default()
        }
    }
}

/// A parsed expression in the variables `z` and `x`.
#[derive(Clone)]
struct Expression {
    source: String,
    tree: Arc<Node<DefaultNumericTypes>>,
}

impl Expression {
    fn parse(source: &str) -> Result<Self, CliError> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| config_error(format!("cannot parse mass expression {source:?}: {e}")))?;
        let probe = Self {
            source: source.to_string(),
            tree: Arc::new(tree),
        };
        // catch unknown identifiers before any solve starts
        probe.eval(0.5, 0.5).map_err(config_error)?;
        Ok(probe)
    }

    fn eval(&self, z: f64, x: f64) -> Result<f64, String> {
        let mut context = HashMapContext::<DefaultNumericTypes>::new();
        for (name, value) in [("z", z), ("x", x)] {
            context
                .set_value(name.into(), Value::Float(value))
                .map_err(|e| e.to_string())?;
        }
        let value = self
            .tree
            .eval_number_with_context(&context)
            .map_err(|e| format!("{:?}: {e}", self.source))?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(format!("{:?} is not finite", self.source))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = parse("[model]\nkind = \"constant\"\nm = 0.5\n").unwrap();
        assert_eq!(cfg.grid.n_points, 200);
        assert_eq!(cfg.fixedpoint.steps, 64);
        assert_eq!(cfg.problem.kind, ProblemKind::Schrodinger);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(parse("[grid]\nx_min = -1.0\nx_max = 1.0\nn_points = 5\nspacing = 0.1\n").is_err());
        assert!(parse("[model]\nkind = \"constant\"\nm = 0.5\nA = 2.0\n").is_err());
        assert!(parse("[modle]\n").is_err());
    }

    #[test]
    fn tolerances_must_be_positive() {
        let err = parse("[tolerances]\nrefine_tol = 0.0\ntol_real = 1e-8\noverlap_floor = 0.7\nmerge_rel = 1e-8\ndegeneracy_rel = 1e-8\n");
        assert!(err.unwrap_err().contains("refine_tol"));
    }

    #[test]
    fn general_expression_evaluates() {
        let cfg = parse("[model]\nkind = \"general\"\nmass_squared = \"x^2 + z\"\nmass_squared_imag = \"0.5 * x\"\n")
            .unwrap();
        let model = cfg.model().unwrap();
        let value = model.mass_squared(1.0, 2.0).unwrap();
        assert_eq!(value, c64::new(5.0, 1.0));

        let bad = parse("[model]\nkind = \"general\"\nmass_squared = \"x^2 + y\"\n").unwrap();
        assert!(bad.model().is_err());
    }
}
