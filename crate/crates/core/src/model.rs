//! Model files: a kernel family, a cost, and optional target control and balls.
//!
//! JSON (`.json`) and TOML (any other extension) documents share one schema:
//!
//! ```toml
//! states = 3                        # or a list of labels
//! control_set = { grid = 0.5 }      # or { finite = [0.0, 1.0] }
//! target_control = [0.5, 0.5, 0.5]  # optional
//!
//! [kernel.mixture]                  # or kernel.table = [[[...]]], indexed (x, control, y)
//! q0 = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
//! q1 = [[0.2, 0.3, 0.5], [0.3, 0.3, 0.4], [0.6, 0.2, 0.2]]
//!
//! [cost.linear]                     # or cost.table = [[...]], indexed (x, control)
//! c0 = [0.0, 0.5, 1.0]
//! c1 = [0.1, 0.1, 0.1]
//!
//! [balls]                           # optional
//! r = [0]
//! r1 = [0, 1]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{ControlSet, CostFunction, KernelFamily, MarkovControl, StateSpace};
use crate::embedded::BallPair;
use crate::error::{Error, Result};
use crate::experiments::canonical::{canonical_balls, canonical_cost, canonical_family, canonical_target};

/// Keyword that selects the built-in five-state instance.
pub const CANONICAL: &str = "canonical";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatesSpec {
    Count(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    Table(Vec<Vec<Vec<f64>>>),
    Mixture { q0: Vec<Vec<f64>>, q1: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostSpec {
    Linear { c0: Vec<f64>, c1: Vec<f64> },
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub r: Vec<usize>,
    pub r1: Vec<usize>,
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: StatesSpec,
    pub control_set: ControlSet,
    pub kernel: KernelSpec,
    pub cost: CostSpec,
    #[serde(default)]
    pub target_control: Option<Vec<f64>>,
    #[serde(default)]
    pub balls: Option<BallSpec>,
}

/// A validated model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    pub family: KernelFamily,
    pub cost: CostFunction,
    /// Target control; defaults to the middle grid value at every state.
    pub target: MarkovControl,
    pub balls: Option<BallPair>,
}

impl Model {
    pub fn canonical() -> Self {
        Self {
            name: CANONICAL.into(),
            family: canonical_family(),
            cost: canonical_cost(),
            target: canonical_target(),
            balls: Some(canonical_balls()),
        }
    }

    /// `canonical` or a path to a model file.
    pub fn resolve(source: &str) -> Result<Self> {
        if source == CANONICAL {
            Ok(Self::canonical())
        } else {
            Self::load(Path::new(source))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Model(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
        let file: ModelFile = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))?
        };
        Self::from_file(path.display().to_string(), file)
    }

    pub fn from_file(name: String, file: ModelFile) -> Result<Self> {
        let states = match file.states {
            StatesSpec::Count(n) => StateSpace::new(n)?,
            StatesSpec::Labels(labels) => StateSpace::with_labels(labels)?,
        };
        let n = states.size();
        let family = match file.kernel {
            KernelSpec::Table(probs) => KernelFamily::table(states, file.control_set.clone(), probs)?,
            KernelSpec::Mixture { q0, q1 } => {
                KernelFamily::mixture(file.control_set.clone(), q0, q1)?.with_states(states)?
            }
        };
        let cost = match file.cost {
            CostSpec::Linear { c0, c1 } => CostFunction::linear(c0, c1)?,
            CostSpec::Table(values) => CostFunction::table(&file.control_set, values)?,
        };
        if cost.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: cost.n() });
        }
        let target = match file.target_control {
            Some(values) => MarkovControl::new(values),
            None => {
                let grid = family.control_values();
                MarkovControl::constant(n, grid[grid.len() / 2])
            }
        };
        family.check_control(&target)?;
        let balls = file.balls.map(|b| BallPair::new(b.r, b.r1, n)).transpose()?;
        Ok(Self { name, family, cost, target, balls })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML_MODEL: &str = r#"
        states = 2
        control_set = { grid = 0.5 }

        [kernel.mixture]
        q0 = [[0.7, 0.3], [0.2, 0.8]]
        q1 = [[0.6, 0.4], [0.3, 0.7]]

        [cost.linear]
        c0 = [0.0, 1.0]
        c1 = [0.5, 0.5]

        [balls]
        r = [0]
        r1 = [0]
    "#;

    #[test]
    fn toml_mixture_model() {
        let file: ModelFile = toml::from_str(TOML_MODEL).unwrap();
        let model = Model::from_file("inline".into(), file).unwrap();
        assert_eq!(model.family.n(), 2);
        assert_eq!(model.target.values(), &[0.5, 0.5]);
        assert_eq!(model.balls.unwrap().r(), &[0]);
    }

    #[test]
    fn json_table_model() {
        let text = r#"{
            "states": ["lo", "hi"],
            "control_set": {"finite": [0.0, 1.0]},
            "kernel": {"table": [[[1, 0], [0.5, 0.5]], [[0, 1], [0.5, 0.5]]]},
            "cost": {"table": [[0, 1], [1, 2]]},
            "target_control": [1.0, 0.0]
        }"#;
        let file: ModelFile = serde_json::from_str(text).unwrap();
        let model = Model::from_file("inline".into(), file).unwrap();
        assert_eq!(model.family.states().label(1), "hi");
        assert_eq!(model.cost.eval(1, 1.0).unwrap(), 2.0);
        assert!(model.balls.is_none());
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let text = TOML_MODEL.replace("[0.7, 0.3]", "[0.7, 0.31]");
        let file: ModelFile = toml::from_str(&text).unwrap();
        assert!(matches!(Model::from_file("bad".into(), file), Err(Error::MalformedFamily(_))));
    }

    #[test]
    fn unknown_fields_and_missing_files() {
        let text = format!("extra = 1\n{TOML_MODEL}");
        assert!(toml::from_str::<ModelFile>(&text).is_err());
        assert!(matches!(Model::resolve("/nonexistent/model.toml"), Err(Error::Model(_))));
        assert_eq!(Model::resolve(CANONICAL).unwrap().family.n(), 5);
    }
}
