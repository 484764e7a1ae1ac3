use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::num::{Matrix, TimeGrid};
use crate::plant::{LtiPlant, SignalSpec};
use crate::regression::FilterSpec;

/// Everything needed to reproduce one comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub plant: PlantSection,
    pub gpebo: GpeboSection,
    pub input: SignalSpec,
    pub disturbance: SignalSpec,
    #[serde(default)]
    pub grid: GridSection,
    pub luenberger: LuenbergerSection,
    pub drem: DremSection,
    pub baseline: BaselineSection,
    pub cubic: CubicSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpeboSection {
    pub xi0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "GridSection::default_horizon")]
    pub horizon: f64,
    #[serde(default = "GridSection::default_step")]
    pub step: f64,
}

impl GridSection {
    fn default_horizon() -> f64 {
        60.0
    }

    fn default_step() -> f64 {
        1e-3
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            t0: 0.0,
            horizon: Self::default_horizon(),
            step: Self::default_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuenbergerSection {
    pub gain: Vec<f64>,
    pub xhat0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DremSection {
    pub poles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub gamma: f64,
    pub theta0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicSection {
    pub smoothing_pole: f64,
    pub drem_poles: Vec<f64>,
    /// One adaptation gain per unknown parameter.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Default output directory when neither the CLI, the environment nor the
/// config names one.
pub const DEFAULT_OUTPUT_DIR: &str = "out";

impl Scenario {
    /// The second-order oscillator example with `δ = 0.3 sin t`.
    pub fn paper() -> Self {
        Self {
            plant: PlantSection {
                a: vec![vec![0.0, 1.0], vec![-9.0, 0.0]],
                b: vec![0.0, 1.0],
                c: vec![5.0, 0.0],
                x0: vec![1.0, 2.0],
            },
            gpebo: GpeboSection {
                xi0: vec![0.0, 0.0],
            },
            input: SignalSpec::UnitStep,
            disturbance: SignalSpec::Sinusoid {
                amplitude: 0.3,
                omega: 1.0,
                phase: 0.0,
            },
            grid: GridSection::default(),
            luenberger: LuenbergerSection {
                gain: vec![2.0, 3.2],
                xhat0: vec![0.0, 0.0],
            },
            drem: DremSection { poles: vec![1.0] },
            baseline: BaselineSection {
                gamma: 1.0,
                theta0: vec![0.0, 0.0],
            },
            cubic: CubicSection {
                smoothing_pole: 1.0,
                drem_poles: vec![2.0, 6.0],
                gamma: vec![1e11, 1e13],
            },
            output: OutputSection::default(),
        }
    }

    /// Parses TOML. Errors name the offending key path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let message = e.into_inner().message().trim().to_string();
            Error::validation(field, message)
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn order(&self) -> usize {
        self.plant.a.len()
    }

    pub fn time_grid(&self) -> Result<TimeGrid<f64>> {
        let g = &self.grid;
        TimeGrid::spanning(g.t0, g.t0 + g.horizon, g.step)
    }

    /// Disturbance-free copy.
    pub fn without_disturbance(&self) -> Self {
        Self {
            disturbance: SignalSpec::Zero,
            ..self.clone()
        }
    }

    /// Copy with the disturbance scaled by `factor`.
    pub fn with_disturbance_scale(&self, factor: f64) -> Self {
        Self {
            disturbance: self.disturbance.scaled(factor),
            ..self.clone()
        }
    }

    /// `x(0) − ξ(0)`: known only to the simulation, used for metrics.
    pub fn theta_true(&self) -> Vec<f64> {
        self.plant
            .x0
            .iter()
            .zip(&self.gpebo.xi0)
            .map(|(x, xi)| x - xi)
            .collect()
    }

    pub fn build_plant(&self) -> Result<LtiPlant<f64>> {
        LtiPlant::new(
            Matrix::from_rows(&self.plant.a)?,
            self.plant.b.clone(),
            self.plant.c.clone(),
        )
    }

    pub fn drem_filters(&self) -> Result<Vec<FilterSpec<f64>>> {
        self.drem
            .poles
            .iter()
            .map(|&p| FilterSpec::lag(p))
            .collect()
    }

    pub fn cubic_filters(&self) -> Result<Vec<FilterSpec<f64>>> {
        self.cubic
            .drem_poles
            .iter()
            .map(|&p| FilterSpec::lag(p))
            .collect()
    }

    pub fn seed(&self) -> Option<u64> {
        self.disturbance.seed().or(self.input.seed())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output section.
    pub fn config_hash(&self) -> String {
        let canonical = Self {
            output: OutputSection::default(),
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("scenario serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Checks every dimension and range before any simulation runs.
    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        if n == 0 {
            return Err(Error::validation("plant.a", "must have at least one row"));
        }
        for (i, row) in self.plant.a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(
                    format!("plant.a[{i}]"),
                    format!(
                        "expected {n} entries (A must be square), found {}",
                        row.len()
                    ),
                ));
            }
            finite(&format!("plant.a[{i}]"), row)?;
        }
        let vectors: [(&str, &[f64]); 7] = [
            ("plant.b", &self.plant.b),
            ("plant.c", &self.plant.c),
            ("plant.x0", &self.plant.x0),
            ("gpebo.xi0", &self.gpebo.xi0),
            ("luenberger.gain", &self.luenberger.gain),
            ("luenberger.xhat0", &self.luenberger.xhat0),
            ("baseline.theta0", &self.baseline.theta0),
        ];
        for (field, v) in vectors {
            length(field, v, n)?;
            finite(field, v)?;
        }
        length("drem.poles", &self.drem.poles, n - 1)?;
        positive_all("drem.poles", &self.drem.poles)?;
        positive("baseline.gamma", self.baseline.gamma)?;
        positive("cubic.smoothing_pole", self.cubic.smoothing_pole)?;
        length("cubic.drem_poles", &self.cubic.drem_poles, 2)?;
        positive_all("cubic.drem_poles", &self.cubic.drem_poles)?;
        length("cubic.gamma", &self.cubic.gamma, n)?;
        positive_all("cubic.gamma", &self.cubic.gamma)?;

        let g = &self.grid;
        finite("grid.t0", &[g.t0])?;
        positive("grid.step", g.step)?;
        if !(g.horizon >= 0.0) || !g.horizon.is_finite() {
            return Err(Error::validation("grid.horizon", "must be finite and >= 0"));
        }
        let grid = self
            .time_grid()
            .map_err(|e| Error::validation("grid", e.to_string()))?;
        if grid.len() < 2 {
            return Err(Error::validation(
                "grid.horizon",
                format!("grid has {} sample(s); at least 2 are required", grid.len()),
            ));
        }
        for (field, spec) in [("input", &self.input), ("disturbance", &self.disturbance)] {
            spec.validate()
                .map_err(|e| Error::validation(field, e.to_string()))?;
            if let SignalSpec::Samples { values } = spec {
                if values.len() != grid.len() {
                    return Err(Error::validation(
                        format!("{field}.values"),
                        format!(
                            "expected {} samples (one per grid point), found {}",
                            grid.len(),
                            values.len()
                        ),
                    ));
                }
            }
        }
        let plant = self
            .build_plant()
            .map_err(|e| Error::validation("plant", e.to_string()))?;
        if !plant.is_observable() {
            return Err(Error::validation(
                "plant.c",
                format!(
                    "pair (A, C) is not observable (observability rank {} < {n})",
                    plant.observability_rank()
                ),
            ));
        }
        Ok(())
    }
}

fn length(field: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::validation(
            field,
            format!("expected {n} entries, found {}", v.len()),
        ));
    }
    Ok(())
}

fn finite(field: &str, v: &[f64]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::validation(
            field,
            format!("entries must be finite, found {x}"),
        ));
    }
    Ok(())
}

fn positive(field: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::validation(
            field,
            format!("must be finite and > 0, found {x}"),
        ));
    }
    Ok(())
}

fn positive_all(field: &str, v: &[f64]) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        positive(&format!("{field}[{i}]"), x)?;
    }
    Ok(())
}
