//! Run configuration: a flat TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use geowarp::YType;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Observation CSV.
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    /// Covariates with spatially varying coefficients.
    pub x: Vec<String>,
    /// Covariates with constant coefficients.
    pub xconst: Vec<String>,
    pub x_nvc: bool,
    pub xgroup: Option<String>,
    pub offset: Option<String>,
    /// Names of the two coordinate columns.
    pub coords: Option<Vec<String>>,
    pub zone_id: Option<String>,
    pub adjacency: Option<PathBuf>,
    /// `edges` (one `i,j` pair of zone ids per line) or `dense` (zone-id
    /// header row, then a 0/1 matrix).
    pub adjacency_format: String,
    pub y_type: YType,
    pub y_nonneg: bool,
    pub tr_num: Option<usize>,
    pub delta: Option<f64>,
    pub threshold: f64,
    pub seed: u64,
    /// Monte Carlo draws for the moments of the response distribution.
    pub draws: usize,
    pub density_points: usize,
    pub out: PathBuf,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub multistart: bool,
    pub include_noise_in_se: bool,
    pub parallel: bool,
    pub quantile_probs: Option<Vec<f64>>,
    /// Fitted model archive (predict).
    pub model: Option<PathBuf>,
    /// Prediction-site CSV (predict).
    pub predict_data: Option<PathBuf>,
    /// Append `len95` to the prediction table.
    pub len95: bool,
    /// Sample column (transform-check); defaults to `response`.
    pub column: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            response: None,
            x: Vec::new(),
            xconst: Vec::new(),
            x_nvc: false,
            xgroup: None,
            offset: None,
            coords: None,
            zone_id: None,
            adjacency: None,
            adjacency_format: "edges".into(),
            y_type: YType::Continuous,
            y_nonneg: false,
            tr_num: None,
            delta: None,
            threshold: 0.0,
            seed: 1,
            draws: geowarp::inference::DEFAULT_MC_DRAWS,
            density_points: 512,
            out: PathBuf::from("out"),
            max_iter: 500,
            rel_tol: 1e-8,
            multistart: true,
            include_noise_in_se: true,
            parallel: true,
            quantile_probs: None,
            model: None,
            predict_data: None,
            len95: false,
            column: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub tr_num: Option<usize>,
    pub y_type: Option<YType>,
    pub y_nonneg: bool,
}

/// How observations map to basis sites.
pub enum Spatial<'a> {
    Coords(&'a str, &'a str),
    Zones {
        zone_id: &'a str,
        adjacency: &'a Path,
    },
}

impl RunConfig {
    pub fn load(path: &Path, ov: &Overrides) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data,
            &mut cfg.adjacency,
            &mut cfg.model,
            &mut cfg.predict_data,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        cfg.out = base.join(&cfg.out);
        if let Some(v) = ov.seed {
            cfg.seed = v;
        }
        if let Some(v) = &ov.out {
            cfg.out = v.clone();
        }
        if let Some(v) = ov.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = ov.tr_num {
            cfg.tr_num = Some(v);
        }
        if let Some(v) = ov.y_type {
            cfg.y_type = v;
        }
        cfg.y_nonneg |= ov.y_nonneg;
        Ok(cfg)
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Config("config key 'data' is required".into()))
    }

    pub fn response(&self) -> Result<&str> {
        self.response
            .as_deref()
            .ok_or_else(|| CliError::Config("config key 'response' is required".into()))
    }

    pub fn spatial(&self) -> Result<Spatial<'_>> {
        match (&self.coords, &self.adjacency, &self.zone_id) {
            (Some(_), Some(_), _) => Err(CliError::Config(
                "choose either 'coords' or 'adjacency' + 'zone_id', not both".into(),
            )),
            (Some(c), None, None) => match c.as_slice() {
                [x, y] => Ok(Spatial::Coords(x, y)),
                _ => Err(CliError::Config(
                    "'coords' must name exactly two columns".into(),
                )),
            },
            (Some(_), None, Some(_)) => Err(CliError::Config(
                "'zone_id' is only used together with 'adjacency'".into(),
            )),
            (None, Some(a), Some(z)) => {
                if !matches!(self.adjacency_format.as_str(), "edges" | "dense") {
                    return Err(CliError::Config(format!(
                        "adjacency_format must be 'edges' or 'dense', got '{}'",
                        self.adjacency_format
                    )));
                }
                Ok(Spatial::Zones {
                    zone_id: z,
                    adjacency: a,
                })
            }
            (None, Some(_), None) => Err(CliError::Config(
                "'adjacency' needs 'zone_id' to link observations to zones".into(),
            )),
            (None, None, _) => Err(CliError::Config(
                "a spatial basis needs 'coords' or 'adjacency' + 'zone_id'".into(),
            )),
        }
    }

    pub fn transform(&self, tr_num: usize) -> Result<geowarp::TransformSpec> {
        let mut t = geowarp::TransformSpec::new(self.y_type, self.y_nonneg, tr_num);
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(CliError::Config(format!("delta must be positive, got {d}")));
            }
            t.delta = d;
        }
        Ok(t)
    }

    pub fn parallelism(&self) -> geowarp::Parallelism {
        if self.parallel {
            geowarp::Parallelism::Parallel
        } else {
            geowarp::Parallelism::Sequential
        }
    }

    pub fn fit_options(&self) -> geowarp::FitOptions {
        let mut o = geowarp::FitOptions {
            parallelism: self.parallelism(),
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            multistart: self.multistart,
            include_noise_in_se: self.include_noise_in_se,
            ..Default::default()
        };
        if let Some(p) = &self.quantile_probs {
            o.quantile_probs = p.clone();
        }
        o
    }

    pub fn check_probs(&self) -> Result<()> {
        if let Some(p) = &self.quantile_probs {
            if p.is_empty() || p.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                return Err(CliError::Config(
                    "quantile_probs must be non-empty with values in (0, 1)".into(),
                ));
            }
            if p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Config(
                    "quantile_probs must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}
