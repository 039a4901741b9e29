//! Resolved run configuration. Every command writes its `RunConfig` as
//! `run.toml` next to its outputs; `vline run` replays one.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vline_core::eval::NoiseSpec;
use vline_core::phantom::{
    field_from_rgb_image, gradient_field, perp_gradient_field, potential_field, PhantomId, TEST_POTENTIAL,
};
use vline_core::radon::{singular_mask, standard_angles};
use vline_core::recon::{PadSpec, Pipeline};
use vline_core::vlt::{StarGeometry, VLineGeometry};
use vline_core::{Grid2D, ScalarField, VectorField};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Phantom,
    Forward,
    Pipeline,
}

/// How the bump `W` enters a synthetic field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpForm {
    /// `f = ∇W`
    Potential,
    /// `f = ∇⊥W`
    Solenoidal,
    /// `f = ∇W + ∇⊥W`
    Helmholtz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Source {
    Phantom {
        id: u32,
    },
    Bump {
        form: BumpForm,
    },
    /// Red and green channels of a square PNG; `n` is the image size.
    Image {
        path: PathBuf,
    },
    /// A two-component field file.
    Field {
        path: PathBuf,
    },
}

impl Source {
    /// Parses `1`, `2`, `3`, `potential`, `solenoidal` or `helmholtz`.
    pub fn parse_phantom(s: &str) -> Result<Self, CliError> {
        match s {
            "potential" => Ok(Source::Bump { form: BumpForm::Potential }),
            "solenoidal" => Ok(Source::Bump { form: BumpForm::Solenoidal }),
            "helmholtz" => Ok(Source::Bump { form: BumpForm::Helmholtz }),
            _ => match s.parse::<u32>().ok().and_then(PhantomId::from_number) {
                Some(id) => Ok(Source::Phantom { id: id.number() }),
                None => Err(CliError::config(format!(
                    "unknown phantom {s:?} (expected 1, 2, 3, potential, solenoidal or helmholtz)"
                ))),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Source::Phantom { id } => format!("phantom {id}"),
            Source::Bump { form } => format!("bump ({form:?})").to_lowercase(),
            Source::Image { path } | Source::Field { path } => path.display().to_string(),
        }
    }
}

/// Built field plus, for bump sources, the exact `(V, W)` potentials.
pub struct Loaded {
    pub field: VectorField,
    pub potentials: Option<(ScalarField, ScalarField)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    /// V-line ray directions, degrees.
    pub u_deg: f64,
    pub v_deg: f64,
    /// Star branch directions (degrees) and weights.
    pub star_deg: Vec<f64>,
    pub star_weights: Vec<f64>,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec { u_deg: 45.0, v_deg: 135.0, star_deg: vec![0.0, 120.0, 240.0], star_weights: vec![1.0; 3] }
    }
}

impl GeometrySpec {
    pub fn vline(&self) -> Result<VLineGeometry, CliError> {
        Ok(VLineGeometry::from_angles(self.u_deg.to_radians(), self.v_deg.to_radians())?)
    }

    pub fn star(&self) -> Result<StarGeometry, CliError> {
        let rad: Vec<f64> = self.star_deg.iter().map(|d| d.to_radians()).collect();
        Ok(StarGeometry::from_angles(&rad, &self.star_weights)?)
    }

    pub fn describe(&self, pipeline: Option<Pipeline>) -> String {
        if pipeline == Some(Pipeline::Star) {
            let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join("/");
            format!("star {} c={}", list(&self.star_deg), list(&self.star_weights))
        } else {
            format!("u={} v={}", self.u_deg, self.v_deg)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Lvt,
    Tvt,
    Lvt1,
    Tvt1,
    Star,
}

impl Transform {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "lvt" => Ok(Transform::Lvt),
            "tvt" => Ok(Transform::Tvt),
            "lvt1" => Ok(Transform::Lvt1),
            "tvt1" => Ok(Transform::Tvt1),
            "star" => Ok(Transform::Star),
            _ => Err(CliError::config(format!("unknown transform {s:?} (expected lvt, tvt, lvt1, tvt1 or star)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub source: Source,
    pub n: usize,
    /// Half side of the square domain; 1 is the unit square `[-1, 1]²`.
    pub half_extent: f64,
    pub geometry: GeometrySpec,
    /// Forward command only.
    #[serde(default)]
    pub transforms: Vec<Transform>,
    /// Pipeline command only.
    pub pipeline: Option<u8>,
    pub noise: NoiseSpec,
    /// Padding; `None` takes the pipeline's default.
    pub pad: Option<PadSpec>,
    #[serde(default)]
    pub hann: bool,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(command: Command, source: Source, n: usize, out: PathBuf) -> Self {
        RunConfig {
            command,
            source,
            n,
            half_extent: 1.0,
            geometry: GeometrySpec::default(),
            transforms: Vec::new(),
            pipeline: None,
            noise: NoiseSpec::none(),
            pad: None,
            hann: false,
            out,
        }
    }

    pub fn pipeline(&self) -> Result<Option<Pipeline>, CliError> {
        self.pipeline.map(|id| Pipeline::try_from(id).map_err(CliError::config)).transpose()
    }

    pub fn pad_spec(&self) -> Result<PadSpec, CliError> {
        Ok(match (self.pad, self.pipeline()?) {
            (Some(p), _) => p,
            (None, Some(p)) => PadSpec::default_for(p),
            (None, None) => PadSpec::NONE,
        })
    }

    /// Checks everything that can be checked before any heavy work.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n < 4 {
            return Err(CliError::config(format!("n = {} is too small (need at least 4)", self.n)));
        }
        if !(self.half_extent.is_finite() && self.half_extent > 0.0) {
            return Err(CliError::config(format!("half extent {} must be positive", self.half_extent)));
        }
        if !(self.noise.level.is_finite() && self.noise.level >= 0.0) {
            return Err(CliError::config(format!("noise level {} must be a non-negative fraction", self.noise.level)));
        }
        let pad = self.pad_spec()?;
        if !(pad.pad_factor >= 1.0 && pad.pad_factor.is_finite()) {
            return Err(CliError::config(format!("pad factor {} must be at least 1", pad.pad_factor)));
        }
        if !(pad.support_radius > 0.0 && pad.support_radius <= 1.0) {
            return Err(CliError::config(format!("support radius {} must lie in (0, 1]", pad.support_radius)));
        }
        self.geometry.vline()?;
        let star = self.geometry.star()?;
        match self.command {
            Command::Forward if self.transforms.is_empty() => {
                return Err(CliError::config("forward needs at least one transform"));
            }
            Command::Pipeline => {
                let p = self.pipeline()?.ok_or_else(|| CliError::config("pipeline id missing"))?;
                if p == Pipeline::Star {
                    singular_mask(&standard_angles(), &star)?;
                }
            }
            _ => {}
        }
        if let Source::Image { path } | Source::Field { path } = &self.source {
            if !path.is_file() {
                return Err(CliError::config(format!("input {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D, CliError> {
        Ok(Grid2D::new(self.n, self.half_extent)?)
    }

    /// Builds the input field. Image and field sources must match `n`.
    pub fn load(&self) -> Result<Loaded, CliError> {
        let grid = self.grid()?;
        let loaded = match &self.source {
            Source::Phantom { id } => {
                let id =
                    PhantomId::from_number(*id).ok_or_else(|| CliError::config(format!("unknown phantom {id}")))?;
                Loaded { field: id.generate(&grid), potentials: None }
            }
            Source::Bump { form } => {
                let w = potential_field(&TEST_POTENTIAL, &grid);
                let zero = ScalarField::zeros(grid);
                match form {
                    BumpForm::Potential => {
                        Loaded { field: gradient_field(&TEST_POTENTIAL, &grid), potentials: Some((w, zero)) }
                    }
                    BumpForm::Solenoidal => {
                        Loaded { field: perp_gradient_field(&TEST_POTENTIAL, &grid), potentials: Some((zero, w)) }
                    }
                    BumpForm::Helmholtz => {
                        let f = gradient_field(&TEST_POTENTIAL, &grid).lincomb(
                            1.0,
                            &perp_gradient_field(&TEST_POTENTIAL, &grid),
                            1.0,
                        )?;
                        Loaded { field: f, potentials: Some((w.clone(), w)) }
                    }
                }
            }
            Source::Image { path } => Loaded { field: field_from_rgb_image(path)?, potentials: None },
            Source::Field { path } => Loaded { field: vline_core::io::read_vector_field(path)?, potentials: None },
        };
        if *loaded.field.grid() != grid {
            let g = loaded.field.grid();
            return Err(CliError::config(format!(
                "input is {}x{} on half extent {}, config asks for n = {} on half extent {}",
                g.n(),
                g.n(),
                g.half_extent(),
                self.n,
                self.half_extent
            )));
        }
        Ok(loaded)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), one_line(&e.to_string()))))
    }
}

pub(crate) fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
