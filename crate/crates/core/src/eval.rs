//! Noise injection, error metrics and run reports.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    Gaussian,
    Uniform,
}

/// Additive noise with `‖η‖₂ = level · ‖data‖₂` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
    #[serde(default)]
    pub model: NoiseModel,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(level.is_finite() && level >= 0.0) {
            return Err(Error::InvalidGeometry(format!("noise level {level} must be a non-negative fraction")));
        }
        Ok(NoiseSpec { level, seed, model: NoiseModel::Gaussian })
    }

    pub fn none() -> Self {
        NoiseSpec { level: 0.0, seed: 0, model: NoiseModel::Gaussian }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Noisy {
    pub field: ScalarField,
    /// Set when `level > 0` but the data were identically zero, so no
    /// noise could be scaled to them.
    pub zero_data: bool,
}

pub fn add_noise(data: &ScalarField, spec: &NoiseSpec) -> Noisy {
    add_noise_stream(data, spec, 0)
}

/// Like [`add_noise`] with an independent random stream per data set, so
/// several data sets of one run get uncorrelated noise from one seed.
pub fn add_noise_stream(data: &ScalarField, spec: &NoiseSpec, stream: u64) -> Noisy {
    let norm = data.norm_l2();
    if spec.level == 0.0 || norm == 0.0 {
        return Noisy { field: data.clone(), zero_data: spec.level > 0.0 };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let mut eta: Vec<f64> = match spec.model {
        NoiseModel::Gaussian => (0..data.values().len()).map(|_| rng.sample(StandardNormal)).collect(),
        NoiseModel::Uniform => {
            let dist = Uniform::new(-1.0, 1.0).expect("valid range");
            (0..data.values().len()).map(|_| rng.sample(dist)).collect()
        }
    };
    let eta_norm = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c = spec.level * norm / eta_norm;
    for (e, d) in eta.iter_mut().zip(data.values()) {
        *e = d + c * *e;
    }
    Noisy { field: ScalarField::from_values(*data.grid(), eta).expect("finite noisy data"), zero_data: false }
}

/// An error value, flagged when the reference was zero on the region and
/// the value is therefore absolute rather than relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub absolute: bool,
}

/// Pixels whose centers lie in the disc `|x| ≤ radius`.
pub fn inset_mask(field: &ScalarField, radius: f64) -> Vec<bool> {
    let g = field.grid();
    let n = g.n();
    (0..n * n)
        .map(|k| {
            let [x, y] = g.point(k / n, k % n);
            x.hypot(y) <= radius
        })
        .collect()
}

/// `‖a - b‖₂ / ‖b‖₂` over the inset disc.
pub fn rel_l2(a: &ScalarField, b: &ScalarField, inset_radius: f64) -> Result<Metric> {
    check(a, b)?;
    let mask = inset_mask(b, inset_radius);
    let (mut num, mut den) = (0.0, 0.0);
    for ((x, y), m) in a.values().iter().zip(b.values()).zip(&mask) {
        if *m {
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    Ok(if den > 0.0 {
        Metric { value: (num / den).sqrt(), absolute: false }
    } else {
        Metric { value: num.sqrt(), absolute: true }
    })
}

/// `max |a - b|` over the inset disc.
pub fn max_err(a: &ScalarField, b: &ScalarField, inset_radius: f64) -> Result<f64> {
    check(a, b)?;
    let mask = inset_mask(b, inset_radius);
    Ok(a.values()
        .iter()
        .zip(b.values())
        .zip(&mask)
        .filter(|(_, m)| **m)
        .fold(0.0, |acc, ((x, y), _)| acc.max((x - y).abs())))
}

fn check(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("metric inputs on different grids".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub name: String,
    pub rel_l2: f64,
    /// True when the reference vanished on the inset and `rel_l2` is absolute.
    pub absolute: bool,
    pub max_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageBounds {
    pub file: String,
    pub lo: f64,
    pub hi: f64,
}

/// Summary of one pipeline run. Serialized as TOML:
///
/// ```toml
/// pipeline = 2
/// geometry = "u=45 v=135"
/// n = 160
/// half_extent = 1.0
/// inset_radius = 0.8
/// seconds = 1.9
/// files = ["recon.vlf", ...]
///
/// [noise]
/// level = 0.05
/// seed = 7
/// model = "gaussian"
///
/// [[components]]
/// name = "f1"
/// rel_l2 = 0.04
/// absolute = false
/// max_err = 0.02
///
/// [[images]]
/// file = "recon_f1.png"
/// lo = -0.1
/// hi = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub pipeline: u8,
    pub geometry: String,
    pub n: usize,
    pub half_extent: f64,
    pub inset_radius: f64,
    pub seconds: f64,
    #[serde(default)]
    pub files: Vec<String>,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub components: Vec<ComponentError>,
    #[serde(default)]
    pub images: Vec<ImageBounds>,
}

impl ReconReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|reason| Error::Format { path: path.to_path_buf(), reason })
    }
}
