//! The phantom, forward and pipeline commands.

use std::path::{Path, PathBuf};

use vline_core::eval::{max_err, rel_l2, ComponentError, ImageBounds, ReconReport};
use vline_core::io::{
    write_components_png, write_field, write_quiver_png, write_rgb_png, write_scalar_png, write_vector_field,
};
use vline_core::recon::{run_pipeline, PipelineConfig, PipelineRun};
use vline_core::vlt::{lvt, lvt1, star, tvt, tvt1};
use vline_core::{ScalarField, VectorField};

use crate::config::{Command, RunConfig, Source, Transform};
use crate::CliError;

/// Arrows per side in quiver plots.
const QUIVER_ARROWS: usize = 24;
/// Error metrics use the disc of this radius (times the half extent).
pub const INSET: f64 = 0.8;

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    /// Everything written, `run.toml` first.
    pub files: Vec<PathBuf>,
    pub report: Option<ReconReport>,
    pub warnings: Vec<String>,
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
    images: Vec<ImageBounds>,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn scalar(&mut self, name: &str, f: &ScalarField) -> Result<(), CliError> {
        let p = self.path(&format!("{name}.vlf"));
        write_field(&p, &[f])?;
        let p = self.path(&format!("{name}.png"));
        let (lo, hi) = write_scalar_png(&p, f, None)?;
        self.images.push(ImageBounds { file: format!("{name}.png"), lo, hi });
        Ok(())
    }

    fn components(&mut self, name: &str, f: &VectorField) -> Result<(), CliError> {
        let p = self.path(name);
        let (lo, hi) = write_components_png(&p, f, None)?;
        self.images.push(ImageBounds { file: name.into(), lo, hi });
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.files.iter().filter_map(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).collect()
    }
}

/// Validates `cfg`, writes it as `run.toml` in `cfg.out` and runs it.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    // the saved config names its padding even when it was defaulted
    let mut cfg = cfg.clone();
    cfg.pad = Some(cfg.pad_spec()?);
    let cfg = &cfg;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", cfg.out.display())))?;
    let mut out = Out { dir: &cfg.out, files: Vec::new(), images: Vec::new() };
    let p = out.path("run.toml");
    std::fs::write(&p, cfg.to_toml()).map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display())))?;

    let (report, warnings) = match cfg.command {
        Command::Phantom => {
            phantom(cfg, &mut out)?;
            (None, Vec::new())
        }
        Command::Forward => {
            forward(cfg, &mut out)?;
            (None, Vec::new())
        }
        Command::Pipeline => {
            let (r, w) = pipeline(cfg, &mut out)?;
            (Some(r), w)
        }
    };
    Ok(Outcome { files: out.files, report, warnings })
}

fn phantom(cfg: &RunConfig, out: &mut Out) -> Result<(), CliError> {
    let f = cfg.load()?.field;
    write_vector_field(&out.path("field.vlf"), &f)?;
    out.components("components.png", &f)?;
    write_quiver_png(&out.path("quiver.png"), &f, QUIVER_ARROWS)?;
    Ok(())
}

fn forward(cfg: &RunConfig, out: &mut Out) -> Result<(), CliError> {
    let f = cfg.load()?.field;
    let f = f.embed(&f.grid().padded(cfg.pad_spec()?.pad_factor)?)?;
    let g = cfg.geometry.vline()?;
    for t in &cfg.transforms {
        match t {
            Transform::Lvt => out.scalar("lvt", &lvt(&f, &g))?,
            Transform::Tvt => out.scalar("tvt", &tvt(&f, &g))?,
            Transform::Lvt1 => out.scalar("lvt1", &lvt1(&f, &g))?,
            Transform::Tvt1 => out.scalar("tvt1", &tvt1(&f, &g))?,
            Transform::Star => {
                let (long, trans) = star(&f, &cfg.geometry.star()?);
                out.scalar("star_long", &long)?;
                out.scalar("star_trans", &trans)?;
            }
        }
    }
    Ok(())
}

fn component(name: &str, a: &ScalarField, b: &ScalarField, radius: f64) -> Result<ComponentError, CliError> {
    let m = rel_l2(a, b, radius)?;
    Ok(ComponentError { name: name.into(), rel_l2: m.value, absolute: m.absolute, max_err: max_err(a, b, radius)? })
}

/// Both components pooled over the whole square.
fn whole_image(recon: &VectorField, truth: &VectorField) -> ComponentError {
    let (mut num, mut den, mut worst) = (0.0, 0.0, 0.0f64);
    for (a, b) in [(&recon.f1, &truth.f1), (&recon.f2, &truth.f2)] {
        for (x, y) in a.values().iter().zip(b.values()) {
            num += (x - y) * (x - y);
            den += y * y;
            worst = worst.max((x - y).abs());
        }
    }
    let absolute = den == 0.0;
    let rel = if absolute { num.sqrt() } else { (num / den).sqrt() };
    ComponentError { name: "rgb".into(), rel_l2: rel, absolute, max_err: worst }
}

fn pipeline(cfg: &RunConfig, out: &mut Out) -> Result<(ReconReport, Vec<String>), CliError> {
    let loaded = cfg.load()?;
    let id = cfg.pipeline()?.ok_or_else(|| CliError::config("pipeline id missing"))?;
    let pcfg = PipelineConfig {
        pipeline: id,
        vline: cfg.geometry.vline()?,
        star: cfg.geometry.star()?,
        pad: cfg.pad_spec()?,
        noise: cfg.noise,
        hann: cfg.hann,
    };
    let run: PipelineRun = run_pipeline(&loaded.field, &pcfg)?;
    let radius = INSET * cfg.half_extent;

    for (name, d) in &run.data {
        write_field(&out.path(&format!("{name}.vlf")), &[d])?;
    }
    write_vector_field(&out.path("truth.vlf"), &run.truth)?;
    write_vector_field(&out.path("recon.vlf"), &run.recon)?;
    out.components("recon.png", &run.recon)?;
    out.components("diff.png", &run.recon.lincomb(1.0, &run.truth, -1.0)?)?;
    write_quiver_png(&out.path("recon_quiver.png"), &run.recon, QUIVER_ARROWS)?;

    let mut components = vec![
        component("f1", &run.recon.f1, &run.truth.f1, radius)?,
        component("f2", &run.recon.f2, &run.truth.f2, radius)?,
    ];
    if let Some((v, w)) = &run.potentials {
        write_field(&out.path("potentials.vlf"), &[v, w])?;
        let p = out.path("V.png");
        let (lo, hi) = write_scalar_png(&p, v, None)?;
        out.images.push(ImageBounds { file: "V.png".into(), lo, hi });
        let p = out.path("W.png");
        let (lo, hi) = write_scalar_png(&p, w, None)?;
        out.images.push(ImageBounds { file: "W.png".into(), lo, hi });
        if let Some((v0, w0)) = &loaded.potentials {
            components.push(component("V", v, v0, radius)?);
            components.push(component("W", w, w0, radius)?);
        }
    }
    if let Some((rec, exact)) = &run.svl {
        write_vector_field(&out.path("svl.vlf"), rec)?;
        components.push(component("svl1", &rec.f1, &exact.f1, radius)?);
        components.push(component("svl2", &rec.f2, &exact.f2, radius)?);
    }
    if matches!(cfg.source, Source::Image { .. }) {
        write_rgb_png(&out.path("recon_rgb.png"), &run.recon)?;
        components.push(whole_image(&run.recon, &run.truth));
    }

    let report_path = out.path("report.toml");
    let report = ReconReport {
        pipeline: id.id(),
        geometry: cfg.geometry.describe(Some(id)),
        n: cfg.n,
        half_extent: cfg.half_extent,
        inset_radius: radius,
        seconds: run.seconds,
        files: out.names(),
        noise: cfg.noise,
        components,
        images: out.images.clone(),
    };
    report.write(&report_path)?;
    Ok((report, run.warnings))
}
