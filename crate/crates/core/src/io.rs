//! Portable field files and PNG figure export.
//!
//! Field file layout: one ASCII header line `VLF1 <n> <half_extent> <ncomp>\n`
//! followed by `ncomp * n * n` little-endian `f64` values, row-major,
//! components concatenated.
//!
//! PNG orientation: image column `c` is the `x` index, image row `r` is the
//! `y` index `n - 1 - r`, so `+y` points up as in the usual plots.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField, VectorField};

const FIELD_MAGIC: &str = "VLF1";

pub fn write_field(path: &Path, components: &[&ScalarField]) -> Result<()> {
    let first = components
        .first()
        .ok_or_else(|| Error::Format { path: path.to_path_buf(), reason: "no components to write".into() })?;
    let grid = *first.grid();
    if components.iter().any(|c| *c.grid() != grid) {
        return Err(Error::GridMismatch("field components on different grids".into()));
    }
    let mut buf = format!("{FIELD_MAGIC} {} {} {}\n", grid.n(), grid.half_extent(), components.len()).into_bytes();
    buf.reserve(8 * grid.len() * components.len());
    for c in components {
        for v in c.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Vec<ScalarField>> {
    let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != FIELD_MAGIC {
        return Err(bad(format!("expected `{FIELD_MAGIC} <n> <half_extent> <ncomp>` header")));
    }
    let n: usize = parts[1].parse().map_err(|_| bad(format!("bad pixel count {:?}", parts[1])))?;
    let half: f64 = parts[2].parse().map_err(|_| bad(format!("bad half extent {:?}", parts[2])))?;
    let ncomp: usize = parts[3].parse().map_err(|_| bad(format!("bad component count {:?}", parts[3])))?;
    let grid = Grid2D::new(n, half)?;

    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let expected = 8 * ncomp * grid.len();
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} data bytes, found {}", bytes.len())));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))).collect();
    values.chunks_exact(grid.len()).map(|c| ScalarField::from_values(grid, c.to_vec())).collect()
}

pub fn write_vector_field(path: &Path, field: &VectorField) -> Result<()> {
    write_field(path, &[&field.f1, &field.f2])
}

pub fn read_vector_field(path: &Path) -> Result<VectorField> {
    let mut comps = read_field(path)?;
    if comps.len() != 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected 2 components, found {}", comps.len()),
        });
    }
    let f2 = comps.pop().expect("two components");
    let f1 = comps.pop().expect("two components");
    VectorField::new(f1, f2)
}

pub fn read_scalar_field(path: &Path) -> Result<ScalarField> {
    let mut comps = read_field(path)?;
    if comps.len() != 1 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected 1 component, found {}", comps.len()),
        });
    }
    Ok(comps.pop().expect("one component"))
}

// viridis sampled at 0.0, 0.1, ..., 1.0
const VIRIDIS: [[u8; 3]; 11] = [
    [68, 1, 84],
    [72, 36, 117],
    [65, 68, 135],
    [53, 95, 141],
    [42, 120, 142],
    [33, 145, 140],
    [34, 168, 132],
    [68, 191, 112],
    [122, 209, 81],
    [189, 223, 38],
    [253, 231, 37],
];

/// Maps `t` in `[0, 1]` onto the viridis ramp by linear interpolation.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let x = t * 10.0;
    let k = (x.floor() as usize).min(9);
    let w = x - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (a[c] as f64 * (1.0 - w) + b[c] as f64 * w).round() as u8;
    }
    out
}

/// Writes `field` as a colormapped PNG. `bounds` defaults to the field's
/// own min/max; the bounds actually used are returned.
pub fn write_scalar_png(path: &Path, field: &ScalarField, bounds: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let (lo, hi) = bounds.unwrap_or_else(|| field.min_max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = field.n() as u32;
    let img = RgbImage::from_fn(n, n, |c, r| {
        let v = field.get(c as usize, (n - 1 - r) as usize);
        Rgb(colormap((v - lo) / span))
    });
    img.save(path)?;
    Ok((lo, hi))
}

/// Both components side by side (`f1` left) with a white gap, sharing one
/// color scale; returns the bounds used.
pub fn write_components_png(path: &Path, field: &VectorField, bounds: Option<(f64, f64)>) -> Result<(f64, f64)> {
    const GAP: u32 = 8;
    let (lo, hi) = bounds.unwrap_or_else(|| {
        let (a, b) = (field.f1.min_max(), field.f2.min_max());
        (a.0.min(b.0), a.1.max(b.1))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = field.grid().n() as u32;
    let img = RgbImage::from_fn(2 * n + GAP, n, |c, r| {
        let comp = if c < n {
            &field.f1
        } else if c >= n + GAP {
            &field.f2
        } else {
            return Rgb([255, 255, 255]);
        };
        let i = if c < n { c } else { c - n - GAP };
        Rgb(colormap((comp.get(i as usize, (n - 1 - r) as usize) - lo) / span))
    });
    img.save(path)?;
    Ok((lo, hi))
}

/// Writes a vector field as an RGB image: red = f1, green = f2, blue = 0,
/// each clamped to `[0, 1]` and quantized to 8 bits.
pub fn write_rgb_png(path: &Path, field: &VectorField) -> Result<()> {
    let n = field.grid().n() as u32;
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let img = RgbImage::from_fn(n, n, |c, r| {
        let (i, j) = (c as usize, (n - 1 - r) as usize);
        Rgb([q(field.f1.get(i, j)), q(field.f2.get(i, j)), 0])
    });
    img.save(path)?;
    Ok(())
}

/// Arrow plot of `field` on a coarse lattice of about `arrows` points per side.
pub fn write_quiver_png(path: &Path, field: &VectorField, arrows: usize) -> Result<()> {
    const SIZE: u32 = 512;
    let n = field.grid().n();
    let stride = (n / arrows.max(1)).max(1);
    let cell = SIZE as f64 * stride as f64 / n as f64;
    let max_len = (0..n)
        .step_by(stride)
        .flat_map(|i| (0..n).step_by(stride).map(move |j| (i, j)))
        .map(|(i, j)| field.f1.get(i, j).hypot(field.f2.get(i, j)))
        .fold(0.0f64, f64::max);
    let scale = if max_len > 0.0 { 0.9 * cell / max_len } else { 0.0 };

    let mut img = RgbImage::from_pixel(SIZE, SIZE, Rgb([255, 255, 255]));
    let ink = Rgb([20, 40, 160]);
    let to_px = |k: usize| (k as f64 + 0.5) * SIZE as f64 / n as f64;
    for i in (stride / 2..n).step_by(stride) {
        for j in (stride / 2..n).step_by(stride) {
            let (vx, vy) = (field.f1.get(i, j) * scale, field.f2.get(i, j) * scale);
            let (x0, y0) = (to_px(i), SIZE as f64 - to_px(j));
            let (x1, y1) = (x0 + vx, y0 - vy);
            draw_line(&mut img, (x0, y0), (x1, y1), ink);
            let len = vx.hypot(vy);
            if len > 2.0 {
                let (ux, uy) = (vx / len, -vy / len);
                let head = 0.3 * len;
                for side in [-1.0, 1.0] {
                    let hx = x1 - head * (ux * 0.866 - side * uy * 0.5);
                    let hy = y1 - head * (uy * 0.866 + side * ux * 0.5);
                    draw_line(&mut img, (x1, y1), (hx, hy), ink);
                }
            }
        }
    }
    img.save(path)?;
    Ok(())
}

fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (a.0 + t * (b.0 - a.0)).round();
        let y = (a.1 + t * (b.1 - a.1)).round();
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_scalar;

    #[test]
    fn field_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vlf");
        let g = Grid2D::new(7, 1.3).unwrap();
        let f = VectorField::new(
            sample_scalar(&g, |x, y| x * 0.1 + y).unwrap(),
            sample_scalar(&g, |x, y| (x * y).sin() / 3.0).unwrap(),
        )
        .unwrap();
        write_vector_field(&path, &f).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"VLF1 7 1.3 2\n"));
        assert_eq!(bytes.len(), "VLF1 7 1.3 2\n".len() + 2 * 49 * 8);
        assert_eq!(read_vector_field(&path).unwrap(), f);
        assert!(read_scalar_field(&path).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vlf");
        fs::write(&path, b"VLF1 4 1 1\n\x00\x00").unwrap();
        assert!(matches!(read_field(&path), Err(Error::Format { .. })));
        fs::write(&path, b"XXXX 4 1 1\n").unwrap();
        assert!(matches!(read_field(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), VIRIDIS[0]);
        assert_eq!(colormap(1.0), VIRIDIS[10]);
        assert_eq!(colormap(-3.0), VIRIDIS[0]);
        assert_eq!(colormap(0.5), VIRIDIS[5]);
    }

    #[test]
    fn png_bounds_default_to_min_max() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::new(8, 1.0).unwrap();
        let f = sample_scalar(&g, |x, _| x).unwrap();
        let (lo, hi) = write_scalar_png(&dir.path().join("a.png"), &f, None).unwrap();
        assert_eq!((lo, hi), f.min_max());
        let img = image::open(dir.path().join("a.png")).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(0, 0).0, VIRIDIS[0]);
        assert_eq!(img.get_pixel(7, 0).0, VIRIDIS[10]);
    }

    #[test]
    fn components_share_one_scale() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::new(6, 1.0).unwrap();
        let f = VectorField::new(ScalarField::constant(g, -1.0), ScalarField::constant(g, 3.0)).unwrap();
        let path = dir.path().join("c.png");
        assert_eq!(write_components_png(&path, &f, None).unwrap(), (-1.0, 3.0));
        let img = image::open(&path).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (20, 6));
        assert_eq!(img.get_pixel(0, 0).0, VIRIDIS[0]);
        assert_eq!(img.get_pixel(8, 0).0, [255, 255, 255]);
        assert_eq!(img.get_pixel(19, 5).0, VIRIDIS[10]);
    }
}
