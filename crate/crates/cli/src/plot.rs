//! PNG heatmaps of lattice-shaped values.

use anyhow::{bail, Result};
use image::{Rgb, RgbImage};

// Sequential palette, dark blue through teal to yellow.
const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

pub fn colour(t: f64) -> Rgb<u8> {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mix = |c: usize| (STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8;
    Rgb([mix(0), mix(1), mix(2)])
}

/// Row-major `values` drawn with `cell` pixels per site, first row at the top.
pub fn heatmap(values: &[f64], n_rows: usize, n_cols: usize, cell: u32) -> Result<RgbImage> {
    if values.len() != n_rows * n_cols || values.is_empty() {
        bail!("heatmap needs {n_rows} x {n_cols} values, got {}", values.len());
    }
    if cell == 0 {
        bail!("cell size must be positive");
    }
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = RgbImage::from_fn(n_cols as u32 * cell, n_rows as u32 * cell, |x, y| {
        let (r, c) = ((y / cell) as usize, (x / cell) as usize);
        colour((values[r * n_cols + c] - lo) / span)
    });
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_ends() {
        assert_eq!(colour(0.0), Rgb([68, 1, 84]));
        assert_eq!(colour(1.0), Rgb([253, 231, 37]));
        assert_eq!(colour(f64::NAN), colour(0.0));
    }

    #[test]
    fn heatmap_geometry() {
        let img = heatmap(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 2, 3, 4).unwrap();
        assert_eq!(img.dimensions(), (12, 8));
        assert_eq!(*img.get_pixel(0, 0), colour(0.0));
        assert_eq!(*img.get_pixel(11, 7), colour(1.0));
        assert!(heatmap(&[1.0], 2, 2, 1).is_err());
    }

    #[test]
    fn constant_field_is_drawn() {
        let img = heatmap(&[2.0; 4], 2, 2, 1).unwrap();
        assert_eq!(*img.get_pixel(1, 1), colour(0.0));
    }
}
