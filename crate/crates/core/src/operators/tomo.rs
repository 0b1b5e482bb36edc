//! Parallel-beam projection matrix with exact ray/pixel intersection lengths.
//!
//! The image is an `n × n` grid of unit pixels covering `[−n/2, n/2]²`,
//! stored row-major with row 0 at the top (largest `y`). For an angle `θ`
//! (degrees) and detector offset `t`, the ray passes through
//! `(t cos θ, t sin θ)` with direction `(−sin θ, cos θ)`. Detector offsets
//! have unit spacing and are centred on the rotation axis, so with
//! `n_lines = n` the rays at `θ = 90°` run through the pixel-row centres.
//!
//! Rows are ordered angle-major: row `a * n_lines + j` is line `j` of angle
//! `a`.

use crate::error::{Error, Result};
use crate::operators::sparse::CsrMatrix;

/// `count` angles equally spaced on `(0°, 180°]`.
pub fn equally_spaced_angles(count: usize) -> Vec<f64> {
    (1..=count).map(|k| 180.0 * k as f64 / count as f64).collect()
}

pub(crate) fn detector_offsets(n_lines: usize) -> Vec<f64> {
    let centre = (n_lines as f64 - 1.0) / 2.0;
    (0..n_lines).map(|j| j as f64 - centre).collect()
}

pub(crate) fn ray(angle_deg: f64, offset: f64) -> ((f64, f64), (f64, f64)) {
    let (s, c) = angle_deg.to_radians().sin_cos();
    ((offset * c, offset * s), (-s, c))
}

/// Parameter interval over which `origin + s·dir` lies inside the box.
fn clip_to_box(origin: (f64, f64), dir: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> Option<(f64, f64)> {
    let mut s_in = f64::NEG_INFINITY;
    let mut s_out = f64::INFINITY;
    for (o, d, l, h) in [(origin.0, dir.0, lo.0, hi.0), (origin.1, dir.1, lo.1, hi.1)] {
        if d.abs() < 1e-14 {
            if o < l || o > h {
                return None;
            }
        } else {
            let (a, b) = ((l - o) / d, (h - o) / d);
            s_in = s_in.max(a.min(b));
            s_out = s_out.min(a.max(b));
        }
    }
    (s_out > s_in).then_some((s_in, s_out))
}

/// Intersection lengths of one ray with the pixel grid, as `(pixel, length)`
/// sorted by pixel index.
pub(crate) fn trace_ray(n: usize, origin: (f64, f64), dir: (f64, f64)) -> Vec<(usize, f64)> {
    let half = n as f64 / 2.0;
    let Some((s_in, s_out)) = clip_to_box(origin, dir, (-half, -half), (half, half)) else {
        return Vec::new();
    };
    let mut cuts = vec![s_in, s_out];
    for (o, d) in [(origin.0, dir.0), (origin.1, dir.1)] {
        if d.abs() < 1e-14 {
            continue;
        }
        for k in 1..n {
            let s = (-half + k as f64 - o) / d;
            if s > s_in && s < s_out {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));

    let mut entries: Vec<(usize, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let x = origin.0 + mid * dir.0;
        let y = origin.1 + mid * dir.1;
        let col = ((x + half).floor() as isize).clamp(0, n as isize - 1) as usize;
        let row = ((half - y).floor() as isize).clamp(0, n as isize - 1) as usize;
        entries.push((row * n + col, len));
    }
    entries.sort_by_key(|e| e.0);
    entries.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    entries
}

/// Builds the `(|angles|·n_lines) × n²` projection matrix.
pub fn build_parallel_tomo(n: usize, angles_deg: &[f64], n_lines: usize) -> Result<CsrMatrix> {
    if angles_deg.is_empty() {
        return Err(Error::invalid("angle list must not be empty"));
    }
    if n < 2 {
        return Err(Error::invalid("grid size must be at least 2"));
    }
    if n_lines == 0 {
        return Err(Error::invalid("at least one detector line is required"));
    }
    if angles_deg.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("projection angles"));
    }
    let offsets = detector_offsets(n_lines);
    let rows = angles_deg.len() * n_lines;
    let mut row_offsets = Vec::with_capacity(rows + 1);
    row_offsets.push(0);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for &angle in angles_deg {
        for &t in &offsets {
            let (origin, dir) = ray(angle, t);
            for (pixel, len) in trace_ray(n, origin, dir) {
                indices.push(pixel);
                values.push(len);
            }
            row_offsets.push(indices.len());
        }
    }
    CsrMatrix::new(rows, n * n, row_offsets, indices, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: clip the ray against every pixel box separately.
    fn brute_force_row(n: usize, angle: f64, t: f64) -> Vec<f64> {
        let (origin, dir) = ray(angle, t);
        let half = n as f64 / 2.0;
        let mut row = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let lo = (-half + c as f64, half - r as f64 - 1.0);
                let hi = (lo.0 + 1.0, lo.1 + 1.0);
                if let Some((a, b)) = clip_to_box(origin, dir, lo, hi) {
                    row[r * n + c] = b - a;
                }
            }
        }
        row
    }

    #[test]
    fn horizontal_ray_through_top_row() {
        let m = build_parallel_tomo(2, &[90.0], 2).unwrap();
        let sums = m.apply(&[1.0; 4]).unwrap();
        // line 1 sits at y = +0.5, the centre of the top row
        assert!((sums[1] - 2.0).abs() < 1e-12);
        assert!((sums[0] - 2.0).abs() < 1e-12);
        let (cols, _) = m.row(1);
        assert_eq!(cols, &[0, 1]);
    }

    #[test]
    fn dimensions() {
        let m = build_parallel_tomo(64, &equally_spaced_angles(90), 64).unwrap();
        assert_eq!((m.rows(), m.cols()), (5760, 4096));
    }

    #[test]
    fn entries_bounded_by_pixel_diagonal() {
        let m = build_parallel_tomo(16, &equally_spaced_angles(23), 24).unwrap();
        assert!(m.values().iter().all(|v| *v >= 0.0 && *v <= 2f64.sqrt() + 1e-12));
        let sums = m.apply(&vec![1.0; 256]).unwrap();
        assert!(sums.iter().all(|s| *s <= 16.0 * 2f64.sqrt() + 1e-9));
    }

    #[test]
    fn matches_brute_force_oracle() {
        let n = 7;
        let angles = [0.0, 17.0, 45.0, 90.0, 133.3, 180.0];
        let n_lines = 11;
        let m = build_parallel_tomo(n, &angles, n_lines).unwrap();
        let dense = m.to_dense();
        let offsets = detector_offsets(n_lines);
        for (a, &angle) in angles.iter().enumerate() {
            for (j, &t) in offsets.iter().enumerate() {
                let want = brute_force_row(n, angle, t);
                let got = &dense[a * n_lines + j];
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-10, "angle {angle} line {j}: {g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn rays_outside_image_are_empty() {
        let m = build_parallel_tomo(4, &[30.0], 20).unwrap();
        let (cols, _) = m.row(0);
        assert!(cols.is_empty());
    }

    #[test]
    fn rejects_empty_angles() {
        assert!(build_parallel_tomo(8, &[], 8).is_err());
        assert!(build_parallel_tomo(1, &[0.0], 8).is_err());
        assert!(build_parallel_tomo(8, &[0.0], 0).is_err());
    }
}
