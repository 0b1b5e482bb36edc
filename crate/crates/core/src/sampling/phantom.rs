//! Test images.

use crate::error::{Error, Result};
use crate::operators::SchlierenGeometry;
use crate::spaces::Vector;

/// Intensity table for the ten Shepp–Logan ellipses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhantomTable {
    /// Original intensities (outer shell 2, brain 1.02 before clipping).
    /// After clipping to `[0, 1]` every interior pixel equals 1.
    Standard,
    /// Contrast-enhanced intensities (shell 1, brain 0.2, features up to
    /// 0.3), which already lie in `[0, 1]`.
    #[default]
    Modified,
}

// (x0, y0, a, b, angle in degrees)
const ELLIPSES: [(f64, f64, f64, f64, f64); 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0),
    (0.22, 0.0, 0.11, 0.31, -18.0),
    (-0.22, 0.0, 0.16, 0.41, 18.0),
    (0.0, 0.35, 0.21, 0.25, 0.0),
    (0.0, 0.1, 0.046, 0.046, 0.0),
    (0.0, -0.1, 0.046, 0.046, 0.0),
    (-0.08, -0.605, 0.046, 0.023, 0.0),
    (0.0, -0.606, 0.023, 0.023, 0.0),
    (0.06, -0.605, 0.023, 0.046, 0.0),
];

const STANDARD: [f64; 10] = [2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01];
const MODIFIED: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];

/// Modified Shepp–Logan phantom on an `n × n` pixel grid, clipped to
/// `[0, 1]`.
pub fn shepp_logan(n: usize) -> Result<Vector> {
    shepp_logan_with(n, PhantomTable::Modified)
}

/// Shepp–Logan phantom sampled at pixel centres over `[−1, 1]²`, row 0 at the
/// top, values clipped to `[0, 1]`.
pub fn shepp_logan_with(n: usize, table: PhantomTable) -> Result<Vector> {
    if n < 16 {
        return Err(Error::invalid(format!("phantom grid must be at least 16, got {n}")));
    }
    let amps = match table {
        PhantomTable::Standard => STANDARD,
        PhantomTable::Modified => MODIFIED,
    };
    let mut img = vec![0.0; n * n];
    for row in 0..n {
        let y = 1.0 - (row as f64 + 0.5) * 2.0 / n as f64;
        for col in 0..n {
            let x = (col as f64 + 0.5) * 2.0 / n as f64 - 1.0;
            let mut v = 0.0;
            for (&(x0, y0, a, b, deg), amp) in ELLIPSES.iter().zip(amps) {
                let (s, c) = deg.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * c + dy * s;
                let w = -dx * s + dy * c;
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    v += amp;
                }
            }
            img[row * n + col] = v.clamp(0.0, 1.0);
        }
    }
    Ok(Vector::from_raw(img))
}

/// Piecewise-constant test object on a schlieren grid: value 1 on the disc
/// of radius 0.6 at the origin, lowered by 0.5 on the disc of radius 0.25
/// centred at `(0.2, 0.15)`.
pub fn disc_phantom(geometry: &SchlierenGeometry) -> Vector {
    Vector::from_raw(geometry.sample(|x, y| {
        let mut v = 0.0;
        if x * x + y * y <= 0.36 {
            v += 1.0;
        }
        if (x - 0.2).powi(2) + (y - 0.15).powi(2) <= 0.0625 {
            v -= 0.5;
        }
        v
    }))
}
