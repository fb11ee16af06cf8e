//! Least-squares similarity between corresponding landmark sets.

use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    Free,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignOptions {
    pub scale: ScaleMode,
    pub allow_reflection: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            scale: ScaleMode::Free,
            allow_reflection: false,
        }
    }
}

/// `y ≈ scale * R * x + translation`, where `R` is the rotation by `angle`,
/// preceded by `diag(1, -1)` when `reflected`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkAlignment {
    pub scale: f64,
    pub angle: f64,
    pub reflected: bool,
    pub translation: Vector2<f64>,
    /// Sum of squared landmark residuals.
    pub residual: f64,
}

impl LandmarkAlignment {
    pub fn linear(&self) -> Matrix2<f64> {
        let (s, c) = self.angle.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        if self.reflected {
            rot * Matrix2::new(1.0, 0.0, 0.0, -1.0)
        } else {
            rot
        }
    }

    pub fn apply(&self, p: &Point2<f64>) -> Point2<f64> {
        Point2::from(self.scale * (self.linear() * p.coords) + self.translation)
    }
}

/// Similarity (free scale, proper rotation) mapping `x` onto `y`.
pub fn landmark_align(x: &[Point2<f64>], y: &[Point2<f64>]) -> Result<LandmarkAlignment> {
    landmark_align_with(x, y, AlignOptions::default())
}

/// SVD of the centred cross-covariance `H = Xc Ycᵀ` gives `R = V Uᵀ`; the last
/// singular direction is flipped when a reflection is not allowed.
pub fn landmark_align_with(x: &[Point2<f64>], y: &[Point2<f64>], opts: AlignOptions) -> Result<LandmarkAlignment> {
    assert_eq!(x.len(), y.len(), "landmark lists must correspond");
    let m = x.len();
    if m == 0 {
        return Err(Error::DegenerateConfiguration);
    }
    let mu_x = x.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / m as f64;
    let mu_y = y.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / m as f64;
    let mut h = Matrix2::zeros();
    let mut spread = 0.0;
    for (px, py) in x.iter().zip(y) {
        let zx = px.coords - mu_x;
        let wy = py.coords - mu_y;
        h += zx * wy.transpose();
        spread += zx.norm_squared();
    }
    let extent = x.iter().fold(0.0f64, |acc, p| acc.max(p.coords.norm()));
    if spread <= 1e-24 * (1.0 + extent * extent) * m as f64 {
        return Err(Error::DegenerateConfiguration);
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    let mut r = v * u.transpose();
    let mut reflected = false;
    if r.determinant() < 0.0 {
        if opts.allow_reflection {
            reflected = true;
        } else {
            let fix = Matrix2::new(1.0, 0.0, 0.0, -1.0);
            r = v * fix * u.transpose();
        }
    }
    let angle = r[(1, 0)].atan2(r[(0, 0)]);

    let scale = match opts.scale {
        ScaleMode::Unit => 1.0,
        ScaleMode::Free => {
            let num: f64 = x
                .iter()
                .zip(y)
                .map(|(px, py)| (py.coords - mu_y).dot(&(r * (px.coords - mu_x))))
                .sum();
            num / spread
        }
    };
    let translation = mu_y - scale * (r * mu_x);
    let residual = x
        .iter()
        .zip(y)
        .map(|(px, py)| (scale * (r * px.coords) + translation - py.coords).norm_squared())
        .sum();
    Ok(LandmarkAlignment {
        scale,
        angle,
        reflected,
        translation,
        residual,
    })
}
