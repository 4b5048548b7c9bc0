use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn outer(u: [f64; 2], v: [f64; 2]) -> Self {
        Mat2([[u[0] * v[0], u[0] * v[1]], [u[1] * v[0], u[1] * v[1]]])
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn det(&self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn symmetrize(&self) -> Self {
        let off = 0.5 * (self.0[0][1] + self.0[1][0]);
        Mat2([[self.0[0][0], off], [off, self.0[1][1]]])
    }

    /// `A * self * A^T`
    pub fn congruence(&self, a: &Mat2) -> Self {
        *a * *self * a.transpose()
    }

    /// Inverse, or `None` when the determinant is negligible relative to the
    /// matrix scale.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        let scale = self.0.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !d.is_finite() || d.abs() <= 1e-14 * scale * scale {
            return None;
        }
        let m = self.0;
        Some(Mat2([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]))
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let s = self.symmetrize().0;
        let mean = 0.5 * (s[0][0] + s[1][1]);
        let half_diff = 0.5 * (s[0][0] - s[1][1]);
        let r = half_diff.hypot(s[0][1]);
        [mean - r, mean + r]
    }

    /// Moore-Penrose pseudo-inverse of a symmetric matrix.
    pub fn sym_pinv(&self) -> Self {
        let s = self.symmetrize().0;
        let [l0, l1] = self.sym_eigenvalues();
        let cutoff = 1e-12 * l0.abs().max(l1.abs()).max(f64::MIN_POSITIVE);
        let vec_for = |l: f64| -> [f64; 2] {
            // (S - l I) v = 0
            let (a, b) = (s[0][0] - l, s[0][1]);
            let (c, d) = (s[1][0], s[1][1] - l);
            let v = if a.abs() + b.abs() >= c.abs() + d.abs() {
                [-b, a]
            } else {
                [-d, c]
            };
            let n = v[0].hypot(v[1]);
            if n == 0.0 {
                [1.0, 0.0]
            } else {
                [v[0] / n, v[1] / n]
            }
        };
        if (l1 - l0).abs() <= cutoff {
            // isotropic
            return if l1.abs() > cutoff {
                Mat2::IDENTITY.scale(1.0 / l1)
            } else {
                Mat2::ZERO
            };
        }
        let v1 = vec_for(l1);
        let v0 = [-v1[1], v1[0]];
        let mut out = Mat2::ZERO;
        for (l, v) in [(l0, v0), (l1, v1)] {
            if l.abs() > cutoff {
                out = out + Mat2::outer(v, v).scale(1.0 / l);
            }
        }
        out
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        self + rhs.scale(-1.0)
    }
}
