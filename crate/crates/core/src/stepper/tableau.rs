/// Embedded three-stage DIRK form of TR-BDF2.
///
/// ```text
/// 0     | 0          0           0
/// γ     | d          d           0
/// 1     | w          w           d
/// ------+-------------------------------
///       | w          w           d
///       | (1 - w)/3  (1 + 3w)/3  d/3
/// ```
///
/// with `γ = 2 - √2`, `d = γ/2`, `w = √2/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tableau {
    pub gamma: f64,
    pub d: f64,
    pub w: f64,
    pub c: [f64; 3],
    pub a: [[f64; 3]; 3],
    pub b: [f64; 3],
    pub b_hat: [f64; 3],
}

impl Tableau {
    pub fn trbdf2() -> Self {
        let gamma = 2.0 - std::f64::consts::SQRT_2;
        let d = gamma / 2.0;
        let w = std::f64::consts::SQRT_2 / 4.0;
        Self {
            gamma,
            d,
            w,
            c: [0.0, gamma, 1.0],
            a: [[0.0, 0.0, 0.0], [d, d, 0.0], [w, w, d]],
            b: [w, w, d],
            b_hat: [(1.0 - w) / 3.0, (1.0 + 3.0 * w) / 3.0, d / 3.0],
        }
    }

    /// Weights of the embedded error estimate, `b - b_hat`.
    pub fn error_weights(&self) -> [f64; 3] {
        [
            self.b[0] - self.b_hat[0],
            self.b[1] - self.b_hat[1],
            self.b[2] - self.b_hat[2],
        ]
    }

    /// Checks consistency (`Σb = Σb̂ = 1`, row sums equal `c`) and stiff accuracy.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let sum_b: f64 = self.b.iter().sum();
        let sum_bh: f64 = self.b_hat.iter().sum();
        let rows_ok = self
            .a
            .iter()
            .zip(&self.c)
            .all(|(row, c)| (row.iter().sum::<f64>() - c).abs() <= tol);
        (sum_b - 1.0).abs() <= tol && (sum_bh - 1.0).abs() <= tol && rows_ok && self.a[2] == self.b
    }

    /// One-step amplification factor `R(z)` for `y' = λ y`, `z = λ dt`,
    /// from solving the stages in closed form.
    pub fn stability_function(&self, z: f64) -> f64 {
        let d = self.d;
        let w = self.w;
        let y2 = (1.0 + d * z) / (1.0 - d * z);
        (1.0 + w * z + w * z * y2) / (1.0 - d * z)
    }
}
