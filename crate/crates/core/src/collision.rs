//! Discrete nonlocal collision flux and the semi-discrete right-hand side.
//!
//! With `a_j = dk u_j`, `b_j = k_j a_j` and `h_j = dk u_j^2 k_j^2`, the flux
//! through the right edge of cell `i` is
//!
//! ```text
//! Q_{i+1/2} = 2 ( Σ_j a_j Σ_{l=i}^{i+j} a_l (k_j - k_l)^2
//!               - Σ_{j<=i} a_j Σ_{l=i-j}^{j} a_l (k_j + k_l)^2
//!               - 4 Σ_{j<=i} b_j Σ_{l>=i} b_l
//!               - 4 Σ_{j<=i} b_j Σ_{l<=j} b_l
//!               - 2 Σ_{j<=i} h_j - 2 Σ_{j=floor(i/2)}^{i} h_j )
//! ```
//!
//! Every index outside `0..=M` contributes zero, which is the same as extending
//! `u` by zero beyond `L`. The per-cell difference `Q_{i+1/2} - Q_{i-1/2}` is
//! evaluated in closed form by [`CollisionKernel::flux_divergence`] in `O(M)`
//! per cell; [`CollisionKernel::flux_half`] keeps the direct double sums.

use faer::Mat;
use rayon::prelude::*;

use crate::grid::Grid;

/// Cell values of the solved variable `u = k g(t, k)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
}

impl State {
    pub fn new(t: f64, u: Vec<f64>) -> Self {
        Self { t, u }
    }
}

/// Pairwise kernel weights `(k_j - k_l)^2`, `(k_j + k_l)^2` and `k_j k_l` over
/// the midpoints of a uniform grid.
///
/// On a uniform mesh `(k_j - k_l)^2` depends only on `|j - l|` and
/// `(k_j + k_l)^2` only on `j + l`, so both tables are stored as one-dimensional
/// arrays; the product table is the outer product of the midpoints.
#[derive(Debug, Clone)]
pub struct CollisionKernel {
    grid: Grid,
    diff2: Vec<f64>,
    sum2: Vec<f64>,
}

impl CollisionKernel {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        let dk = grid.dk();
        let diff2 = (0..n).map(|d| (d as f64 * dk).powi(2)).collect();
        // k_j + k_l = (j + l + 1) dk
        let sum2 = (0..2 * n).map(|s| ((s + 1) as f64 * dk).powi(2)).collect();
        Self {
            grid: grid.clone(),
            diff2,
            sum2,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `(k_j - k_l)^2`
    #[inline]
    pub fn diff2(&self, j: usize, l: usize) -> f64 {
        self.diff2[j.abs_diff(l)]
    }

    /// `(k_j + k_l)^2`
    #[inline]
    pub fn sum2(&self, j: usize, l: usize) -> f64 {
        self.sum2[j + l]
    }

    /// `k_j k_l`
    #[inline]
    pub fn prod(&self, j: usize, l: usize) -> f64 {
        let k = self.grid.midpoints();
        k[j] * k[l]
    }

    /// The six double/single sums of `Q_{i+1/2}` before they are combined,
    /// in the order they appear in the flux. `i` ranges over `-1..=M`.
    pub fn flux_half_terms(&self, u: &[f64], i: isize) -> [f64; 6] {
        let n = self.grid.len();
        assert_eq!(u.len(), n, "state length does not match grid");
        assert!(i >= -1 && i < n as isize, "flux index {i} out of range");
        let m = n as isize - 1;
        let dk = self.grid.dk();
        let k = self.grid.midpoints();
        let a = |j: isize| -> f64 {
            if (0..=m).contains(&j) {
                dk * u[j as usize]
            } else {
                0.0
            }
        };

        let mut t = [0.0; 6];
        for j in 0..=m {
            let aj = a(j);
            if aj == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for l in i.max(0)..=(i + j).min(m) {
                inner += a(l) * self.diff2(j as usize, l as usize);
            }
            t[0] += aj * inner;
        }
        for j in 0..=i {
            let aj = a(j);
            let ju = j as usize;
            let mut inner = 0.0;
            for l in (i - j).max(0)..=j {
                inner += a(l) * self.sum2(ju, l as usize);
            }
            t[1] += aj * inner;

            let mut inner = 0.0;
            for l in i.max(0)..=m {
                inner += a(l) * k[l as usize];
            }
            t[2] += aj * k[ju] * inner;

            let mut inner = 0.0;
            for l in 0..=j {
                inner += a(l) * k[l as usize];
            }
            t[3] += aj * k[ju] * inner;

            t[4] += dk * (u[ju] * k[ju]).powi(2);
        }
        if i >= 0 {
            for j in (i / 2)..=i {
                let ju = j as usize;
                t[5] += dk * (u[ju] * k[ju]).powi(2);
            }
        }
        t
    }

    /// Direct evaluation of `Q_{i+1/2}` for `i` in `-1..=M`.
    pub fn flux_half(&self, u: &[f64], i: isize) -> f64 {
        let t = self.flux_half_terms(u, i);
        2.0 * (t[0] - t[1] - 4.0 * t[2] - 4.0 * t[3] - 2.0 * t[4] - 2.0 * t[5])
    }

    /// Telescoped differences `Q_{i+1/2} - Q_{i-1/2}` for every cell.
    pub fn flux_divergence(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        self.flux_divergence_into(u, &mut out);
        out
    }

    pub fn flux_divergence_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        assert_eq!(u.len(), n, "state length does not match grid");
        assert_eq!(out.len(), n);
        let aux = Auxiliary::new(&self.grid, u);
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = self.divergence_at(&aux, i));
    }

    fn divergence_at(&self, aux: &Auxiliary, i: usize) -> f64 {
        let n = aux.a.len();
        let a = &aux.a;
        let b = &aux.b;
        let h = &aux.h;

        // Forward-cascade pairs (k_j, k_{i+j}) entering the cell, minus the
        // pairs leaving through the left edge.
        let mut fwd = 0.0;
        for j in 0..n - i {
            fwd += a[j] * a[i + j];
        }
        fwd *= self.diff2[i];
        if i >= 1 {
            let mut left = 0.0;
            for (j, aj) in a.iter().enumerate() {
                left += aj * self.diff2(j, i - 1);
            }
            fwd -= a[i - 1] * left;
        }

        // Backward-cascade pairs: the new row j = i, minus the anti-diagonal
        // j + l = i - 1 (l <= j) that drops out of the domain.
        let mut row = 0.0;
        for l in 0..=i {
            row += a[l] * self.sum2(i, l);
        }
        let mut bwd = a[i] * row;
        if i >= 1 {
            let mut diag = 0.0;
            for j in i / 2..i {
                diag += a[j] * a[i - 1 - j];
            }
            bwd -= diag * self.sum2[i - 1];
        }

        let left_prefix = if i >= 1 {
            b[i - 1] * aux.prefix_b[i - 1]
        } else {
            0.0
        };
        let cross = b[i] * (aux.total_b + b[i]) - left_prefix;

        let mut local = -4.0 * h[i];
        if i >= 2 && i % 2 == 0 {
            local += 2.0 * h[i / 2 - 1];
        }

        2.0 * (fwd - bwd - 4.0 * cross + local)
    }

    /// Semi-discrete time derivative `du_i/dt = (Q_{i+1/2} - Q_{i-1/2}) / dk`.
    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        self.rhs_into(u, &mut out);
        out
    }

    pub fn rhs_into(&self, u: &[f64], out: &mut [f64]) {
        self.flux_divergence_into(u, out);
        let inv_dk = 1.0 / self.grid.dk();
        out.iter_mut().for_each(|r| *r *= inv_dk);
    }

    /// Exact Jacobian of [`rhs`](Self::rhs) at `u`.
    pub fn rhs_jacobian(&self, u: &[f64]) -> Mat<f64> {
        let n = self.grid.len();
        assert_eq!(u.len(), n, "state length does not match grid");
        let aux = Auxiliary::new(&self.grid, u);
        let mut rows = vec![0.0; n * n];
        rows.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| self.jacobian_row(&aux, u, i, row));
        Mat::from_fn(n, n, |i, m| rows[i * n + m])
    }

    fn jacobian_row(&self, aux: &Auxiliary, u: &[f64], i: usize, row: &mut [f64]) {
        let n = row.len();
        let a = &aux.a;
        let b = &aux.b;
        let k = self.grid.midpoints();

        // d(fwd - bwd)/d a_m
        let mut da = vec![0.0; n];
        let w = self.diff2[i];
        for m in 0..n {
            let mut v = 0.0;
            if m + i < n {
                v += a[m + i];
            }
            if m >= i {
                v += a[m - i];
            }
            da[m] = w * v;
        }
        if i >= 1 {
            let mut left = 0.0;
            for (j, aj) in a.iter().enumerate() {
                left += aj * self.diff2(j, i - 1);
                da[j] -= a[i - 1] * self.diff2(j, i - 1);
            }
            da[i - 1] -= left;
        }

        let mut rowsum = 0.0;
        for l in 0..=i {
            rowsum += a[l] * self.sum2(i, l);
            da[l] -= a[i] * self.sum2(i, l);
        }
        da[i] -= rowsum;
        if i >= 1 {
            let s = self.sum2[i - 1];
            for m in 0..i {
                let p = i - 1 - m;
                let factor = if m == p { 2.0 } else { 1.0 };
                da[m] += factor * a[p] * s;
            }
        }

        // d cross / d b_m
        let mut db = vec![0.0; n];
        for v in db.iter_mut() {
            *v = b[i];
        }
        db[i] += aux.total_b + 2.0 * b[i];
        if i >= 1 {
            for v in db[..i].iter_mut() {
                *v -= b[i - 1];
            }
            db[i - 1] -= aux.prefix_b[i - 1];
        }

        // d local / d h_m is -4 at m = i and 2 at m = i/2 - 1 for even i >= 2.
        let half = (i >= 2 && i % 2 == 0).then(|| i / 2 - 1);

        for m in 0..n {
            let mut v = da[m] - 4.0 * k[m] * db[m];
            let dh = if m == i {
                -4.0
            } else if half == Some(m) {
                2.0
            } else {
                0.0
            };
            if dh != 0.0 {
                v += dh * 2.0 * k[m] * k[m] * u[m];
            }
            row[m] = 2.0 * v;
        }
    }
}

/// Weighted copies of the state shared by every cell of one evaluation.
struct Auxiliary {
    a: Vec<f64>,
    b: Vec<f64>,
    h: Vec<f64>,
    prefix_b: Vec<f64>,
    total_b: f64,
}

impl Auxiliary {
    fn new(grid: &Grid, u: &[f64]) -> Self {
        let dk = grid.dk();
        let k = grid.midpoints();
        let a: Vec<f64> = u.iter().map(|v| dk * v).collect();
        let b: Vec<f64> = a.iter().zip(k).map(|(a, k)| a * k).collect();
        let h = u.iter().zip(k).map(|(v, k)| dk * (v * k).powi(2)).collect();
        let mut prefix_b = Vec::with_capacity(b.len());
        let mut acc = 0.0;
        for v in &b {
            acc += v;
            prefix_b.push(acc);
        }
        Self {
            a,
            b,
            h,
            total_b: acc,
            prefix_b,
        }
    }
}
