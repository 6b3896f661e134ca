//! Uniform finite-volume mesh of the truncated wavenumber domain `[0, L]`.

use crate::error::{Error, Result};

const DIVISIBILITY_RTOL: f64 = 1e-9;

/// Uniform partition of `[0, L]` into cells `K_i = [i dk, (i+1) dk)`, `i = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    length: f64,
    dk: f64,
    edges: Vec<f64>,
    midpoints: Vec<f64>,
}

impl Grid {
    /// Builds the mesh for truncation parameter `length` and cell width `dk`.
    ///
    /// `length / dk` must be an integer of at least 2 (checked to a relative
    /// tolerance of 1e-9 so that decimal inputs such as `0.1` are accepted).
    pub fn new(length: f64, dk: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("L must be positive, got {length}")));
        }
        if !(dk.is_finite() && dk > 0.0) {
            return Err(Error::Config(format!("dk must be positive, got {dk}")));
        }
        let ratio = length / dk;
        let cells = ratio.round();
        if (ratio - cells).abs() > DIVISIBILITY_RTOL * ratio {
            return Err(Error::Config(format!(
                "L = {length} is not an integer multiple of dk = {dk}"
            )));
        }
        if cells < 2.0 {
            return Err(Error::Config(format!(
                "grid needs at least 2 cells, L/dk = {ratio}"
            )));
        }
        let n = cells as usize;
        // Snap dk so that n * dk reproduces L.
        let dk = length / n as f64;
        let edges = (0..=n).map(|i| i as f64 * dk).collect();
        let midpoints = (0..n).map(|i| (i as f64 + 0.5) * dk).collect();
        Ok(Self {
            length,
            dk,
            edges,
            midpoints,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    /// Number of cells, `M + 1`.
    pub fn len(&self) -> usize {
        self.midpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.midpoints.is_empty()
    }

    /// Largest cell index `M`.
    pub fn last_index(&self) -> usize {
        self.midpoints.len() - 1
    }

    /// Cell edges `k_{i-1/2} = i dk`, `i = 0..=M+1`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Cell midpoints `k_i = (i + 1/2) dk`.
    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Midpoint formula extended to any integer index (used for out-of-range weights).
    #[inline]
    pub fn midpoint_at(&self, i: isize) -> f64 {
        (i as f64 + 0.5) * self.dk
    }

    /// Index of the cell containing `k`, clamped to the grid.
    pub fn cell_of(&self, k: f64) -> usize {
        let i = (k / self.dk).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.last_index())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_cells() {
        let g = Grid::new(30.0, 0.5).unwrap();
        assert_eq!(g.len(), 60);
        assert_eq!(g.last_index(), 59);
        assert_eq!(g.midpoints()[0], 0.25);
        assert_eq!(g.midpoints()[59], 29.75);
    }

    #[test]
    fn two_cells() {
        let g = Grid::new(1.0, 0.5).unwrap();
        assert_eq!(g.midpoints(), &[0.25, 0.75]);
        assert_eq!(g.edges(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Grid::new(30.0, 0.7), Err(Error::Config(_))));
        assert!(Grid::new(0.0, 0.5).is_err());
        assert!(Grid::new(1.0, -0.5).is_err());
        assert!(Grid::new(1.0, 1.0).is_err());
        assert!(Grid::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn decimal_widths() {
        let g = Grid::new(3.0, 0.1).unwrap();
        assert_eq!(g.len(), 30);
        let g = Grid::new(200.0, 1.0 / 20.0).unwrap();
        assert_eq!(g.len(), 4000);
    }

    #[test]
    fn uniform_spacing_sums_to_length() {
        for &(l, dk) in &[(30.0, 0.5), (200.0, 0.0625), (7.0, 0.25), (3.0, 0.1)] {
            let g = Grid::new(l, dk).unwrap();
            let total: f64 = (0..g.len()).map(|_| g.dk()).sum();
            assert!((total - l).abs() <= 1e-12 * l);
            for w in g.edges().windows(2) {
                assert!((w[1] - w[0] - g.dk()).abs() <= 1e-12 * l);
            }
            assert!(g.midpoints().windows(2).all(|w| w[1] > w[0]));
            assert!((g.midpoints()[g.last_index()] - (l - g.dk() / 2.0)).abs() < 1e-12 * l);
        }
    }

    #[test]
    fn cell_lookup() {
        let g = Grid::new(30.0, 0.5).unwrap();
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(0.74), 1);
        assert_eq!(g.cell_of(30.0), 59);
        assert_eq!(g.cell_of(-1.0), 0);
    }
}
