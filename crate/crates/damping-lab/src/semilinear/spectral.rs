//! Periodic box grid and FFT plumbing for one and two dimensions.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[-L, L)^n`, `n ∈ {1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub dimension: usize,
    pub half_width: f64,
    pub points: usize,
}

impl BoxGrid {
    pub fn new(dimension: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(dimension == 1 || dimension == 2) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!("box half-width must be positive, got {half_width}")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid points must be a power of two >= 4, got {points}")));
        }
        Ok(BoxGrid { dimension, half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Total number of grid values, `points^dimension`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Coordinates of flat index `idx`; the second entry is 0 in one dimension.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        if self.dimension == 1 {
            [self.coord(idx), 0.0]
        } else {
            [self.coord(idx / self.points), self.coord(idx % self.points)]
        }
    }

    pub fn radius_sq(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let x = self.point(i);
                x[0] * x[0] + x[1] * x[1]
            })
            .collect()
    }

    /// Integer wave index along one axis in FFT order.
    fn wave_index(&self, j: usize) -> i64 {
        let n = self.points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        std::f64::consts::PI / self.half_width * self.wave_index(j) as f64
    }

    /// Wave vector of flat spectral index `idx`, with the Nyquist component
    /// zeroed so that spectral derivatives of real fields stay real.
    pub fn wave_vector(&self, idx: usize) -> [f64; 2] {
        let comp = |j: usize| if j == self.points / 2 { 0.0 } else { self.wavenumber(j) };
        if self.dimension == 1 {
            [comp(idx), 0.0]
        } else {
            [comp(idx / self.points), comp(idx % self.points)]
        }
    }

    /// Groups spectral indices by `|k|²`: returns the per-index shell id and
    /// the `|k|²` of each shell.
    pub fn shells(&self) -> (Vec<u32>, Vec<f64>) {
        let dk = std::f64::consts::PI / self.half_width;
        let key = |idx: usize| -> i64 {
            if self.dimension == 1 {
                let a = self.wave_index(idx);
                a * a
            } else {
                let a = self.wave_index(idx / self.points);
                let b = self.wave_index(idx % self.points);
                a * a + b * b
            }
        };
        let mut ids: BTreeMap<i64, u32> = BTreeMap::new();
        for idx in 0..self.len() {
            let next = ids.len() as u32;
            ids.entry(key(idx)).or_insert(next);
        }
        let mut k2 = vec![0.0; ids.len()];
        for (&kk, &id) in &ids {
            k2[id as usize] = kk as f64 * dk * dk;
        }
        let index = (0..self.len()).map(|idx| ids[&key(idx)]).collect();
        (index, k2)
    }
}

/// Forward and normalized inverse DFT on a [`BoxGrid`].
#[derive(Clone)]
pub struct Spectral {
    grid: BoxGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(grid: BoxGrid) -> Self {
        let mut planner = FftPlanner::new();
        Spectral { grid, fwd: planner.plan_fft_forward(grid.points), inv: planner.plan_fft_inverse(grid.points) }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    fn transform(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.grid.points;
        plan.process(data);
        if self.grid.dimension == 2 {
            transpose(data, n);
            plan.process(data);
            transpose(data, n);
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(&self.fwd, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(&self.inv, data);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.inverse(&mut data);
        data.into_iter().map(|z| z.re).collect()
    }

    /// Physical-space gradient components of the field with spectrum `hat`.
    pub fn gradient(&self, hat: &[Complex64]) -> Vec<Vec<f64>> {
        (0..self.grid.dimension)
            .map(|axis| {
                let d: Vec<Complex64> = hat
                    .iter()
                    .enumerate()
                    .map(|(i, &z)| z * Complex64::new(0.0, self.grid.wave_vector(i)[axis]))
                    .collect();
                self.inverse_real(&d)
            })
            .collect()
    }

    /// `‖v‖_{L²}` from the unnormalized spectrum via Parseval.
    pub fn l2_from_hat(&self, hat: &[Complex64]) -> f64 {
        let s: f64 = hat.iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    /// `‖∇v‖_{L²}` from the unnormalized spectrum via Parseval.
    pub fn grad_l2_from_hat(&self, hat: &[Complex64]) -> f64 {
        let s: f64 = hat
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k = self.grid.wave_vector(i);
                (k[0] * k[0] + k[1] * k[1]) * z.norm_sqr()
            })
            .sum();
        (s * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// `√(h^n Σ v²)`.
pub fn grid_l2(grid: &BoxGrid, v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let grid = BoxGrid::new(2, 3.0, 16).unwrap();
        let sp = Spectral::new(grid);
        let v: Vec<f64> = (0..grid.len()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let back = sp.inverse_real(&sp.forward_real(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shells_group_equal_norms() {
        let grid = BoxGrid::new(2, 1.0, 8).unwrap();
        let (idx, k2) = grid.shells();
        // (1,2) and (2,1) share a shell; (0,0) has |k|² = 0.
        assert_eq!(idx[8 + 2], idx[2 * 8 + 1]);
        assert_eq!(k2[idx[0] as usize], 0.0);
        let grid1 = BoxGrid::new(1, 1.0, 8).unwrap();
        assert_eq!(grid1.shells().1.len(), 5);
    }
}
