//! Interaction kernel of range one, its discrete samples, and convolutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{invalid, Error, Result};
use crate::grid::Profile;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `cos^2(pi r / 2)` on `|r| <= 1`.
    #[default]
    CosSquared,
    /// `(1 - r^2)^2` on `|r| <= 1`.
    Biweight,
}

impl KernelShape {
    /// Unnormalized profile, zero for `|r| >= 1`.
    pub fn eval(self, r: f64) -> f64 {
        if r.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            KernelShape::CosSquared => {
                let c = (0.5 * PI * r).cos();
                c * c
            }
            KernelShape::Biweight => {
                let t = 1.0 - r * r;
                t * t
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cos2" | "cos_squared" => Ok(KernelShape::CosSquared),
            "biweight" => Ok(KernelShape::Biweight),
            other => Err(invalid(format!("unknown kernel shape {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Profile is zero outside the grid.
    Free,
    /// Profile is reflected evenly about both endpoints.
    Neumann,
}

/// Kernel samples `J(k * spacing)`, `|k| <= half`, scaled so that
/// `spacing * sum = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub shape: KernelShape,
    pub spacing: f64,
    pub half: usize,
    pub samples: Vec<f64>,
}

pub fn build_kernel(spacing: f64) -> Result<Kernel> {
    build_kernel_shape(KernelShape::CosSquared, spacing)
}

pub fn build_kernel_shape(shape: KernelShape, spacing: f64) -> Result<Kernel> {
    if !(spacing > 0.0 && spacing <= 0.1) {
        return Err(invalid(format!("kernel spacing must lie in (0, 0.1], got {spacing}")));
    }
    let half = (1.0 / spacing + 1e-9).floor() as usize;
    let mut samples: Vec<f64> = (0..=2 * half)
        .map(|k| shape.eval((k as f64 - half as f64) * spacing))
        .collect();
    // symmetrize exactly
    for k in 0..half {
        let s = 0.5 * (samples[k] + samples[2 * half - k]);
        samples[k] = s;
        samples[2 * half - k] = s;
    }
    let z: f64 = spacing * samples.iter().sum::<f64>();
    for s in &mut samples {
        *s /= z;
    }
    Ok(Kernel {
        shape,
        spacing,
        half,
        samples,
    })
}

impl Kernel {
    /// Sample at lattice offset `k` (zero outside the support).
    pub fn at(&self, k: isize) -> f64 {
        let h = self.half as isize;
        if k.abs() > h {
            0.0
        } else {
            self.samples[(k + h) as usize]
        }
    }

    /// Quadrature weights `spacing * J_k`.
    pub fn weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s * self.spacing).collect()
    }

    fn check_spacing(&self, spacing: f64) -> Result<()> {
        if (spacing - self.spacing).abs() > 1e-12 * self.spacing {
            return Err(Error::SpacingMismatch {
                grid: spacing,
                kernel: self.spacing,
            });
        }
        Ok(())
    }

    pub fn convolve(&self, f: &Profile, bc: Boundary) -> Result<Profile> {
        self.check_spacing(f.grid.spacing)?;
        let mut out = vec![0.0; f.len()];
        self.convolve_into(&f.values, bc, &mut out)?;
        Ok(Profile {
            grid: f.grid,
            values: out,
        })
    }

    /// Discrete convolution of node values; the caller guarantees matching spacing.
    pub fn convolve_into(&self, f: &[f64], bc: Boundary, out: &mut [f64]) -> Result<()> {
        let n = f.len();
        let k = self.half;
        if bc == Boundary::Neumann && n < k + 1 {
            return Err(invalid(format!(
                "Neumann convolution needs at least {} points, got {n}",
                k + 1
            )));
        }
        let mut ext = vec![0.0; n + 2 * k];
        match bc {
            Boundary::Neumann => {
                for t in 0..n + 2 * k {
                    ext[t] = f[reflect(t as isize - k as isize, n)];
                }
            }
            Boundary::Free => {
                ext[k..k + n].copy_from_slice(f);
                ext[k] *= 0.5;
                ext[k + n - 1] *= 0.5;
            }
        }
        let w = self.weights();
        for (i, o) in out.iter_mut().enumerate() {
            // out_i = sum_k w_k f_{i-k}
            let window = &ext[i..i + 2 * k + 1];
            *o = window.iter().rev().zip(&w).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }

    /// Neumann convolution as a banded matrix (bandwidth `half` on both sides).
    pub fn neumann_matrix(&self, n: usize) -> Result<Banded> {
        let k = self.half;
        if n < k + 1 {
            return Err(invalid("grid shorter than the kernel range"));
        }
        let mut b = Banded::zeros(n, k, k);
        for i in 0..n {
            for (off, s) in self.samples.iter().enumerate() {
                let t = i as isize - (off as isize - k as isize);
                let j = reflect(t, n);
                b.add(i, j, s * self.spacing);
            }
        }
        Ok(b)
    }
}

/// Even reflection of a lattice index into `0..n`.
pub(crate) fn reflect(t: isize, n: usize) -> usize {
    let last = n as isize - 1;
    let r = if t < 0 {
        -t
    } else if t > last {
        2 * last - t
    } else {
        t
    };
    r as usize
}
