//! Low-frequency probe subspace built from 2-D DCT-II atoms.
//!
//! Instead of drawing probe noise in all `d = h·w·c` input coordinates, the
//! attack can draw `m = side²` coefficients and lift them through an
//! orthonormal basis of low-frequency cosine atoms. Boundary normals of image
//! classifiers concentrate in low frequencies, so the same number of queries
//! buys a far better-aligned gradient estimate there.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::point::Shape;
use crate::vecmath;

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("subspace side {side} exceeds the smaller spatial extent {max} of shape {shape}")]
    SideTooLarge { side: usize, max: usize, shape: Shape },
    #[error("subspace side must be at least 1")]
    SideZero,
    #[error("coefficient vector has length {got}, subspace dimension is {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// How spatial atoms extend across channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelMode {
    /// Each spatial atom is copied into every channel and renormalized by
    /// `1/√c`; perturbations are channel-uniform and `m = side²` regardless
    /// of channel count. This is the default.
    Replicated,
    /// Each (atom, channel) pair is its own basis vector, `m = side²·c`.
    /// Kept for ablation: lets perturbations differ per channel.
    PerChannel,
}

/// An orthonormal basis of the `side × side` lowest-frequency 2-D DCT-II
/// atoms on the `h × w` grid, materialized as full-space vectors.
#[derive(Clone, Debug)]
pub struct DctSubspace {
    shape: Shape,
    side: usize,
    mode: ChannelMode,
    /// Row k is the k-th basis vector ψ_k in ℝ^d, unit norm.
    atoms: Vec<Vec<f64>>,
}

/// DCT-II scale factor: √(1/n) for the DC row, √(2/n) otherwise.
fn dct_alpha(index: usize, n: usize) -> f64 {
    if index == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Value of the 1-D DCT-II basis function `index` at grid position `pos`.
fn dct_atom_value(index: usize, pos: usize, n: usize) -> f64 {
    dct_alpha(index, n)
        * (std::f64::consts::PI * (2 * pos + 1) as f64 * index as f64 / (2 * n) as f64).cos()
}

impl DctSubspace {
    pub fn new(shape: Shape, side: usize, mode: ChannelMode) -> Result<Self, SubspaceError> {
        if side == 0 {
            return Err(SubspaceError::SideZero);
        }
        let max = shape.min_side();
        if side > max {
            return Err(SubspaceError::SideTooLarge { side, max, shape });
        }
        let (h, w, c) = (shape.height, shape.width, shape.channels);
        let channel_scale = 1.0 / (c as f64).sqrt();
        let mut atoms = Vec::new();
        for i in 0..side {
            for j in 0..side {
                let mut spatial = vec![0.0; h * w];
                for y in 0..h {
                    let row = dct_atom_value(i, y, h);
                    for x in 0..w {
                        spatial[y * w + x] = row * dct_atom_value(j, x, w);
                    }
                }
                match mode {
                    ChannelMode::Replicated => {
                        let mut atom = vec![0.0; h * w * c];
                        for (pixel, &v) in spatial.iter().enumerate() {
                            for ch in 0..c {
                                atom[pixel * c + ch] = v * channel_scale;
                            }
                        }
                        atoms.push(atom);
                    }
                    ChannelMode::PerChannel => {
                        for ch in 0..c {
                            let mut atom = vec![0.0; h * w * c];
                            for (pixel, &v) in spatial.iter().enumerate() {
                                atom[pixel * c + ch] = v;
                            }
                            atoms.push(atom);
                        }
                    }
                }
            }
        }
        Ok(DctSubspace { shape, side, mode, atoms })
    }

    /// Channel-replicated basis, the configuration attacks use.
    pub fn replicated(shape: Shape, side: usize) -> Result<Self, SubspaceError> {
        Self::new(shape, side, ChannelMode::Replicated)
    }

    /// Default side for a shape: a third of the smaller spatial extent,
    /// never below 1.
    pub fn default_side(shape: Shape) -> usize {
        ((0.33 * shape.min_side() as f64).round() as usize).max(1)
    }

    /// Subspace dimension `m`.
    pub fn dim(&self) -> usize {
        self.atoms.len()
    }

    /// Ambient dimension `d = h·w·c`.
    pub fn ambient_dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    /// Lifts coefficients into the full space: `Σ γ_k ψ_k`. Orthonormality
    /// makes this norm-preserving.
    pub fn lift(&self, coefficients: &[f64]) -> Result<Vec<f64>, SubspaceError> {
        if coefficients.len() != self.dim() {
            return Err(SubspaceError::LengthMismatch {
                expected: self.dim(),
                got: coefficients.len(),
            });
        }
        let mut out = vec![0.0; self.ambient_dim()];
        for (atom, &gamma) in self.atoms.iter().zip(coefficients) {
            if gamma != 0.0 {
                vecmath::axpy(&mut out, gamma, atom);
            }
        }
        Ok(out)
    }

    /// Coefficients of a full-space vector against the basis, `Sᵀv`.
    pub fn project(&self, vector: &[f64]) -> Vec<f64> {
        self.atoms.iter().map(|atom| vecmath::dot(atom, vector)).collect()
    }

    /// Draws `count` isotropic coefficient vectors, lifts them, and rescales
    /// each to exact norm `omega`.
    pub fn sample_noise<R: Rng + ?Sized>(
        &self,
        count: usize,
        omega: f64,
        rng: &mut R,
    ) -> Vec<Vec<f64>> {
        assert!(omega > 0.0, "noise norm must be positive, got {omega}");
        (0..count)
            .map(|_| loop {
                let gamma: Vec<f64> =
                    (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let lifted = self.lift(&gamma).expect("gamma has the right length");
                let norm = vecmath::norm(&lifted);
                if norm > 0.0 {
                    break lifted.iter().map(|&v| v * omega / norm).collect();
                }
            })
            .collect()
    }
}
