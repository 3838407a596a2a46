//! Small ReLU multilayer perceptron loaded from a binary weight file — a
//! non-analytic oracle with genuinely curved decision boundaries.
//!
//! File layout (all little-endian): magic `QMLP`, `u32` layer count, then per
//! layer `u32` rows, `u32` cols, row-major `f32` weights (`rows × cols`), and
//! `f32` biases (`rows`). Inference applies ReLU between layers (not after
//! the last) and takes the argmax of the final scores, ties to the lowest
//! class index.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::binio;
use crate::oracle::{argmax_lowest, check_shape, DecisionOracle, OracleError};
use crate::point::{Domain, Label, Point, Shape};

const MAGIC: &[u8; 4] = b"QMLP";

#[derive(Clone, Debug)]
struct Layer {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64], relu: bool) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.cols);
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.biases[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(if relu { acc.max(0.0) } else { acc });
        }
        out
    }
}

/// Feed-forward ReLU network ending in an argmax readout.
#[derive(Clone, Debug)]
pub struct MlpOracle {
    layers: Vec<Layer>,
    domain: Domain,
}

impl MlpOracle {
    /// Builds from per-layer `(rows, cols, weights, biases)` tuples; layer
    /// `i+1` must consume exactly what layer `i` produces.
    pub fn new(
        layers: Vec<(usize, usize, Vec<f64>, Vec<f64>)>,
        domain_hint: Option<Domain>,
    ) -> Result<Self, OracleError> {
        if layers.is_empty() {
            return Err(OracleError::Format("MLP needs at least one layer".into()));
        }
        let mut built = Vec::with_capacity(layers.len());
        let mut expect_cols = None;
        for (i, (rows, cols, weights, biases)) in layers.into_iter().enumerate() {
            if rows == 0 || cols == 0 {
                return Err(OracleError::Format(format!("layer {i} has a zero dimension")));
            }
            if weights.len() != rows * cols {
                return Err(OracleError::Format(format!(
                    "layer {i}: {} weights for a {rows}x{cols} matrix",
                    weights.len()
                )));
            }
            if biases.len() != rows {
                return Err(OracleError::Format(format!(
                    "layer {i}: {} biases for {rows} rows",
                    biases.len()
                )));
            }
            if let Some(expected) = expect_cols {
                if cols != expected {
                    return Err(OracleError::Format(format!(
                        "layer {i} consumes {cols} values but the previous layer produces {expected}"
                    )));
                }
            }
            expect_cols = Some(rows);
            built.push(Layer {
                rows,
                cols,
                weights,
                biases,
            });
        }
        let d = built[0].cols;
        let last_rows = built.last().expect("non-empty").rows;
        if last_rows < 2 {
            return Err(OracleError::Format(format!(
                "final layer produces {last_rows} scores; need at least 2 classes"
            )));
        }
        let domain = match domain_hint {
            Some(domain) => {
                if domain.len() != d {
                    return Err(OracleError::Format(format!(
                        "MLP consumes {d} values but requested shape {} has {}",
                        domain.shape,
                        domain.len()
                    )));
                }
                domain
            }
            None => Domain::unit(Shape::flat(d)),
        };
        Ok(MlpOracle {
            layers: built,
            domain,
        })
    }

    /// Deterministic random fixture: fully-connected layers
    /// `input_dim → hidden… → classes` with He-scaled Gaussian weights and
    /// small Gaussian biases, all drawn from a seeded generator. Values are
    /// rounded through `f32` so an in-memory fixture and its saved-then-
    /// loaded copy classify identically.
    pub fn seeded(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        seed: u64,
        domain_hint: Option<Domain>,
    ) -> Result<Self, OracleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (cols, rows) = (pair[0], pair[1]);
            let he = (2.0 / cols.max(1) as f64).sqrt();
            let weights = (0..rows.saturating_mul(cols))
                .map(|_| (rng.sample::<f64, _>(StandardNormal) * he) as f32 as f64)
                .collect();
            let biases = (0..rows)
                .map(|_| (rng.sample::<f64, _>(StandardNormal) * 0.05) as f32 as f64)
                .collect();
            layers.push((rows, cols, weights, biases));
        }
        Self::new(layers, domain_hint)
    }

    pub fn scores(&self, point: &Point) -> Result<Vec<f64>, OracleError> {
        check_shape(self.domain.shape, point)?;
        let last = self.layers.len() - 1;
        let mut activ = self.layers[0].forward(&point.values, last != 0);
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            activ = layer.forward(&activ, i != last);
        }
        Ok(activ)
    }

    pub fn classes(&self) -> usize {
        self.layers.last().expect("non-empty").rows
    }

    /// Writes the binary format documented on the module.
    pub fn save(&self, path: &Path) -> Result<(), OracleError> {
        let io_err = |source| OracleError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        (|| {
            binio::write_magic(&mut w, MAGIC)?;
            binio::write_u32(&mut w, self.layers.len() as u32)?;
            for layer in &self.layers {
                binio::write_u32(&mut w, layer.rows as u32)?;
                binio::write_u32(&mut w, layer.cols as u32)?;
                binio::write_f32_slice(&mut w, &binio::narrow(&layer.weights))?;
                binio::write_f32_slice(&mut w, &binio::narrow(&layer.biases))?;
            }
            Ok(())
        })()
        .map_err(io_err)
    }

    /// Loads the binary format documented on the module.
    pub fn load(path: &Path, domain_hint: Option<Domain>) -> Result<Self, OracleError> {
        let io_err = |source| OracleError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut r = BufReader::new(File::open(path).map_err(io_err)?);
        if !binio::read_magic(&mut r, MAGIC).map_err(io_err)? {
            return Err(OracleError::Format(format!(
                "{} is not an MLP weight file (bad magic)",
                path.display()
            )));
        }
        let count = binio::read_u32(&mut r).map_err(io_err)? as usize;
        if count == 0 || count > 1024 {
            return Err(OracleError::Format(format!("implausible layer count {count}")));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = binio::read_u32(&mut r).map_err(io_err)? as usize;
            let cols = binio::read_u32(&mut r).map_err(io_err)? as usize;
            if rows == 0 || cols == 0 || rows.saturating_mul(cols) > (1 << 28) {
                return Err(OracleError::Format(format!(
                    "implausible layer dimensions {rows}x{cols}"
                )));
            }
            let weights = binio::widen(&binio::read_f32_vec(&mut r, rows * cols).map_err(io_err)?);
            let biases = binio::widen(&binio::read_f32_vec(&mut r, rows).map_err(io_err)?);
            layers.push((rows, cols, weights, biases));
        }
        Self::new(layers, domain_hint)
    }
}

impl DecisionOracle for MlpOracle {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        let scores = self.scores(point)?;
        Ok(Label(argmax_lowest(&scores) as i64))
    }

    fn classify_batch(&self, points: &[Point]) -> Result<Vec<Label>, OracleError> {
        if points.is_empty() {
            return Err(OracleError::EmptyBatch);
        }
        // Parallel map preserves input order; report the first failing index.
        let results: Vec<Result<Label, OracleError>> =
            points.par_iter().map(|p| self.classify(p)).collect();
        let mut labels = Vec::with_capacity(results.len());
        for (index, result) in results.into_iter().enumerate() {
            match result {
                Ok(label) => labels.push(label),
                Err(source) => {
                    return Err(OracleError::BatchElement {
                        index,
                        source: Box::new(source),
                    })
                }
            }
        }
        Ok(labels)
    }

    fn supports_batch(&self) -> bool {
        true
    }
}
