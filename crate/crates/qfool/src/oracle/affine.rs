//! Multiclass affine oracle `argmax_k (W_k·x + b_k)` with exact boundary
//! geometry, the workhorse ground truth for attack validation.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::binio;
use crate::oracle::{argmax_lowest, check_shape, AnalyticBoundary, DecisionOracle, OracleError};
use crate::point::{Domain, Label, Point, Shape};
use crate::vecmath;

const MAGIC: &[u8; 4] = b"QAF1";

/// `argmax_k (W_k·x + b_k)` over `K ≥ 2` classes.
#[derive(Clone, Debug)]
pub struct AffineMulticlassOracle {
    /// Row-major class weights, one row of length `d` per class.
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    domain: Domain,
}

impl AffineMulticlassOracle {
    pub fn new(
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        domain: Domain,
    ) -> Result<Self, OracleError> {
        if weights.len() < 2 {
            return Err(OracleError::Format(format!(
                "affine oracle needs at least 2 classes, got {}",
                weights.len()
            )));
        }
        if weights.len() != biases.len() {
            return Err(OracleError::Format(format!(
                "{} weight rows but {} biases",
                weights.len(),
                biases.len()
            )));
        }
        let d = domain.len();
        if let Some(row) = weights.iter().find(|row| row.len() != d) {
            return Err(OracleError::Format(format!(
                "weight row of length {} in a {d}-dimensional domain",
                row.len()
            )));
        }
        Ok(AffineMulticlassOracle {
            weights,
            biases,
            domain,
        })
    }

    /// Two-class convenience: label 1 iff `w·x > b`, ties to label 0.
    pub fn binary(w: Vec<f64>, b: f64, domain: Domain) -> Result<Self, OracleError> {
        let zero = vec![0.0; w.len()];
        Self::new(vec![zero, w], vec![0.0, -b], domain)
    }

    /// Deterministic random fixture: one Gaussian weight row per class,
    /// scaled `1/√d`, with small Gaussian biases, all from a seeded
    /// generator. Values are rounded through `f32` so an in-memory fixture
    /// and its saved-then-loaded copy classify identically.
    pub fn seeded(
        classes: usize,
        seed: u64,
        domain: Domain,
    ) -> Result<Self, OracleError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = domain.len();
        let scale = (1.0 / d.max(1) as f64).sqrt();
        let weights = (0..classes)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        (rng.sample::<f64, _>(rand_distr::StandardNormal) * scale) as f32 as f64
                    })
                    .collect()
            })
            .collect();
        let biases = (0..classes)
            .map(|_| (rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.05) as f32 as f64)
            .collect();
        Self::new(weights, biases, domain)
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn scores(&self, point: &Point) -> Result<Vec<f64>, OracleError> {
        check_shape(self.domain.shape, point)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, &b)| vecmath::dot(w, &point.values) + b)
            .collect())
    }

    /// Margin-scaled geometry toward every competing class: for each `k` other
    /// than the current label, the distance to the pairwise boundary and the
    /// unit normal pointing across it.
    fn competitor_geometry(
        &self,
        point: &Point,
    ) -> Result<(usize, Vec<(usize, f64, Vec<f64>)>), OracleError> {
        let scores = self.scores(point)?;
        let current = argmax_lowest(&scores);
        let mut competitors = Vec::new();
        for k in 0..self.weights.len() {
            if k == current {
                continue;
            }
            let diff: Vec<f64> = vecmath::sub(&self.weights[current], &self.weights[k]);
            let norm = vecmath::norm(&diff);
            if norm == 0.0 {
                // Parallel rows never swap order; no boundary toward k.
                continue;
            }
            let margin = scores[current] - scores[k];
            let distance = margin / norm;
            let normal = diff.iter().map(|&v| -v / norm).collect();
            competitors.push((k, distance, normal));
        }
        if competitors.is_empty() {
            return Err(OracleError::Format(
                "affine oracle has no reachable boundary from this point".into(),
            ));
        }
        Ok((current, competitors))
    }

    /// Exact distance from `point` to the region classified as `target`,
    /// ignoring box constraints. Computed as the min-norm projection onto the
    /// polyhedron `{x : (W_t - W_j)·x + (b_t - b_j) ≥ 0 ∀ j ≠ t}` by
    /// enumerating candidate active sets.
    pub fn min_perturbation_to_class(
        &self,
        point: &Point,
        target: Label,
    ) -> Result<f64, OracleError> {
        check_shape(self.domain.shape, point)?;
        let t = target.0 as usize;
        if target.0 < 0 || t >= self.weights.len() {
            return Err(OracleError::Format(format!(
                "target class {target} outside 0..{}",
                self.weights.len()
            )));
        }
        // Constraints a_j·x ≥ c_j for reaching (at least tying into) class t.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for j in 0..self.weights.len() {
            if j == t {
                continue;
            }
            let a = vecmath::sub(&self.weights[t], &self.weights[j]);
            if vecmath::norm(&a) == 0.0 {
                if self.biases[t] < self.biases[j] {
                    return Err(OracleError::Format(format!(
                        "class {t} is dominated by class {j}; target region is empty"
                    )));
                }
                continue;
            }
            rhs.push(self.biases[j] - self.biases[t]);
            rows.push(a);
        }
        let x0 = &point.values;
        let feasible = |x: &[f64]| {
            rows.iter()
                .zip(&rhs)
                .all(|(a, &c)| vecmath::dot(a, x) >= c - 1e-9)
        };
        if feasible(x0) {
            return Ok(0.0);
        }
        let mut best: Option<f64> = None;
        let m = rows.len();
        let max_active = m.min(x0.len());
        // Projection onto the polyhedron lies on a face; enumerate them.
        for mask in 1u32..(1 << m) {
            let active: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
            if active.len() > max_active {
                continue;
            }
            // Solve (A_S A_Sᵀ) λ = c_S - A_S x0, then x = x0 + A_Sᵀ λ.
            let k = active.len();
            let mut gram = vec![vec![0.0; k]; k];
            let mut resid = vec![0.0; k];
            for (p, &jp) in active.iter().enumerate() {
                for (q, &jq) in active.iter().enumerate() {
                    gram[p][q] = vecmath::dot(&rows[jp], &rows[jq]);
                }
                resid[p] = rhs[jp] - vecmath::dot(&rows[jp], x0);
            }
            let Some(lambda) = solve_dense(gram, resid) else {
                continue; // degenerate face
            };
            let mut x = x0.clone();
            for (p, &jp) in active.iter().enumerate() {
                vecmath::axpy(&mut x, lambda[p], &rows[jp]);
            }
            if feasible(&x) {
                let dist = vecmath::distance(&x, x0);
                if best.is_none_or(|b| dist < b) {
                    best = Some(dist);
                }
            }
        }
        best.ok_or_else(|| {
            OracleError::Format(format!("no feasible projection into class {t}"))
        })
    }

    /// Writes the binary weight format: magic `QAF1`, `u32` class count,
    /// `u32` dimension, row-major `f32` weights, then `f32` biases.
    pub fn save(&self, path: &Path) -> Result<(), OracleError> {
        let io_err = |source| OracleError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        (|| {
            binio::write_magic(&mut w, MAGIC)?;
            binio::write_u32(&mut w, self.weights.len() as u32)?;
            binio::write_u32(&mut w, self.domain.len() as u32)?;
            for row in &self.weights {
                binio::write_f32_slice(&mut w, &binio::narrow(row))?;
            }
            binio::write_f32_slice(&mut w, &binio::narrow(&self.biases))
        })()
        .map_err(io_err)
    }

    /// Loads the format written by [`save`](Self::save). The file fixes only
    /// the math; `domain_hint` supplies shape and bounds (its length must
    /// match the stored dimension) and defaults to a flat unit box.
    pub fn load(path: &Path, domain_hint: Option<Domain>) -> Result<Self, OracleError> {
        let io_err = |source| OracleError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut r = BufReader::new(File::open(path).map_err(io_err)?);
        if !binio::read_magic(&mut r, MAGIC).map_err(io_err)? {
            return Err(OracleError::Format(format!(
                "{} is not an affine weight file (bad magic)",
                path.display()
            )));
        }
        let classes = binio::read_u32(&mut r).map_err(io_err)? as usize;
        let d = binio::read_u32(&mut r).map_err(io_err)? as usize;
        let domain = match domain_hint {
            Some(domain) => {
                if domain.len() != d {
                    return Err(OracleError::Format(format!(
                        "weight file is {d}-dimensional but requested shape {} has {} entries",
                        domain.shape,
                        domain.len()
                    )));
                }
                domain
            }
            None => Domain::unit(Shape::flat(d)),
        };
        let mut weights = Vec::with_capacity(classes);
        for _ in 0..classes {
            weights.push(binio::widen(&binio::read_f32_vec(&mut r, d).map_err(io_err)?));
        }
        let biases = binio::widen(&binio::read_f32_vec(&mut r, classes).map_err(io_err)?);
        Self::new(weights, biases, domain)
    }
}

impl DecisionOracle for AffineMulticlassOracle {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        let scores = self.scores(point)?;
        Ok(Label(argmax_lowest(&scores) as i64))
    }
}

impl AnalyticBoundary for AffineMulticlassOracle {
    fn boundary_normal(&self, point: &Point) -> Result<Vec<f64>, OracleError> {
        let (_, competitors) = self.competitor_geometry(point)?;
        let nearest = competitors
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"))
            .expect("competitor list is non-empty");
        Ok(nearest.2.clone())
    }

    fn min_perturbation_norm(&self, point: &Point) -> Result<f64, OracleError> {
        let (_, competitors) = self.competitor_geometry(point)?;
        Ok(competitors
            .iter()
            .map(|c| c.1)
            .fold(f64::INFINITY, f64::min))
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite matrix")
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
