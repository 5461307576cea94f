//! Data matrix → scatter matrix → −2 log Λₙ.

use nalgebra::{Cholesky, DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::partition::GroupPartition;

/// `n` observations (rows) of `p` variables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Builds from row-major values.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Data(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Data(format!("row {} has {} columns, expected {cols}", i + 1, rows[i].len())));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, &flat)
    }

    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::Data(format!("need at least 2 observations, got {}", values.nrows())));
        }
        if values.ncols() == 0 {
            return Err(Error::Data("data has no columns".into()));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (r, c) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::Data(format!("non-finite entry at row {}, column {}", r + 1, c + 1)));
        }
        Ok(Self { values })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Symmetric p×p scatter matrix A = Σ (xᵢ − x̄)(xᵢ − x̄)′.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    a: DMatrix<f64>,
}

impl ScatterMatrix {
    /// Wraps a matrix, symmetrizing it by averaging the two triangles.
    pub fn from_matrix(mut a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Data(format!("scatter matrix must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("scatter matrix has non-finite entries".into()));
        }
        symmetrize(&mut a);
        Ok(Self { a })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Block `(i, j)` of the partition, zero-based.
    pub fn block(&self, partition: &GroupPartition, i: usize, j: usize) -> DMatrixView<'_, f64> {
        let ranges = partition.ranges();
        let (ri, rj) = (&ranges[i], &ranges[j]);
        self.a.view((ri.start, rj.start), (ri.len(), rj.len()))
    }

    pub(crate) fn check_partition(&self, partition: &GroupPartition) -> Result<()> {
        if partition.p() != self.dim() {
            return Err(Error::Partition(format!(
                "partition {partition} covers {} variables but the data has {}",
                partition.p(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let p = a.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Scatter matrix of the column-centered data.
pub fn scatter(data: &DataMatrix) -> Result<ScatterMatrix> {
    let x = data.as_matrix();
    let n = x.nrows() as f64;
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    ScatterMatrix::from_matrix(centered.tr_mul(&centered))
}

/// A pivot is rejected when L_ii² / A_ii, the share of a variable's
/// variance not explained by the preceding ones, is at round-off level
/// (`dim · ε`).
///
/// Cholesky factor of a numerically positive definite matrix.
pub(crate) fn cholesky_pd(m: DMatrix<f64>, what: impl FnOnce() -> String) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let diag = m.diagonal();
    let tol = m.nrows() as f64 * f64::EPSILON;
    let chol = match Cholesky::new(m) {
        Some(c) => c,
        None => return Err(Error::Factorization { what: what() }),
    };
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.is_finite() && d > 0.0 && d * d > tol * diag[i]) {
            return Err(Error::Factorization { what: what() });
        }
    }
    Ok(chol)
}

/// log determinant of a positive definite matrix via Cholesky.
pub(crate) fn log_det_pd(m: DMatrix<f64>, what: impl FnOnce() -> String) -> Result<f64> {
    let chol = cholesky_pd(m, what)?;
    let l = chol.l_dirty();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

/// Values in this band below zero are round-off and reported as 0.
const ROUNDOFF_CLAMP: f64 = 1e-9;

/// −2 log Λₙ = −n (log|A| − Σᵢ log|Aᵢᵢ|).
pub fn neg2_log_lambda(a: &ScatterMatrix, partition: &GroupPartition, n: usize) -> Result<f64> {
    a.check_partition(partition)?;
    if partition.p() >= n {
        return Err(Error::Domain(format!("likelihood ratio requires p < n, got p = {}, n = {n}", partition.p())));
    }
    let log_w = log_wilks(a, partition)?;
    let stat = -(n as f64) * log_w;
    if stat < 0.0 {
        if stat >= -ROUNDOFF_CLAMP {
            return Ok(0.0);
        }
        return Err(Error::Degenerate(format!(
            "-2 log Lambda evaluated to {stat}; scatter matrix is too ill-conditioned"
        )));
    }
    Ok(stat)
}

/// log Wₙ = log|A| − Σᵢ log|Aᵢᵢ| (≤ 0 up to round-off).
pub fn log_wilks(a: &ScatterMatrix, partition: &GroupPartition) -> Result<f64> {
    a.check_partition(partition)?;
    // blocks first so a singular block is reported by name
    let mut blocks = 0.0;
    for (i, r) in partition.ranges().into_iter().enumerate() {
        let sub = a.a.view((r.start, r.start), (r.len(), r.len())).clone_owned();
        blocks += log_det_pd(sub, || format!("diagonal block {} (columns {}..{})", i + 1, r.start + 1, r.end))?;
    }
    let full = log_det_pd(a.a.clone(), || "the full scatter matrix".into())?;
    Ok(full - blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
        DataMatrix::from_row_major(n, p, &v).unwrap()
    }

    #[test]
    fn identical_rows_give_zero_scatter() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        let a = scatter(&d).unwrap();
        assert!(a.as_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn orthonormal_centered_columns() {
        // columns of a 4x2 matrix, centered and orthonormal, scaled by 3
        let h = 0.5;
        let rows = vec![vec![h, h], vec![h, -h], vec![-h, h], vec![-h, -h]];
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(|v| 3.0 * v).collect()).collect();
        let a = scatter(&DataMatrix::from_rows(&rows).unwrap()).unwrap();
        let expect = DMatrix::<f64>::identity(2, 2) * 9.0;
        assert!((a.as_matrix() - expect).abs().max() < 1e-14);
    }

    #[test]
    fn scatter_matches_double_loop() {
        let d = random_data(50, 5, 3);
        let a = scatter(&d).unwrap();
        let x = d.as_matrix();
        let means: Vec<f64> = (0..5).map(|j| (0..50).map(|i| x[(i, j)]).sum::<f64>() / 50.0).collect();
        for r in 0..5 {
            for c in 0..5 {
                let mut s = 0.0;
                for i in 0..50 {
                    s += (x[(i, r)] - means[r]) * (x[(i, c)] - means[c]);
                }
                assert!((a.as_matrix()[(r, c)] - s).abs() <= 1e-9 * s.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_data() {
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(DataMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn block_diagonal_scatter_gives_zero() {
        let g: GroupPartition = "2,1".parse().unwrap();
        let a = ScatterMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(neg2_log_lambda(&a, &g, 10).unwrap(), 0.0);
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 4.0]);
        let a = ScatterMatrix::from_matrix(m).unwrap();
        assert!(neg2_log_lambda(&a, &g, 10).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bivariate_correlation_identity() {
        let g: GroupPartition = "1,1".parse().unwrap();
        let a = ScatterMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0])).unwrap();
        let s = neg2_log_lambda(&a, &g, 10).unwrap();
        assert!((s - 4.462_871).abs() < 1e-6);
        assert!((s + 10.0 * 0.64f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn singular_blocks_are_reported() {
        let g: GroupPartition = "1,1".parse().unwrap();
        let a = ScatterMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        let err = neg2_log_lambda(&a, &g, 10).unwrap_err();
        assert!(err.is_numerical());
        let a = ScatterMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        match neg2_log_lambda(&a, &g, 10) {
            Err(Error::Factorization { what }) => assert!(what.contains("full") || what.contains("block")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_must_cover_columns() {
        let a = ScatterMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let g: GroupPartition = "1,1".parse().unwrap();
        assert!(matches!(neg2_log_lambda(&a, &g, 10), Err(Error::Partition(_))));
        let g: GroupPartition = "2,1".parse().unwrap();
        assert!(matches!(neg2_log_lambda(&a, &g, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn column_scaling_and_block_rotation_invariance() {
        let d = random_data(30, 5, 17);
        let g: GroupPartition = "3,2".parse().unwrap();
        let base = neg2_log_lambda(&scatter(&d).unwrap(), &g, 30).unwrap();

        let mut scaled = d.as_matrix().clone();
        scaled.column_mut(1).scale_mut(-7.5);
        let s = neg2_log_lambda(&scatter(&DataMatrix::from_matrix(scaled).unwrap()).unwrap(), &g, 30).unwrap();
        assert!((s - base).abs() < 1e-8);

        // rotate the second block (columns 3, 4)
        let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
        let mut rot = d.as_matrix().clone();
        for i in 0..30 {
            let (u, v) = (rot[(i, 3)], rot[(i, 4)]);
            rot[(i, 3)] = c * u - sn * v;
            rot[(i, 4)] = sn * u + c * v;
        }
        let s = neg2_log_lambda(&scatter(&DataMatrix::from_matrix(rot).unwrap()).unwrap(), &g, 30).unwrap();
        assert!((s - base).abs() < 1e-8);
    }
}
