//! Principal component analysis for the output layer.
//!
//! [`em_pca_fit`] alternates a latent-coordinate solve and a basis solve on
//! mean-centered data and only touches the data through `X·C` and `Xᵀ·Y`
//! products, so sparse inputs are never densified. [`exact_pca_fit`] is a
//! dense eigendecomposition used for small inputs and as a test oracle.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::{Purpose, RandomStream};

/// Mean plus an orthonormal `d × p` basis ordered by captured variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// Row-major `d × p`.
    basis: Vec<f64>,
    /// Variance captured by each component, non-increasing.
    variances: Vec<f64>,
    d: usize,
    p: usize,
}

impl PcaModel {
    pub fn new(mean: Vec<f64>, basis: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        let p = variances.len();
        if basis.len() != d * p {
            return Err(Error::DimensionMismatch {
                expected: d * p,
                found: basis.len(),
            });
        }
        Ok(Self {
            mean,
            basis,
            variances,
            d,
            p,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Column `j` of the basis.
    pub fn component(&self, j: usize) -> Vec<f64> {
        (0..self.d).map(|i| self.basis[i * self.p + j]).collect()
    }

    pub fn transform(&self, data: &DataMatrix) -> Result<DataMatrix> {
        pca_transform(self, data)
    }
}

/// Settings for [`em_pca_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmPcaOptions {
    pub max_iters: usize,
    /// Stop once the largest principal angle between successive subspaces drops below this.
    pub tol: f64,
    /// Re-randomizations allowed when a solve turns singular.
    pub max_retries: usize,
}

impl Default for EmPcaOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-7,
            max_retries: 8,
        }
    }
}

fn checked_dims(data: &DataMatrix, p: usize) -> Result<usize> {
    if p == 0 {
        return Err(Error::InvalidArgument("PCA needs at least one component".into()));
    }
    if data.n() == 0 || data.d() == 0 {
        return Err(Error::InvalidArgument("PCA input is empty".into()));
    }
    let cap = data.n().min(data.d());
    if p > cap {
        warn!("requested {p} components but min(n, d) = {cap}; fitting {cap}");
        Ok(cap)
    } else {
        Ok(p)
    }
}

/// Centered product `(X − 1·μᵀ)·C`, row-major `n × p`.
fn centered_mul(data: &DataMatrix, mean: &[f64], c: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, p) = c.shape();
    let c_rows: Vec<f64> = (0..d).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| c[(i, j)]).collect();
    let xc = data.mul_dense(&c_rows, p);
    let shift = DMatrix::from_row_slice(1, d, mean) * c;
    let mut z = DMatrix::from_row_slice(data.n(), p, &xc);
    for mut row in z.row_iter_mut() {
        row -= &shift;
    }
    z
}

/// Centered product `(X − 1·μᵀ)ᵀ·Y`, `d × p`.
fn centered_t_mul(data: &DataMatrix, mean: &[f64], y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = y.shape();
    let y_rows: Vec<f64> = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| y[(i, j)]).collect();
    let xty = data.t_mul_dense(&y_rows, p);
    let col_sums = y.row_sum();
    let mut out = DMatrix::from_row_slice(data.d(), p, &xty);
    for (i, &m) in mean.iter().enumerate() {
        if m != 0.0 {
            for j in 0..p {
                out[(i, j)] -= m * col_sums[j];
            }
        }
    }
    out
}

/// Orthonormalizes the columns of `c` in place by two passes of modified
/// Gram–Schmidt. A column that vanishes is replaced by a random direction.
/// Returns the number of replacements made.
fn orthonormalize<R: Rng>(c: &mut DMatrix<f64>, rng: &mut R, budget: usize) -> Result<usize> {
    let (d, p) = c.shape();
    let mut replaced = 0;
    for j in 0..p {
        let scale = c.column(j).norm();
        loop {
            for _ in 0..2 {
                for i in 0..j {
                    let proj = c.column(i).dot(&c.column(j));
                    let qi = c.column(i).clone_owned();
                    c.column_mut(j).axpy(-proj, &qi, 1.0);
                }
            }
            let norm = c.column(j).norm();
            if norm > 1e-10 * scale.max(f64::MIN_POSITIVE) && norm > 1e-300 {
                c.column_mut(j).scale_mut(1.0 / norm);
                break;
            }
            replaced += 1;
            if replaced > budget {
                return Err(Error::InvalidArgument(
                    "PCA basis collapsed repeatedly; data may be degenerate".into(),
                ));
            }
            for i in 0..d {
                c[(i, j)] = rng.sample(StandardNormal);
            }
        }
    }
    Ok(replaced)
}

/// Sine of the largest principal angle between the spans of two orthonormal bases.
pub fn max_principal_angle_sin(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    let m = q1.transpose() * q2;
    let r = q2 - q1 * m;
    let rtr = r.transpose() * &r;
    let eig = SymmetricEigen::new(rtr);
    eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b)).max(0.0).sqrt()
}

/// Largest principal angle (radians) between the column spans of two fitted models.
pub fn max_principal_angle(a: &PcaModel, b: &PcaModel) -> f64 {
    let qa = DMatrix::from_row_slice(a.d, a.p, &a.basis);
    let qb = DMatrix::from_row_slice(b.d, b.p, &b.basis);
    max_principal_angle_sin(&qa, &qb).min(1.0).asin()
}

/// Rotates an orthonormal basis so projected coordinates are uncorrelated
/// with non-increasing variance, then fixes signs so the largest-magnitude
/// entry of every column is positive.
fn finalize(data: &DataMatrix, mean: Vec<f64>, q: DMatrix<f64>) -> Result<PcaModel> {
    let z = centered_mul(data, &mean, &q);
    let cov = (z.transpose() * &z) / data.n() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (d, p) = q.shape();
    let mut basis = DMatrix::zeros(d, p);
    let mut variances = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &(&q * eig.eigenvectors.column(src)));
        variances.push(eig.eigenvalues[src].max(0.0));
    }
    fix_signs(&mut basis);
    PcaModel::new(mean, to_row_major(&basis), variances)
}

fn fix_signs(basis: &mut DMatrix<f64>) {
    for j in 0..basis.ncols() {
        let mut best = (0usize, 0.0f64);
        for i in 0..basis.nrows() {
            if basis[(i, j)].abs() > best.1 {
                best = (i, basis[(i, j)].abs());
            }
        }
        if basis[(best.0, j)] < 0.0 {
            basis.column_mut(j).neg_mut();
        }
    }
}

fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Expectation-maximization PCA.
pub fn em_pca_fit(
    data: &DataMatrix,
    p: usize,
    options: &EmPcaOptions,
    stream: &RandomStream,
) -> Result<PcaModel> {
    let p = checked_dims(data, p)?;
    let d = data.d();
    let mean = data.column_means();
    let mut rng = stream.with_purpose(Purpose::PcaInit).rng();
    let budget = options.max_retries * p.max(1);

    let mut c = DMatrix::from_fn(d, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut retries = orthonormalize(&mut c, &mut rng, budget)?;

    for _ in 0..options.max_iters {
        // latent coordinates: Y = X̃ C (CᵀC)⁻¹
        let z = centered_mul(data, &mean, &c);
        let ctc = c.transpose() * &c;
        let y = match ctc.cholesky() {
            Some(ch) => ch.solve(&z.transpose()).transpose(),
            None => {
                retries += orthonormalize(&mut c, &mut rng, budget - retries.min(budget))?;
                continue;
            }
        };
        // basis: C = X̃ᵀ Y (YᵀY)⁻¹
        let xty = centered_t_mul(data, &mean, &y);
        let yty = y.transpose() * &y;
        let mut next = match yty.clone().cholesky() {
            Some(ch) => ch.solve(&xty.transpose()).transpose(),
            None => xty,
        };
        retries += orthonormalize(&mut next, &mut rng, budget.saturating_sub(retries))?;
        let change = max_principal_angle_sin(&c, &next).min(1.0).asin();
        c = next;
        if change < options.tol {
            break;
        }
    }
    finalize(data, mean, c)
}

/// Dense-size ceiling for [`exact_pca_fit`].
pub const EXACT_PCA_MAX_DIM: usize = 4096;

/// PCA by eigendecomposition of the covariance, or of the Gram matrix when `d > n`.
pub fn exact_pca_fit(data: &DataMatrix, p: usize) -> Result<PcaModel> {
    let p = checked_dims(data, p)?;
    let (n, d) = (data.n(), data.d());
    if n.min(d) > EXACT_PCA_MAX_DIM {
        return Err(Error::SizeGuard(format!(
            "{n} x {d} exceeds the dense limit of {EXACT_PCA_MAX_DIM} on the smaller side"
        )));
    }
    let mean = data.column_means();
    let dense = data.to_dense();
    let mut x = DMatrix::from_row_slice(n, d, dense.as_dense().unwrap());
    for mut row in x.row_iter_mut() {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut q = DMatrix::zeros(d, p);
    if d <= n {
        let cov = x.transpose() * &x;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for (dst, &src) in order.iter().take(p).enumerate() {
            q.set_column(dst, &eig.eigenvectors.column(src));
        }
    } else {
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        for (dst, &src) in order.iter().take(p).enumerate() {
            let lambda = eig.eigenvalues[src];
            if lambda > 1e-12 * top.max(f64::MIN_POSITIVE) {
                let col = x.transpose() * eig.eigenvectors.column(src) / lambda.sqrt();
                q.set_column(dst, &col);
            }
            // zero-variance directions are completed below
        }
        let mut rng = RandomStream::new(0).with_purpose(Purpose::PcaInit).rng();
        orthonormalize(&mut q, &mut rng, 4 * p)?;
    }
    finalize(data, mean, q)
}

/// `(x − mean)·basis` for every row.
pub fn pca_transform(model: &PcaModel, data: &DataMatrix) -> Result<DataMatrix> {
    if data.d() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            found: data.d(),
        });
    }
    let p = model.p;
    let mut out = data.mul_dense(&model.basis, p);
    let mut shift = vec![0.0; p];
    for (i, &m) in model.mean.iter().enumerate() {
        if m != 0.0 {
            for j in 0..p {
                shift[j] += m * model.basis[i * p + j];
            }
        }
    }
    for row in out.chunks_mut(p) {
        for (v, s) in row.iter_mut().zip(&shift) {
            *v -= s;
        }
    }
    DataMatrix::dense(data.n(), p, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = RandomStream::new(seed).rng();
        DataMatrix::dense(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    fn low_rank(n: usize, d: usize, r: usize, seed: u64) -> DataMatrix {
        let a = gaussian(n, r, seed);
        let b = gaussian(r, d, seed + 1000);
        let prod = a.mul_dense(b.as_dense().unwrap(), d);
        DataMatrix::dense(n, d, prod).unwrap()
    }

    fn orthonormality_error(m: &PcaModel) -> f64 {
        let q = DMatrix::from_row_slice(m.d(), m.p(), m.basis());
        let g = q.transpose() * q;
        (g - DMatrix::identity(m.p(), m.p())).abs().max()
    }

    #[test]
    fn line_data_first_component() {
        let dir = [0.6, 0.0, -0.8];
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|t| {
                let s = t as f64 - 7.3;
                vec![1.0 + s * dir[0], 2.0 + s * dir[1], -1.0 + s * dir[2]]
            })
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        for m in [
            em_pca_fit(&data, 1, &EmPcaOptions::default(), &RandomStream::new(1)).unwrap(),
            exact_pca_fit(&data, 1).unwrap(),
        ] {
            let c = m.component(0);
            let cos = (c[0] * dir[0] + c[1] * dir[1] + c[2] * dir[2]).abs();
            assert!((cos - 1.0).abs() < 1e-10, "cos = {cos}");
            // largest-magnitude entry is positive
            assert!(c[2] > 0.0);
        }
    }

    #[test]
    fn full_basis_preserves_distances() {
        let data = gaussian(30, 6, 3);
        for m in [
            em_pca_fit(&data, 6, &EmPcaOptions::default(), &RandomStream::new(2)).unwrap(),
            exact_pca_fit(&data, 6).unwrap(),
        ] {
            let z = m.transform(&data).unwrap();
            for a in 0..30 {
                for b in 0..30 {
                    let dx: f64 = (0..6).map(|j| (data.get(a, j) - data.get(b, j)).powi(2)).sum();
                    let dz: f64 = (0..6).map(|j| (z.get(a, j) - z.get(b, j)).powi(2)).sum();
                    assert!((dx.sqrt() - dz.sqrt()).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn rank_five_subspace_matches_exact() {
        let data = low_rank(50, 10, 5, 7);
        let em = em_pca_fit(&data, 5, &EmPcaOptions::default(), &RandomStream::new(4)).unwrap();
        let ex = exact_pca_fit(&data, 5).unwrap();
        assert!(max_principal_angle(&em, &ex) < 1e-8);
        assert!(orthonormality_error(&em) < 1e-10);
        assert!(orthonormality_error(&ex) < 1e-10);
    }

    #[test]
    fn transform_centering_and_unit_coordinates() {
        let data = gaussian(40, 5, 9);
        let m = exact_pca_fit(&data, 3).unwrap();
        let mean_row = DataMatrix::dense(1, 5, m.mean().to_vec()).unwrap();
        let z = m.transform(&mean_row).unwrap();
        assert!((0..3).all(|j| z.get(0, j).abs() < 1e-12));
        for j in 0..3 {
            let point: Vec<f64> = m.component(j).iter().zip(m.mean()).map(|(c, mu)| c + mu).collect();
            let z = m.transform(&DataMatrix::dense(1, 5, point).unwrap()).unwrap();
            for t in 0..3 {
                let want = if t == j { 1.0 } else { 0.0 };
                assert!((z.get(0, t) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn output_coordinates_are_uncorrelated() {
        let data = gaussian(80, 7, 10);
        let m = em_pca_fit(&data, 4, &EmPcaOptions { max_iters: 5000, tol: 1e-12, ..Default::default() }, &RandomStream::new(5)).unwrap();
        let z = m.transform(&data).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    let cov: f64 = (0..80).map(|i| z.get(i, a) * z.get(i, b)).sum::<f64>() / 80.0;
                    assert!(cov.abs() < 1e-8, "cov({a},{b}) = {cov}");
                }
            }
        }
        assert!(m.variances().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn gram_path_when_wide() {
        let data = gaussian(8, 20, 11);
        let wide = exact_pca_fit(&data, 7).unwrap();
        let em = em_pca_fit(&data, 7, &EmPcaOptions { max_iters: 20000, tol: 1e-13, ..Default::default() }, &RandomStream::new(1)).unwrap();
        assert!(orthonormality_error(&wide) < 1e-10);
        assert!(max_principal_angle(&wide, &em) < 1e-6);
    }

    #[test]
    fn rank_deficient_request_is_completed() {
        // 5 samples in 10 dims: centered rank is 4, p = 5 asks for one zero-variance direction
        let data = gaussian(5, 10, 12);
        let em = em_pca_fit(&data, 5, &EmPcaOptions::default(), &RandomStream::new(3)).unwrap();
        assert!(orthonormality_error(&em) < 1e-10);
        assert!(em.variances()[4].abs() < 1e-10);
        let ex = exact_pca_fit(&data, 5).unwrap();
        assert!(orthonormality_error(&ex) < 1e-10);
    }

    #[test]
    fn too_many_components_reduced() {
        let data = gaussian(3, 4, 1);
        let m = em_pca_fit(&data, 10, &EmPcaOptions::default(), &RandomStream::new(0)).unwrap();
        assert_eq!(m.p(), 3);
    }

    #[test]
    fn sparse_input_matches_dense() {
        let data = low_rank(30, 12, 3, 2).map_values(|v| if v.abs() < 1.0 { 0.0 } else { v });
        let sparse = data.to_sparse();
        let a = em_pca_fit(&data, 3, &EmPcaOptions::default(), &RandomStream::new(8)).unwrap();
        let b = em_pca_fit(&sparse, 3, &EmPcaOptions::default(), &RandomStream::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transform_dimension_mismatch() {
        let m = exact_pca_fit(&gaussian(10, 3, 1), 2).unwrap();
        assert!(m.transform(&gaussian(2, 4, 1)).is_err());
    }
}
