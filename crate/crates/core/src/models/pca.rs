use nalgebra::{DMatrix, SymmetricEigen};

use super::neighbors::NeighborIndex;
use crate::error::{Error, Result};
use crate::ingest::Standardizer;
use crate::matrix::FeatureMatrix;
use crate::model::{BlackBoxModel, ModelOutput};

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Principal axes of standardized data.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    standardizer: Standardizer,
    /// Row-major `components x p` loadings.
    loadings: Vec<f64>,
    eigenvalues: Vec<f64>,
    n_features: usize,
}

impl Pca {
    /// Keeps the `components` leading axes of the sample covariance of the
    /// standardized columns. Each axis is signed so that its largest-magnitude
    /// loading is positive.
    pub fn fit(train: &FeatureMatrix, components: usize) -> Result<Self> {
        let n = train.n_rows();
        let p = train.n_features();
        if components == 0 || components > p.min(n.saturating_sub(1)) {
            return Err(Error::Fit(format!(
                "component count {components} must be in 1..={}",
                p.min(n.saturating_sub(1))
            )));
        }
        let standardizer = Standardizer::fit(train);
        let z = standardizer.transform(train)?;
        let zm = DMatrix::from_row_slice(n, p, z.as_slice());
        let cov = (zm.transpose() * &zm) / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let largest = eig.eigenvalues[order[0]].max(0.0);
        let rank = order
            .iter()
            .filter(|&&i| eig.eigenvalues[i] > RANK_TOLERANCE * largest.max(f64::MIN_POSITIVE))
            .count();
        if components > rank {
            return Err(Error::Fit(format!(
                "requested {components} components but the data has rank {rank}"
            )));
        }

        let mut loadings = Vec::with_capacity(components * p);
        let mut eigenvalues = Vec::with_capacity(components);
        for &c in &order[..components] {
            let v = eig.eigenvectors.column(c);
            let mut pivot = 0;
            for j in 1..p {
                if v[j].abs() > v[pivot].abs() {
                    pivot = j;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            loadings.extend(v.iter().map(|x| sign * x));
            eigenvalues.push(eig.eigenvalues[c]);
        }
        Ok(Self {
            standardizer,
            loadings,
            eigenvalues,
            n_features: p,
        })
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Loadings of component `c`.
    pub fn component(&self, c: usize) -> &[f64] {
        &self.loadings[c * self.n_features..(c + 1) * self.n_features]
    }

    fn project_row_into(&self, row: &[f64], z: &mut Vec<f64>, out: &mut Vec<f64>) {
        z.clear();
        self.standardizer.transform_row_into(row, z);
        out.extend((0..self.n_components()).map(|c| {
            self.component(c).iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>()
        }));
    }

    /// Row-major `n x components` scores.
    pub fn project(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_features() != self.n_features {
            return Err(Error::InvalidMatrix(format!(
                "projection expects {} features, got {}",
                self.n_features,
                x.n_features()
            )));
        }
        let mut out = Vec::with_capacity(x.n_rows() * self.n_components());
        let mut z = Vec::with_capacity(self.n_features);
        for row in x.rows() {
            self.project_row_into(row, &mut z, &mut out);
        }
        Ok(out)
    }
}

/// PCA projection followed by k-nearest-neighbour regression in the
/// projected space.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaKnnRegressor {
    pca: Pca,
    index: NeighborIndex,
    targets: Vec<f64>,
    k: usize,
}

impl PcaKnnRegressor {
    pub fn fit(train: &FeatureMatrix, targets: &[f64], components: usize, k: usize) -> Result<Self> {
        let n = train.n_rows();
        if targets.len() != n {
            return Err(Error::Fit(format!("{} targets for {n} training rows", targets.len())));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Fit("targets must be finite".into()));
        }
        if k == 0 || k > n {
            return Err(Error::Fit(format!("k = {k} must be in 1..={n}")));
        }
        let pca = Pca::fit(train, components)?;
        let scores = pca.project(train)?;
        let index = NeighborIndex::new(
            scores,
            pca.n_components(),
            targets.to_vec(),
            train.as_slice().to_vec(),
            train.n_features(),
        );
        Ok(Self {
            pca,
            index,
            targets: targets.to_vec(),
            k,
        })
    }

    pub fn pca(&self) -> &Pca {
        &self.pca
    }
}

impl BlackBoxModel for PcaKnnRegressor {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        if x.n_features() != self.pca.n_features {
            return Err(Error::InvalidMatrix(format!(
                "model expects {} features, got {}",
                self.pca.n_features,
                x.n_features()
            )));
        }
        let mut z = Vec::new();
        let mut q = Vec::with_capacity(self.pca.n_components());
        let mut scratch = Vec::with_capacity(self.index.len());
        let mut out = Vec::with_capacity(x.n_rows());
        for row in x.rows() {
            q.clear();
            self.pca.project_row_into(row, &mut z, &mut q);
            let nn = self.index.nearest(&q, self.k, &mut scratch);
            out.push(nn.iter().map(|&i| self.targets[i]).sum::<f64>() / nn.len() as f64);
        }
        ModelOutput::scalars(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::KnnRegressor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_convention_and_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                let t: f64 = rng.gen_range(-3.0..3.0);
                [t, -t + rng.gen_range(-0.1..0.1), rng.gen_range(-1.0..1.0)]
            })
            .collect();
        let x = FeatureMatrix::from_rows_unnamed(&rows).unwrap();
        let pca = Pca::fit(&x, 3).unwrap();
        assert!(pca.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        for c in 0..3 {
            let v = pca.component(c);
            let pivot = v.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
            let norm: f64 = v.iter().map(|a| a * a).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rotation_matches_plain_knn() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<[f64; 3]> = (0..40)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] - 2.0 * r[1] + r[2]).collect();
        let x = FeatureMatrix::from_rows_unnamed(&rows).unwrap();
        let q_rows: Vec<[f64; 3]> = (0..20)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let q = FeatureMatrix::from_rows_unnamed(&q_rows).unwrap();
        let a = PcaKnnRegressor::fit(&x, &y, 3, 3).unwrap().predict(&q).unwrap();
        let b = KnnRegressor::fit(&x, &y, 3).unwrap().predict(&q).unwrap();
        let (ModelOutput::Scalars(a), ModelOutput::Scalars(b)) = (a, b) else { unreachable!() };
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn nearest_self_with_k1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 4]> = (0..15).map(|_| [0.0; 4].map(|_: f64| rng.gen_range(-1.0..1.0))).collect();
        let y: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let x = FeatureMatrix::from_rows_unnamed(&rows).unwrap();
        let m = PcaKnnRegressor::fit(&x, &y, 2, 1).unwrap();
        assert_eq!(m.predict(&x.select_rows(&[4]).unwrap()).unwrap(), ModelOutput::Scalars(vec![4.0]));
    }

    #[test]
    fn rank_and_range_errors() {
        // Two identical columns: rank 1 after standardization.
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, i as f64]).collect();
        let x = FeatureMatrix::from_rows_unnamed(&rows).unwrap();
        assert!(Pca::fit(&x, 1).is_ok());
        assert!(matches!(Pca::fit(&x, 2), Err(Error::Fit(_))));
        assert!(Pca::fit(&x, 0).is_err());
        let y = vec![0.0; 10];
        assert!(PcaKnnRegressor::fit(&x, &y, 1, 11).is_err());
        let small = FeatureMatrix::from_rows_unnamed(&[[1.0, 2.0], [3.0, 1.0]]).unwrap();
        assert!(Pca::fit(&small, 2).is_err());
    }
}
