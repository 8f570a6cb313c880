use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Iterates projected onto their leading principal directions.
#[derive(Debug, Clone)]
pub struct Projection {
    /// One row of coordinates per iterate.
    pub coords: Vec<Vec<f64>>,
    /// Unit principal directions, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Variance of the cloud along each direction.
    pub explained_variance: Vec<f64>,
    /// Set when fewer directions than requested carry variance.
    pub warning: Option<String>,
}

/// Centers the cloud and projects onto the top `n_components` eigenvectors
/// of its covariance. Directions with negligible variance are dropped.
pub fn pca_projection(iterates: &[Vec<f64>], n_components: usize) -> Result<Projection> {
    let k = iterates.len();
    if k == 0 {
        return Err(Error::NoSamples);
    }
    let d = iterates[0].len();
    if d < 2 {
        return Err(Error::Precondition("projection needs dimension at least 2".into()));
    }
    if let Some(bad) = iterates.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
    }
    if n_components == 0 || n_components > d {
        return Err(Error::invalid(format!("component count must lie in [1, {d}]")));
    }
    let mut mean = vec![0.0; d];
    for x in iterates {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / k as f64;
        }
    }
    let centered = DMatrix::from_fn(k, d, |i, j| iterates[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / k as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = 1e-12 * top.max(f64::MIN_POSITIVE);
    let kept: Vec<usize> =
        order.into_iter().take(n_components).take_while(|&j| eig.eigenvalues[j] > floor).collect();
    let warning = (kept.len() < n_components).then(|| {
        format!("iterate cloud has rank {} < {n_components}; returning fewer components", kept.len())
    });
    let components: Vec<Vec<f64>> = kept.iter().map(|&j| eig.eigenvectors.column(j).iter().copied().collect()).collect();
    let coords = (0..k)
        .map(|i| components.iter().map(|c| (0..d).map(|j| centered[(i, j)] * c[j]).sum()).collect())
        .collect();
    Ok(Projection {
        coords,
        explained_variance: kept.iter().map(|&j| eig.eigenvalues[j]).collect(),
        components,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_in_3d_is_rank_one() {
        let pts: Vec<Vec<f64>> = (0..20).map(|t| vec![t as f64, 2.0 * t as f64, -(t as f64)]).collect();
        let p = pca_projection(&pts, 2).unwrap();
        assert_eq!(p.components.len(), 1);
        assert!(p.warning.is_some());
    }

    #[test]
    fn planar_cloud_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)]).collect();
        let p = pca_projection(&pts, 2).unwrap();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                let orig = (pts[a][0] - pts[b][0]).powi(2) + (pts[a][1] - pts[b][1]).powi(2);
                let proj = (p.coords[a][0] - p.coords[b][0]).powi(2) + (p.coords[a][1] - p.coords[b][1]).powi(2);
                assert!((orig - proj).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn beats_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 5;
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect())
            .collect();
        let p = pca_projection(&pts, 2).unwrap();
        let captured = |coords: &Vec<Vec<f64>>| coords.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
        let best = captured(&p.coords);
        let mean: Vec<f64> = (0..d).map(|j| pts.iter().map(|x| x[j]).sum::<f64>() / pts.len() as f64).collect();
        for _ in 0..100 {
            let m = DMatrix::from_fn(d, 2, |_, _| rng.random_range(-1.0..1.0));
            let q = m.qr().q();
            let coords: Vec<Vec<f64>> = pts
                .iter()
                .map(|x| (0..2).map(|c| (0..d).map(|j| (x[j] - mean[j]) * q[(j, c)]).sum()).collect())
                .collect();
            assert!(captured(&coords) <= best + 1e-9);
        }
    }

    #[test]
    fn rejects_one_dimension() {
        assert!(pca_projection(&[vec![1.0], vec![2.0]], 1).is_err());
    }
}
