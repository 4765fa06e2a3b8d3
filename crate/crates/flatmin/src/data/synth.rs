//! Synthetic Gaussian classification data: class means on a sphere of the
//! given radius, unit-variance isotropic clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Draw disjoint train/test datasets. `separation` is the radius of the
/// sphere the class means sit on; 0 collapses every class onto the origin.
pub fn synth_gaussian(
    m_train: usize,
    m_test: usize,
    d: usize,
    k: usize,
    separation: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {k}")));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Domain(format!("separation must be >= 0, got {separation}")));
    }
    if m_train == 0 || m_test == 0 || d == 0 {
        return Err(Error::Domain("empty synthetic dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut means = Vec::with_capacity(k);
    for _ in 0..k {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = crate::numeric::l2_norm(&dir);
        if norm < 1e-12 {
            dir[0] = 1.0;
        } else {
            for v in &mut dir {
                *v /= norm;
            }
        }
        for v in &mut dir {
            *v *= separation;
        }
        means.push(dir);
    }

    let draw = |m: usize, rng: &mut ChaCha8Rng| -> Result<Dataset> {
        let mut features = Vec::with_capacity(m * d);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let label = rng.random_range(0..k as u32);
            let mean = &means[label as usize];
            for &mu in mean.iter() {
                let noise: f64 = rng.sample(StandardNormal);
                features.push(mu + noise);
            }
            labels.push(label);
        }
        Dataset::new(m, d, features, labels, k)
    };

    // Train rows are drawn first, test rows continue the same stream, so the
    // two sets are disjoint draws by construction.
    let train = draw(m_train, &mut rng)?;
    let test = draw(m_test, &mut rng)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let (a_tr, a_te) = synth_gaussian(20, 10, 4, 3, 2.0, 42).unwrap();
        let (b_tr, b_te) = synth_gaussian(20, 10, 4, 3, 2.0, 42).unwrap();
        assert_eq!(a_tr.features(), b_tr.features());
        assert_eq!(a_te.labels(), b_te.labels());
        let (c_tr, _) = synth_gaussian(20, 10, 4, 3, 2.0, 43).unwrap();
        assert_ne!(a_tr.features(), c_tr.features());
    }

    #[test]
    fn means_sit_on_separation_sphere() {
        // With huge separation, every draw for a class sits near its mean, so
        // row norms concentrate around `separation`.
        let sep = 100.0;
        let (train, _) = synth_gaussian(50, 10, 6, 4, sep, 7).unwrap();
        for i in 0..train.len() {
            let norm = crate::numeric::l2_norm(train.feature_row(i));
            assert!((norm - sep).abs() < 10.0, "row norm {norm}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synth_gaussian(10, 10, 3, 1, 1.0, 0).is_err());
        assert!(synth_gaussian(10, 10, 3, 2, -1.0, 0).is_err());
    }
}
