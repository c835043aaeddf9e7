//! Cholesky prediction against a dense LU oracle, interpolation and prior
//! limits, variance bounds, information monotonicity and kernel PSD.

use cellguard::gpr::{
    covariance, kernel, DatasetKind, GpHyper, GpModel, GpSettings, UncertaintyDataset,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{fail, Check};

const PROBLEMS: usize = 50;
const TOL: f64 = 1e-8;

fn random_input(kind: DatasetKind, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![rng.random_range(-5.0..5.0), rng.random_range(3.0..4.2)];
    if kind == DatasetKind::Thermal {
        x.push(rng.random_range(290.0..320.0));
    }
    x
}

fn random_dataset(n: usize, kind: DatasetKind, rng: &mut ChaCha8Rng) -> UncertaintyDataset {
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| random_input(kind, rng)).collect();
    let labels = inputs
        .iter()
        .map(|x| 0.01 * (x[0] * 0.7).sin() + 0.02 * (x[1] - 3.6) + rng.random_range(-1e-3..1e-3))
        .collect();
    UncertaintyDataset {
        kind,
        inputs,
        labels,
        source_cycle: 0,
    }
}

/// Posterior mean and variance by LU solves on the jittered covariance.
fn dense_predict(gp: &GpModel, data: &UncertaintyDataset, q: &[f64]) -> Result<(f64, f64), String> {
    let h = gp.hyper();
    let xs: Vec<DVector<f64>> = data
        .inputs
        .iter()
        .map(|x| gp.standardize(x))
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    let qs = gp.standardize(q).map_err(fail)?;
    let ks = DVector::from_iterator(
        xs.len(),
        xs.iter()
            .map(|x| kernel(qs.as_slice(), x.as_slice(), h).expect("dimensions match")),
    );
    let mut k = covariance(&xs, h);
    for i in 0..k.nrows() {
        k[(i, i)] += h.jitter;
    }
    let lu = k.lu();
    let alpha = lu
        .solve(&DVector::from_column_slice(&data.labels))
        .ok_or("singular covariance")?;
    let w = lu.solve(&ks).ok_or("singular covariance")?;
    Ok((ks.dot(&alpha), h.sigma_p2 - ks.dot(&w)))
}

pub fn check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let mut worst_interp: f64 = 0.0;
    let mut worst_monotone: f64 = 0.0;
    let mut min_eig: f64 = f64::INFINITY;
    for trial in 0..PROBLEMS {
        let kind = if trial % 2 == 0 {
            DatasetKind::Voltage
        } else {
            DatasetKind::Thermal
        };
        let n = rng.random_range(1..=200);
        let data = random_dataset(n, kind, &mut rng);
        let hyper = GpSettings::default().hyper_for(&data);
        let gp = GpModel::fit(&data, &hyper, 200).map_err(fail)?;
        let h = gp.hyper().clone();
        let label_scale = data.labels.iter().fold(1e-300_f64, |a, y| a.max(y.abs()));

        for _ in 0..10 {
            let q = random_input(kind, &mut rng);
            let (m, v) = gp.predict(&q).map_err(fail)?;
            let (mo, vo) = dense_predict(&gp, &data, &q)?;
            worst_mean = worst_mean.max((m - mo).abs() / label_scale);
            worst_var = worst_var.max((v - vo.max(0.0)).abs() / h.sigma_p2);
            if !(v >= 0.0 && v <= h.sigma_p2 + h.jitter) {
                return Err(format!("variance {v} outside [0, sigma_p2 + jitter]"));
            }
        }

        // Exact interpolation identity y_i - mean(x_i) = jitter * alpha_i.
        for i in 0..n.min(10) {
            let m = gp.predict_mean(&data.inputs[i]).map_err(fail)?;
            let expected = h.jitter * gp.alpha()[i];
            let err = ((data.labels[i] - m) - expected).abs() / label_scale;
            worst_interp = worst_interp.max(err);
        }

        // Prior reversion 20 standardized units away from every input.
        let st = gp.standardization();
        let far: Vec<f64> = (0..kind.dim())
            .map(|d| {
                let top = data.inputs.iter().map(|x| x[d]).fold(f64::MIN, f64::max);
                top + 20.0 * st.scale[d] * h.length_scales[d]
            })
            .collect();
        let (m, v) = gp.predict(&far).map_err(fail)?;
        if m.abs() > 1e-12 * label_scale || (v - h.sigma_p2).abs() > 1e-4 * h.sigma_p2 {
            return Err(format!(
                "far query gave mean {m}, variance {v} (prior {})",
                h.sigma_p2
            ));
        }

        // Adding a point never increases the variance at a fixed query.
        let mut bigger = data.clone();
        bigger.inputs.push(random_input(kind, &mut rng));
        bigger.labels.push(0.0);
        let gp_big = GpModel::fit_standardized(&bigger, &h, st).map_err(fail)?;
        let gp_same = GpModel::fit_standardized(&data, &h, st).map_err(fail)?;
        for _ in 0..10 {
            let q = random_input(kind, &mut rng);
            let v0 = gp_same.predict(&q).map_err(fail)?.1;
            let v1 = gp_big.predict(&q).map_err(fail)?.1;
            worst_monotone = worst_monotone.max((v1 - v0) / h.sigma_p2);
        }

        let xs: Vec<DVector<f64>> = data
            .inputs
            .iter()
            .map(|x| gp.standardize(x))
            .collect::<Result<_, _>>()
            .map_err(fail)?;
        let k: DMatrix<f64> = covariance(&xs, &h);
        let e = SymmetricEigen::new(k).eigenvalues.min() / h.sigma_p2;
        min_eig = min_eig.min(e);
    }

    // Single training point.
    let one = UncertaintyDataset {
        kind: DatasetKind::Voltage,
        inputs: vec![vec![1.0, 3.7]],
        labels: vec![0.25],
        source_cycle: 0,
    };
    let hyper = GpHyper {
        sigma_p2: 1.0,
        length_scales: vec![1.0, 1.0],
        jitter: 1e-6,
    };
    let gp = GpModel::fit(&one, &hyper, 10).map_err(fail)?;
    let (m, v) = gp.predict(&[1.0, 3.7]).map_err(fail)?;
    if (m - 0.25).abs() > 1e-6 * 0.25 || v > 2e-6 {
        return Err(format!("single point predicts ({m}, {v})"));
    }

    if worst_mean > TOL || worst_var > TOL {
        return Err(format!(
            "Cholesky vs dense: mean {worst_mean:e}, variance {worst_var:e} (relative)"
        ));
    }
    if worst_interp > 1e-9 {
        return Err(format!("interpolation identity off by {worst_interp:e}"));
    }
    if worst_monotone > 1e-10 {
        return Err(format!(
            "variance grew by {worst_monotone:e} after adding a point"
        ));
    }
    if min_eig < -1e-10 {
        return Err(format!("kernel matrix eigenvalue {min_eig:e} (relative)"));
    }
    Ok(format!(
        "{PROBLEMS} problems, Cholesky vs dense: mean {worst_mean:.1e}, variance {worst_var:.1e}; \
         interpolation {worst_interp:.1e}; variance growth {worst_monotone:.1e}; min eigenvalue {min_eig:.1e}"
    ))
}
