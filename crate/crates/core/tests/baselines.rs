use cvbench_core::baselines::{const_acc_predict, cvm_predict, cvm_sampled_predict, LinRegModel};
use cvbench_core::features::Representation;
use cvbench_core::{MotionHistory, Position, HORIZON};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

fn history(rng: &mut ChaCha8Rng) -> MotionHistory {
    let mut p = Position::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let mut v = (rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
    let mut pts = Vec::new();
    for _ in 0..8 {
        pts.push(p);
        v.0 += rng.random_range(-0.05..0.05);
        v.1 += rng.random_range(-0.05..0.05);
        p = Position::new(p.x + v.0, p.y + v.1);
    }
    MotionHistory::new(pts).unwrap()
}

fn mse(model: &LinRegModel, x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (xr, yr) in x.iter().zip(y) {
        let p = model.predict_row(xr).unwrap();
        total += p.iter().zip(yr).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    total / (x.len() * y[0].len()) as f64
}

#[test]
#[allow(clippy::needless_range_loop)]
fn least_squares_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, d) = (300, 14);
    let x = random_rows(&mut rng, n, d);
    let y = random_rows(&mut rng, n, 24);
    let model = LinRegModel::fit(Representation::Relative, &x, &y).unwrap();
    assert!(!model.rank_deficient);

    // Oracle: solve (A^T A) w = A^T y by Cholesky, per output.
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i][j] } else { 1.0 });
    let ata = a.transpose() * &a;
    let chol = ata.cholesky().unwrap();
    for j in 0..24 {
        let yj = DVector::from_fn(n, |i, _| y[i][j]);
        let w = chol.solve(&(a.transpose() * yj));
        for i in 0..d {
            assert!((model.weights[j * d + i] - w[i]).abs() < 1e-9);
        }
        assert!((model.intercept[j] - w[d]).abs() < 1e-9);
    }
}

#[test]
fn realizable_targets_are_fit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_rows(&mut rng, 200, 16);
    let w: Vec<Vec<f64>> = random_rows(&mut rng, 24, 16);
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            w.iter()
                .enumerate()
                .map(|(j, wj)| wj.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() + j as f64)
                .collect()
        })
        .collect();
    let model = LinRegModel::fit(Representation::Absolute, &x, &y).unwrap();
    assert!(mse(&model, &x, &y) < 1e-20);
}

#[test]
fn perturbing_the_solution_never_lowers_training_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_rows(&mut rng, 120, 6);
    let y = random_rows(&mut rng, 120, 24);
    let model = LinRegModel::fit(Representation::Relative, &x, &y).unwrap();
    let base = mse(&model, &x, &y);
    for _ in 0..50 {
        let mut m = model.clone();
        let i = rng.random_range(0..m.weights.len());
        m.weights[i] += rng.random_range(-0.1..0.1);
        let j = rng.random_range(0..m.intercept.len());
        m.intercept[j] += rng.random_range(-0.1..0.1);
        assert!(mse(&m, &x, &y) >= base - 1e-15);
    }
}

#[test]
fn prediction_is_a_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_rows(&mut rng, 60, 5);
    let y = random_rows(&mut rng, 60, 24);
    let model = LinRegModel::fit(Representation::Relative, &x, &y).unwrap();
    let w = DMatrix::from_row_slice(24, 5, &model.weights);
    for r in x.iter().take(10) {
        let oracle = &w * DVector::from_column_slice(r) + DVector::from_column_slice(&model.intercept);
        for (a, b) in model.predict_row(r).unwrap().iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn regression_on_constant_velocity_data_recovers_the_cvm() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut hs = Vec::new();
    for _ in 0..400 {
        let v = (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
        let start = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let pts: Vec<Position> = (0..8)
            .map(|i| Position::new(start.0 + v.0 * i as f64, start.1 + v.1 * i as f64))
            .collect();
        x.push(
            pts.windows(2)
                .flat_map(|w| [w[1].x - w[0].x, w[1].y - w[0].y])
                .collect::<Vec<_>>(),
        );
        y.push((0..HORIZON).flat_map(|_| [v.0, v.1]).collect::<Vec<_>>());
        hs.push(MotionHistory::new(pts).unwrap());
    }
    let model = LinRegModel::fit(Representation::Relative, &x, &y).unwrap();
    for (xr, h) in x.iter().zip(&hs) {
        let cvm = cvm_predict(h, HORIZON).unwrap().flatten();
        for (a, b) in model.predict_row(xr).unwrap().iter().zip(&cvm) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn duplicated_feature_gives_minimum_norm_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = random_rows(&mut rng, 80, 1);
    let x: Vec<Vec<f64>> = base.iter().map(|r| vec![r[0], r[0]]).collect();
    let y: Vec<Vec<f64>> = base.iter().map(|r| vec![2.0 * r[0]; 24]).collect();
    let model = LinRegModel::fit(Representation::Relative, &x, &y).unwrap();
    assert!(model.rank_deficient);
    assert!((model.weights[0] - 1.0).abs() < 1e-9 && (model.weights[1] - 1.0).abs() < 1e-9);
}

#[test]
fn sampled_cvm_is_centered_on_the_cvm_and_keeps_speed() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = history(&mut rng);
    let base = cvm_predict(&h, HORIZON).unwrap().as_slice()[0];
    let samples = cvm_sampled_predict(&h, HORIZON, 10_000, 25.0, &mut rng).unwrap();
    let mut mean = 0.0;
    for s in &samples {
        let d = s.as_slice()[0];
        assert!((d.norm() - base.norm()).abs() < 1e-9);
        assert!(s.as_slice().iter().all(|e| e == &d));
        let rel = (d.dy * base.dx - d.dx * base.dy).atan2(d.dx * base.dx + d.dy * base.dy);
        mean += rel;
    }
    mean /= samples.len() as f64;
    assert!(mean.to_degrees().abs() < 1.0);
    let zero = cvm_sampled_predict(&h, HORIZON, 3, 0.0, &mut rng).unwrap();
    assert!(zero.iter().all(|s| s.as_slice()[0] == base));
}

#[test]
fn constant_acceleration_matches_quadratic_extrapolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (a, b, c) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.1..0.1),
        );
        let f = |t: f64| Position::new(a + b * t + c * t * t, b - a * t + 0.5 * c * t * t);
        let h = MotionHistory::new((0..8).map(|i| f(i as f64)).collect()).unwrap();
        let pred = const_acc_predict(&h, HORIZON).unwrap();
        let mut p = f(7.0);
        for (k, d) in pred.as_slice().iter().enumerate() {
            p = Position::new(p.x + d.dx, p.y + d.dy);
            assert!(p.distance(&f(8.0 + k as f64)) < 1e-9);
        }
    }
}
