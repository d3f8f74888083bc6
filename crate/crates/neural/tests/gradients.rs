//! Reverse-mode gradients against central finite differences, and forward
//! passes against a straight-line re-implementation of the layer arithmetic.

use cvbench_neural::{Architecture, Network, Tensor, OUTPUT_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

fn mse(net: &Network, x: &Tensor, y: &Tensor) -> f64 {
    let out = net.forward(x).unwrap();
    let n = out.len() as f64;
    out.data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Max relative error over all parameter and input coordinates.
fn max_gradient_error(net: &Network, x: &Tensor, y: &Tensor) -> f64 {
    let pass = net.backward(x, y).unwrap();
    let mut worst = 0.0f64;

    for (pi, grad) in pass.params.iter().enumerate() {
        for k in 0..grad.len() {
            let mut plus = net.clone();
            plus.params_mut()[pi].value.data_mut()[k] += STEP;
            let mut minus = net.clone();
            minus.params_mut()[pi].value.data_mut()[k] -= STEP;
            let numeric = (mse(&plus, x, y) - mse(&minus, x, y)) / (2.0 * STEP);
            worst = worst.max(relative_error(grad.data()[k], numeric));
        }
    }
    for k in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[k] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[k] -= STEP;
        let numeric = (mse(net, &xp, y) - mse(net, &xm, y)) / (2.0 * STEP);
        worst = worst.max(relative_error(pass.input.data()[k], numeric));
    }
    worst
}

fn small_architecture(rng: &mut ChaCha8Rng, i: usize) -> Architecture {
    if i.is_multiple_of(2) {
        Architecture::FeedForward {
            input_dim: rng.random_range(2..5),
            hidden: vec![rng.random_range(1..4), rng.random_range(1..3)],
        }
    } else {
        Architecture::RecurrentEncoder {
            steps: rng.random_range(1..4),
            extra_dim: rng.random_range(0..2),
            embed: 2,
            state: 2,
            decoder_hidden: 2,
        }
    }
}

#[test]
fn analytic_gradients_match_finite_differences_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let arch = small_architecture(&mut rng, i);
        let net = Network::new(arch, &mut rng);
        assert!(net.num_parameters() <= 200, "{}", net.num_parameters());
        let x = random_tensor(&mut rng, 3, net.input_dim());
        let y = random_tensor(&mut rng, 3, OUTPUT_DIM);
        worst = worst.max(max_gradient_error(&net, &x, &y));
    }
    assert!(worst < 1e-5, "max relative error {worst:e}");
}

#[test]
fn linear_network_input_gradient_is_weight_transpose_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Network::new(
        Architecture::FeedForward {
            input_dim: 4,
            hidden: vec![],
        },
        &mut rng,
    );
    let x = random_tensor(&mut rng, 2, 4);
    let y = random_tensor(&mut rng, 2, OUTPUT_DIM);
    let pass = net.backward(&x, &y).unwrap();
    let w = net.param("layer0.weight").unwrap();
    let scale = 2.0 / (2 * OUTPUT_DIM) as f64;
    for r in 0..2 {
        for i in 0..4 {
            let expected: f64 = (0..OUTPUT_DIM)
                .map(|j| scale * (pass.output.get(r, j) - y.get(r, j)) * w.get(i, j))
                .sum();
            assert!((pass.input.get(r, i) - expected).abs() < 1e-14);
        }
    }
}

#[test]
fn zero_loss_point_has_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for arch in [Architecture::feed_forward(14), Architecture::recurrent_encoder(7, 0)] {
        let net = Network::new(arch, &mut rng);
        let x = random_tensor(&mut rng, 4, net.input_dim());
        let y = net.forward(&x).unwrap();
        let pass = net.backward(&x, &y).unwrap();
        assert_eq!(pass.loss, 0.0);
        assert!(pass.params.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
        assert!(pass.input.data().iter().all(|&v| v == 0.0));
    }
}

fn dense(input: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    (0..w.cols())
        .map(|j| b.get(0, j) + (0..w.rows()).map(|i| input[i] * w.get(i, j)).sum::<f64>())
        .collect()
}

fn straight_line_ff(net: &Network, input: &[f64]) -> Vec<f64> {
    let l0 = dense(
        input,
        net.param("layer0.weight").unwrap(),
        net.param("layer0.bias").unwrap(),
    );
    let a0: Vec<f64> = l0.into_iter().map(|v| v.max(0.0)).collect();
    let l1 = dense(
        &a0,
        net.param("layer1.weight").unwrap(),
        net.param("layer1.bias").unwrap(),
    );
    let a1: Vec<f64> = l1.into_iter().map(|v| v.max(0.0)).collect();
    dense(
        &a1,
        net.param("layer2.weight").unwrap(),
        net.param("layer2.bias").unwrap(),
    )
}

fn straight_line_red(net: &Network, input: &[f64], steps: usize) -> Vec<f64> {
    let p = |n: &str| net.param(n).unwrap();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let state = p("gate.bias").cols();
    let mut h = vec![0.0; state];
    for s in 0..steps {
        let e = dense(&input[2 * s..2 * s + 2], p("embed.weight"), p("embed.bias"));
        let fe = dense(&e, p("gate.input"), p("gate.bias"));
        let fh = dense(&h, p("gate.recurrent"), &Tensor::zeros(1, state));
        let f: Vec<f64> = fe.iter().zip(&fh).map(|(a, b)| sig(a + b)).collect();
        let gated: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a * b).collect();
        let ce = dense(&e, p("cand.input"), p("cand.bias"));
        let ch = dense(&gated, p("cand.recurrent"), &Tensor::zeros(1, state));
        let c: Vec<f64> = ce.iter().zip(&ch).map(|(a, b)| (a + b).tanh()).collect();
        h = (0..state).map(|k| (1.0 - f[k]) * h[k] + f[k] * c[k]).collect();
    }
    let mut dec_in = h;
    dec_in.extend_from_slice(&input[2 * steps..]);
    let z: Vec<f64> = dense(&dec_in, p("decoder0.weight"), p("decoder0.bias"))
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    dense(&z, p("decoder1.weight"), p("decoder1.bias"))
}

#[test]
fn forward_matches_straight_line_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ff = Network::new(Architecture::feed_forward(14), &mut rng);
    let red = Network::new(Architecture::recurrent_encoder(7, 6), &mut rng);
    for _ in 0..5 {
        let x = random_tensor(&mut rng, 1, 14);
        let got = ff.forward(&x).unwrap();
        for (a, b) in got.data().iter().zip(straight_line_ff(&ff, x.data())) {
            assert!((a - b).abs() < 1e-12);
        }
        let x = random_tensor(&mut rng, 1, 20);
        let got = red.forward(&x).unwrap();
        for (a, b) in got.data().iter().zip(straight_line_red(&red, x.data(), 7)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn abs_sum_input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let net = Network::new(Architecture::feed_forward(14), &mut rng);
    let x = random_tensor(&mut rng, 2, 14);
    let grad = net.abs_sum_input_gradient(&x).unwrap();
    let f = |x: &Tensor| net.forward(x).unwrap().data().iter().map(|v| v.abs()).sum::<f64>();
    for k in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[k] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[k] -= STEP;
        let numeric = (f(&xp) - f(&xm)) / (2.0 * STEP);
        assert!(relative_error(grad.data()[k], numeric) < 1e-4);
    }
}
