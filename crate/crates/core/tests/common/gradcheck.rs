//! Analytic gradients against central finite differences (h = 1e-5).

use rand::Rng as _;
use tactile_surface::nn::{binary_cross_entropy, softmax_cross_entropy, Layer, LayerSpec, Network, Tensor};
use tactile_surface::rng::seeded;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

pub fn random_tensor(shape: Vec<usize>, rng: &mut tactile_surface::rng::Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

/// Scalar probe `sum(w * net(x))` with fixed random weights `w`.
pub fn probe(net: &Network, x: &Tensor, w: &[f64]) -> f64 {
    net.forward(x).unwrap().data().iter().zip(w).map(|(a, b)| a * b).sum()
}

pub fn check_network(specs: Vec<LayerSpec>, in_shape: Vec<usize>, seed: u64) -> f64 {
    let mut rng = seeded(seed.wrapping_mul(31).wrapping_add(7));
    let mut net = Network::from_specs(&specs, seed).unwrap();
    // randomize norm gains/shifts so they are exercised away from identity
    for p in net.params_mut() {
        if p.shape().len() == 1 {
            for v in p.data_mut() {
                *v += rng.random_range(-0.5..0.5);
            }
        }
    }
    let x = random_tensor(in_shape, &mut rng);
    let out_len = net.forward(&x).unwrap().len();
    let w: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();

    net.zero_grad();
    let acts = net.forward_train(&x).unwrap();
    let g_out = Tensor::new(acts.output.shape().to_vec(), w.clone()).unwrap();
    let dx = net.backward(&acts, &g_out).unwrap();

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let mut xm = x.clone();
        xm.data_mut()[i] -= H;
        let num = (probe(&net, &xp, &w) - probe(&net, &xm, &w)) / (2.0 * H);
        worst = worst.max(rel_err(dx.data()[i], num));
    }

    let analytic: Vec<Vec<f64>> = net
        .named_params()
        .iter()
        .map(|(_, t)| t.grad().unwrap().to_vec())
        .collect();
    for (pi, grads) in analytic.iter().enumerate() {
        for j in 0..grads.len() {
            let mut plus = net.clone();
            plus.params_mut()[pi].data_mut()[j] += H;
            let mut minus = net.clone();
            minus.params_mut()[pi].data_mut()[j] -= H;
            let num = (probe(&plus, &x, &w) - probe(&minus, &x, &w)) / (2.0 * H);
            worst = worst.max(rel_err(grads[j], num));
        }
    }
    worst
}

pub fn layer_cases(rng: &mut tactile_surface::rng::Rng) -> Vec<(&'static str, Vec<LayerSpec>, Vec<usize>)> {
    let b = rng.random_range(1..4);
    let i = rng.random_range(2..7);
    let o = rng.random_range(1..6);
    let c = rng.random_range(1..3);
    let oc = rng.random_range(1..4);
    let h = rng.random_range(3..6);
    let w = rng.random_range(3..6);
    vec![
        ("affine", vec![LayerSpec::Affine { inputs: i, outputs: o }], vec![b, i]),
        (
            "conv2d",
            vec![LayerSpec::Conv2d { in_channels: c, out_channels: oc, kernel: 3 }],
            vec![b, c, h, w],
        ),
        ("gelu", vec![LayerSpec::Gelu], vec![b, i]),
        ("layer_norm", vec![LayerSpec::LayerNorm { dim: i }], vec![b, i]),
        (
            "flatten",
            vec![LayerSpec::Flatten, LayerSpec::Affine { inputs: c * h * w, outputs: o }],
            vec![b, c, h, w],
        ),
        ("mean_pool", vec![LayerSpec::MeanPool], vec![b, c, h, w]),
        ("avg_pool", vec![LayerSpec::AvgPool2d { size: 2 }], vec![b, c, 2 * h, 2 * w]),
        ("upsample", vec![LayerSpec::Upsample2d { size: 2 }], vec![b, c, h, w]),
        (
            "stack",
            vec![
                LayerSpec::Conv2d { in_channels: c, out_channels: oc, kernel: 3 },
                LayerSpec::Gelu,
                LayerSpec::MeanPool,
                LayerSpec::Affine { inputs: oc, outputs: i },
                LayerSpec::LayerNorm { dim: i },
                LayerSpec::Gelu,
            ],
            vec![b, c, h, w],
        ),
    ]
}

pub fn cross_entropy_worst(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let n = rng.random_range(1..5);
    let logits = random_tensor(vec![n, 4], &mut rng);
    let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
    let out = softmax_cross_entropy(&logits, &targets).unwrap();
    assert!(out.value >= 0.0);
    let mut worst: f64 = 0.0;
    for i in 0..logits.len() {
        let mut p = logits.clone();
        p.data_mut()[i] += H;
        let mut m = logits.clone();
        m.data_mut()[i] -= H;
        let num = (softmax_cross_entropy(&p, &targets).unwrap().value
            - softmax_cross_entropy(&m, &targets).unwrap().value)
            / (2.0 * H);
        worst = worst.max(rel_err(out.grad.data()[i], num));
    }
    worst
}

pub fn binary_cross_entropy_worst(seed: u64) -> f64 {
    let mut rng = seeded(500 + seed);
    let n = rng.random_range(1..6);
    let logits = random_tensor(vec![n, 1], &mut rng);
    let labels: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
    let out = binary_cross_entropy(&logits, &labels).unwrap();
    assert!(out.value >= 0.0);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut p = logits.clone();
        p.data_mut()[i] += H;
        let mut m = logits.clone();
        m.data_mut()[i] -= H;
        let num = (binary_cross_entropy(&p, &labels).unwrap().value
            - binary_cross_entropy(&m, &labels).unwrap().value)
            / (2.0 * H);
        worst = worst.max(rel_err(out.grad.data()[i], num));
    }
    worst
}

/// The reversal layer deliberately disagrees with finite differences of its
/// forward pass: its backward must equal `-alpha` times them.
pub fn reversal_worst(seed: u64) -> f64 {
    let mut rng = seeded(77 + seed);
    let alpha = rng.random_range(0.0..3.0);
    let specs = vec![
        LayerSpec::Affine { inputs: 3, outputs: 4 },
        LayerSpec::GradientReversal { alpha },
        LayerSpec::Gelu,
    ];
    let mut net = Network::from_specs(&specs, seed).unwrap();
    let x = random_tensor(vec![2, 3], &mut rng);
    let w: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.zero_grad();
    let acts = net.forward_train(&x).unwrap();
    let dx = net.backward(&acts, &Tensor::new(vec![2, 4], w.clone()).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let mut xm = x.clone();
        xm.data_mut()[i] -= H;
        let num = (probe(&net, &xp, &w) - probe(&net, &xm, &w)) / (2.0 * H);
        worst = worst.max(rel_err(dx.data()[i], -alpha * num));
    }
    worst
}

/// Identity forward and exactly `-alpha * g` backward, no tolerance.
pub fn reversal_is_exact(seed: u64) -> bool {
    let mut rng = seeded(9 + seed);
    let alpha = rng.random_range(0.0..3.0);
    let mut net = Network::from_specs(&[LayerSpec::GradientReversal { alpha }], 0).unwrap();
    let x = random_tensor(vec![3, 4], &mut rng);
    let g = random_tensor(vec![3, 4], &mut rng);
    let acts = net.forward_train(&x).unwrap();
    let dx = net.backward(&acts, &g).unwrap();
    matches!(net.layers()[0], Layer::GradientReversal(_))
        && acts.output == x
        && dx.data().iter().zip(g.data()).all(|(d, u)| *d == -alpha * u)
}
