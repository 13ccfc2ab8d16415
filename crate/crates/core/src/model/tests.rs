#![allow(clippy::needless_range_loop)]

use super::*;
use crate::nn::{finite_difference_grad, Activation, DenseLayer, RngStream};

fn small_config(conditioning: Conditioning, activation: SynthActivation) -> ModelConfig {
    ModelConfig {
        input_dim: 2,
        output_dim: 2,
        latent_dim: 3,
        hidden_layers: 2,
        width: 5,
        omega0: 30.0,
        conditioning,
        activation,
        ..ModelConfig::new(2, 2)
    }
}

fn randomize_biases(p: &mut ModelParams<f64>, rng: &mut RngStream) {
    for t in p.tensors_mut().into_iter().skip(1).step_by(2) {
        for v in t.iter_mut() {
            *v = rng.uniform(-0.5, 0.5);
        }
    }
}

fn random_vec(rng: &mut RngStream, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-scale, scale)).collect()
}

fn layer(w: Vec<f64>, b: Vec<f64>, in_dim: usize, act: Activation) -> DenseLayer<f64> {
    DenseLayer::from_parts(w, b, in_dim, act).unwrap()
}

/// Straight-line reimplementation used as an independent oracle.
fn oracle_forward(p: &ModelParams<f64>, x: &[f64], z: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let cfg = p.config();
    let affine = |l: &DenseLayer<f64>, v: &[f64]| -> Vec<f64> {
        let mut out = Vec::new();
        for r in 0..l.out_dim() {
            let mut acc = l.bias()[r];
            for c in 0..l.in_dim() {
                acc += l.weights()[r * l.in_dim() + c] * v[c];
            }
            out.push(acc);
        }
        out
    };
    let mut alphas = Vec::new();
    if cfg.conditioning == Conditioning::Modulated {
        let ml = p.modulator_layers();
        let mut h: Vec<f64> = affine(&ml[0], z).into_iter().map(|v| v.max(0.0)).collect();
        for l in &ml[1..] {
            let mut cat = h.clone();
            cat.extend_from_slice(z);
            h = affine(l, &cat).into_iter().map(|v| v.max(0.0)).collect();
            alphas.push(h.clone());
        }
    }
    let mut h: Vec<f64> = x.to_vec();
    if let InputEncoding::FourierFeatures { feature_count, .. } = cfg.input_encoding {
        let b = p.fourier_matrix().unwrap();
        let proj: Vec<f64> = (0..feature_count)
            .map(|f| (0..x.len()).map(|j| b[f * x.len() + j] * x[j]).sum::<f64>() * std::f64::consts::TAU)
            .collect();
        h = proj
            .iter()
            .map(|v| v.cos())
            .chain(proj.iter().map(|v| v.sin()))
            .collect();
    }
    if cfg.conditioning == Conditioning::Concat {
        h.extend_from_slice(z);
    }
    for (i, l) in p.synth_layers().iter().enumerate() {
        let pre = affine(l, &h);
        h = pre
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let s = match cfg.activation {
                    SynthActivation::Sine => v.sin(),
                    SynthActivation::Relu => v.max(0.0),
                };
                if alphas.is_empty() {
                    s
                } else {
                    s * alphas[i][j]
                }
            })
            .collect();
    }
    (alphas, affine(p.output_layer(), &h))
}

#[test]
fn modulator_zero_latent_zero_bias_gives_zero_alphas() {
    let cfg = small_config(Conditioning::Modulated, SynthActivation::Sine);
    let p: ModelParams<f64> = ModelParams::init(cfg, &mut RngStream::new(1)).unwrap();
    let m = modulator_forward(&p, &[0.0; 3]).unwrap();
    assert_eq!(m.alphas.len(), 2);
    assert!(m.alphas.iter().flatten().all(|a| *a == 0.0));
}

#[test]
fn init_knobs_set_biases_and_hidden_bounds() {
    let base = small_config(Conditioning::Modulated, SynthActivation::Sine);
    let cfg = ModelConfig {
        modulator_bias: 1.0,
        width: 40,
        ..base
    };
    let p: ModelParams<f64> = ModelParams::init(cfg, &mut RngStream::new(2)).unwrap();
    assert!(p.modulator_layers().iter().all(|l| l.bias().iter().all(|b| *b == 1.0)));

    let max_abs = |c: ModelConfig| {
        let p: ModelParams<f64> = ModelParams::init(c, &mut RngStream::new(3)).unwrap();
        p.synth_layers()[1].weights().iter().fold(0.0f64, |a, w| a.max(w.abs()))
    };
    let bound = (6.0f64 / 40.0).sqrt();
    assert!(max_abs(cfg) <= bound / 30.0 && max_abs(cfg) > 0.8 * bound / 30.0);
    let unscaled = ModelConfig {
        hidden_init_omega: Some(1.0),
        ..cfg
    };
    assert!(max_abs(unscaled) <= bound && max_abs(unscaled) > 0.8 * bound);
    assert!(ModelConfig {
        hidden_init_omega: Some(0.0),
        ..cfg
    }
    .validate()
    .is_err());
    assert!(ModelConfig {
        modulator_bias: f64::NAN,
        ..cfg
    }
    .validate()
    .is_err());
}

#[test]
fn modulator_hand_arithmetic() {
    let cfg = ModelConfig {
        input_dim: 1,
        output_dim: 1,
        latent_dim: 1,
        hidden_layers: 1,
        width: 1,
        ..ModelConfig::new(1, 1)
    };
    let p = ModelParams::from_layers(
        cfg,
        vec![layer(vec![1.0], vec![1.0], 1, Activation::Sine)],
        vec![
            layer(vec![1.0], vec![1.0], 1, Activation::Relu),
            layer(vec![1.0, 1.0], vec![1.0], 2, Activation::Relu),
        ],
        layer(vec![1.0], vec![1.0], 1, Activation::Identity),
        None,
    )
    .unwrap();
    let m = modulator_forward(&p, &[1.0]).unwrap();
    assert_eq!(m.stem, vec![2.0]);
    assert_eq!(m.alphas, vec![vec![4.0]]);
}

#[test]
fn forward_matches_straight_line_oracle() {
    let mut rng = RngStream::new(77);
    for (cond, act) in [
        (Conditioning::Modulated, SynthActivation::Sine),
        (Conditioning::Concat, SynthActivation::Sine),
        (Conditioning::None, SynthActivation::Sine),
        (Conditioning::Concat, SynthActivation::Relu),
    ] {
        let mut p: ModelParams<f64> = ModelParams::init(small_config(cond, act), &mut rng).unwrap();
        randomize_biases(&mut p, &mut rng);
        for _ in 0..10 {
            let x = random_vec(&mut rng, 2, 1.0);
            let z = random_vec(&mut rng, 3, 1.0);
            let (alphas, want) = oracle_forward(&p, &x, &z);
            if cond == Conditioning::Modulated {
                let m = modulator_forward(&p, &z).unwrap();
                for (a, b) in m.alphas.iter().flatten().zip(alphas.iter().flatten()) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
            let got = model_forward(&p, &x, &z).unwrap();
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-6, "{cond:?}: {a} vs {b}");
            }
        }
    }
}

fn unmodulated_twin(p: &ModelParams<f64>) -> ModelParams<f64> {
    let mut cfg = *p.config();
    cfg.conditioning = Conditioning::None;
    ModelParams::from_layers(
        cfg,
        p.synth_layers().to_vec(),
        Vec::new(),
        p.output_layer().clone(),
        None,
    )
    .unwrap()
}

#[test]
fn unit_alphas_reduce_to_plain_sine_network() {
    let mut rng = RngStream::new(3);
    let p: ModelParams<f64> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    let plain = unmodulated_twin(&p);
    let ones = vec![vec![1.0; 5]; 2];
    for _ in 0..20 {
        let x = random_vec(&mut rng, 2, 1.0);
        let a = synthesizer_forward(&p, &x, Some(&ones)).unwrap().output;
        let b = model_forward(&plain, &x, &[]).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn zero_alpha_annihilates_single_layer() {
    let mut rng = RngStream::new(4);
    let mut cfg = small_config(Conditioning::Modulated, SynthActivation::Sine);
    cfg.hidden_layers = 1;
    let mut p: ModelParams<f64> = ModelParams::init(cfg, &mut rng).unwrap();
    randomize_biases(&mut p, &mut rng);
    let y = synthesizer_forward(&p, &[0.3, 0.6], Some(&[vec![0.0; 5]]))
        .unwrap()
        .output;
    assert_eq!(y, p.output_layer().bias().to_vec());
}

#[test]
fn zero_latent_gives_output_bias() {
    let mut rng = RngStream::new(5);
    let mut p: ModelParams<f64> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    for v in p.output_layer_mut().bias_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }
    let y = model_forward(&p, &[0.1, 0.9], &[0.0; 3]).unwrap();
    assert_eq!(y, p.output_layer().bias().to_vec());
}

#[test]
fn missing_alphas_and_bad_dims_are_errors() {
    let p: ModelParams<f64> = ModelParams::init(
        small_config(Conditioning::Modulated, SynthActivation::Sine),
        &mut RngStream::new(1),
    )
    .unwrap();
    assert!(synthesizer_forward(&p, &[0.0, 0.0], None).is_err());
    assert!(model_forward(&p, &[0.0], &[0.0; 3]).is_err());
    assert!(model_forward(&p, &[0.0, 0.0], &[0.0; 2]).is_err());
    let plain: ModelParams<f64> = ModelParams::init(
        small_config(Conditioning::None, SynthActivation::Sine),
        &mut RngStream::new(1),
    )
    .unwrap();
    assert!(modulator_forward(&plain, &[0.0; 3]).is_err());
}

#[test]
fn concat_with_zero_latent_block_ignores_latent() {
    let mut rng = RngStream::new(6);
    let mut p: ModelParams<f64> =
        ModelParams::init(small_config(Conditioning::Concat, SynthActivation::Sine), &mut rng).unwrap();
    let in_dim = p.synth_layers()[0].in_dim();
    let w = p.synth_layers_mut()[0].weights_mut();
    for r in 0..5 {
        for c in 2..in_dim {
            w[r * in_dim + c] = 0.0;
        }
    }
    let x = [0.25, 0.75];
    let a = model_forward(&p, &x, &[1.0, -2.0, 3.0]).unwrap();
    let b = model_forward(&p, &x, &[-0.5, 0.1, 0.0]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn forward_is_deterministic() {
    for cond in [Conditioning::Modulated, Conditioning::Concat, Conditioning::None] {
        let p: ModelParams<f32> =
            ModelParams::init(small_config(cond, SynthActivation::Sine), &mut RngStream::new(9)).unwrap();
        let a = model_forward(&p, &[0.3, 0.2], &[0.1, 0.2, 0.3]).unwrap();
        let b = model_forward(&p, &[0.3, 0.2], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = RngStream::new(10);
    let mut p: ModelParams<f64> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    randomize_biases(&mut p, &mut rng);
    let tape = model_forward_taped(&p, &[0.2, 0.4], &[0.3, -0.2, 0.5]).unwrap();
    let (g, dz) = model_backward(&p, &tape, &[0.0, 0.0]).unwrap();
    assert!(g.is_zero());
    assert!(dz.iter().all(|v| *v == 0.0));
}

#[test]
fn stale_tape_is_rejected() {
    let mut rng = RngStream::new(11);
    let p: ModelParams<f64> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    let mut cfg = small_config(Conditioning::Modulated, SynthActivation::Sine);
    cfg.hidden_layers = 3;
    let other: ModelParams<f64> = ModelParams::init(cfg, &mut rng).unwrap();
    let tape = model_forward_taped(&other, &[0.2, 0.4], &[0.3, -0.2, 0.5]).unwrap();
    assert!(model_backward(&p, &tape, &[1.0, 1.0]).is_err());
    let tape = model_forward_taped(&p, &[0.2, 0.4], &[0.3, -0.2, 0.5]).unwrap();
    assert!(model_backward(&p, &tape, &[1.0]).is_err());
}

/// K = 1, width = 1, d = 1, n = m = 1 with loss `y^2`, differentiated by hand:
///
/// ```text
/// u0 = p z + q,  g = relu(u0),  u1 = r g + s z + t,  alpha = relu(u1)
/// v  = a x + c,  h = alpha sin v,  y = e h + f
/// dy = 2y, de = dy h, df = dy, dalpha = dy e sin v,
/// da = dy e alpha cos v x, dc = dy e alpha cos v,
/// dr = dalpha g, ds = dalpha z, dt = dalpha, dp = dalpha r z, dq = dalpha r,
/// dz = dalpha s + dalpha r p          (u0, u1 > 0)
/// ```
#[test]
fn hand_derived_gradient_single_unit() {
    let (x, z) = (0.3f64, 0.7f64);
    let (a, c, e, f) = (1.5, 0.2, 0.8, 0.1);
    let (p_, q, r, s, t) = (0.9, 0.4, 0.6, -0.5, 0.3);
    let cfg = ModelConfig {
        input_dim: 1,
        output_dim: 1,
        latent_dim: 1,
        hidden_layers: 1,
        width: 1,
        ..ModelConfig::new(1, 1)
    };
    let params = ModelParams::from_layers(
        cfg,
        vec![layer(vec![a], vec![c], 1, Activation::Sine)],
        vec![
            layer(vec![p_], vec![q], 1, Activation::Relu),
            layer(vec![r, s], vec![t], 2, Activation::Relu),
        ],
        layer(vec![e], vec![f], 1, Activation::Identity),
        None,
    )
    .unwrap();

    let g = (p_ * z + q).max(0.0);
    let alpha = (r * g + s * z + t).max(0.0);
    let v = a * x + c;
    let h = alpha * v.sin();
    let y = e * h + f;
    let dy = 2.0 * y;
    let dalpha = dy * e * v.sin();
    let want_theta = vec![
        dy * e * alpha * v.cos() * x, // a
        dy * e * alpha * v.cos(),     // c
        dalpha * r * z,               // p
        dalpha * r,                   // q
        dalpha * g,                   // r
        dalpha * z,                   // s
        dalpha,                       // t
        dy * h,                       // e
        dy,                           // f
    ];
    let want_dz = dalpha * s + dalpha * r * p_;

    let tape = model_forward_taped(&params, &[x], &[z]).unwrap();
    assert!((tape.synth.output[0] - y).abs() < 1e-15);
    let (grads, dz) = model_backward(&params, &tape, &[dy]).unwrap();
    for (got, want) in grads.flatten().iter().zip(&want_theta) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert!((dz[0] - want_dz).abs() < 1e-12);
}

/// Analytic gradient of `||f(x; z)||^2` over all parameters and `z`.
fn analytic(p: &ModelParams<f64>, x: &[f64], z: &[f64]) -> Vec<f64> {
    let tape = model_forward_taped(p, x, z).unwrap();
    let dy: Vec<f64> = tape.synth.output.iter().map(|v| 2.0 * v).collect();
    let (g, dz) = model_backward(p, &tape, &dy).unwrap();
    let mut all = g.flatten();
    all.extend(dz);
    all
}

fn numeric(p: &ModelParams<f64>, x: &[f64], z: &[f64]) -> Vec<f64> {
    let np = p.param_count();
    let mut flat = p.flatten();
    flat.extend_from_slice(z);
    let mut work = p.clone();
    finite_difference_grad(
        |v| {
            work.load_flat(&v[..np]).unwrap();
            model_forward(&work, x, &v[np..]).unwrap().iter().map(|y| y * y).sum()
        },
        &flat,
        1e-5,
    )
    .unwrap()
}

fn norm_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

#[test]
fn gradients_match_finite_differences_all_modes() {
    let modes = [
        (Conditioning::Modulated, SynthActivation::Sine, InputEncoding::Raw),
        (Conditioning::Concat, SynthActivation::Sine, InputEncoding::Raw),
        (Conditioning::None, SynthActivation::Sine, InputEncoding::Raw),
        (Conditioning::Concat, SynthActivation::Relu, InputEncoding::Raw),
        (
            Conditioning::Concat,
            SynthActivation::Relu,
            InputEncoding::FourierFeatures {
                sigma: 2.0,
                feature_count: 4,
            },
        ),
        (Conditioning::Modulated, SynthActivation::Relu, InputEncoding::Raw),
    ];
    for (mi, (cond, act, enc)) in modes.into_iter().enumerate() {
        for seed in 0..20u64 {
            let mut rng = RngStream::new(1000 * mi as u64 + seed);
            let cfg = ModelConfig {
                input_dim: 1 + rng.index(3),
                output_dim: 1 + rng.index(3),
                latent_dim: 1 + rng.index(8),
                hidden_layers: 1 + rng.index(3),
                width: 1 + rng.index(8),
                omega0: 30.0,
                conditioning: cond,
                input_encoding: enc,
                activation: act,
                ..ModelConfig::new(1, 1)
            };
            let mut p: ModelParams<f64> = ModelParams::init(cfg, &mut rng).unwrap();
            randomize_biases(&mut p, &mut rng);
            let x = random_vec(&mut rng, cfg.input_dim, 1.0);
            let z = if cfg.uses_latent() {
                random_vec(&mut rng, cfg.latent_dim, 1.0)
            } else {
                Vec::new()
            };
            let a = analytic(&p, &x, &z);
            let n = numeric(&p, &x, &z);
            let err = norm_rel_err(&a, &n);
            assert!(err < 1e-5, "{cond:?}/{act:?} seed {seed}: rel err {err}");
        }
    }
}

#[test]
fn batch_matches_per_sample() {
    let mut rng = RngStream::new(21);
    for cond in [Conditioning::Modulated, Conditioning::Concat, Conditioning::None] {
        let mut p: ModelParams<f64> = ModelParams::init(small_config(cond, SynthActivation::Sine), &mut rng).unwrap();
        randomize_biases(&mut p, &mut rng);
        let z = random_vec(&mut rng, 3, 1.0);
        let coords = random_vec(&mut rng, 2 * 7, 1.0);
        let tape = forward_batch(&p, &coords, &z).unwrap();
        let mut g_single = p.zero_grads();
        let mut dz_single = vec![0.0; 3];
        let mut dy_all = Vec::new();
        for (r, x) in coords.chunks_exact(2).enumerate() {
            let t = model_forward_taped(&p, x, &z).unwrap();
            for (a, b) in t.synth.output.iter().zip(&tape.output[r * 2..r * 2 + 2]) {
                assert!((a - b).abs() < 1e-12);
            }
            let dy = vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            model_backward_into(&p, &t, &dy, &mut g_single, &mut dz_single).unwrap();
            dy_all.extend(dy);
        }
        let mut g_batch = p.zero_grads();
        let mut dz_batch = vec![0.0; 3];
        backward_batch(&p, &tape, &z, &dy_all, &mut g_batch, &mut dz_batch).unwrap();
        for (a, b) in g_single.flatten().iter().zip(g_batch.flatten().iter()) {
            assert!((a - b).abs() < 1e-10, "{cond:?}");
        }
        if cond != Conditioning::None {
            for (a, b) in dz_single.iter().zip(&dz_batch) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn batch_forward_f32_matches_per_sample() {
    let p: ModelParams<f32> = ModelParams::init(
        small_config(Conditioning::Modulated, SynthActivation::Sine),
        &mut RngStream::new(2),
    )
    .unwrap();
    let z = [0.3f32, -0.1, 0.8];
    let coords: Vec<f32> = (0..40).map(|i| (i as f32 * 0.137).fract()).collect();
    let batch = predict_batch(&p, &coords, &z).unwrap();
    for (r, x) in coords.chunks_exact(2).enumerate() {
        let y = model_forward(&p, x, &z).unwrap();
        for (a, b) in y.iter().zip(&batch[r * 2..]) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn fourier_encoding_examples() {
    let f = fourier_encode(&[0.3f64, 0.7], &[0.0; 6], 3).unwrap();
    assert_eq!(f, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    let f = fourier_encode(&[0.25f64, 123.0], &[1.0, 0.0], 1).unwrap();
    assert!(f[0].abs() < 1e-15 && (f[1] - 1.0).abs() < 1e-15);
    let mut rng = RngStream::new(1);
    let b = random_vec(&mut rng, 16 * 2, 3.0);
    assert_eq!(fourier_encode(&[0.1, 0.2], &b, 16).unwrap().len(), 32);
    assert!(fourier_encode(&[0.1, 0.2], &b, 15).is_err());
}

#[test]
fn concat_preact_difference_is_constant_phase_shift() {
    let mut rng = RngStream::new(31);
    let mut cfg = small_config(Conditioning::Concat, SynthActivation::Sine);
    cfg.latent_dim = 4;
    let p: ModelParams<f64> = ModelParams::init(cfg, &mut rng).unwrap();
    let z1 = random_vec(&mut rng, 4, 1.0);
    let z2 = random_vec(&mut rng, 4, 1.0);
    let diffs: Vec<Vec<f64>> = (0..100)
        .map(|_| {
            let x = random_vec(&mut rng, 2, 1.0);
            let a = concat_first_layer_preact(&p, &x, &z1).unwrap();
            let b = concat_first_layer_preact(&p, &x, &z2).unwrap();
            a.iter().zip(&b).map(|(u, v)| u - v).collect()
        })
        .collect();
    let l0 = &p.synth_layers()[0];
    for j in 0..5 {
        let mean = diffs.iter().map(|d| d[j]).sum::<f64>() / 100.0;
        let dev = diffs.iter().map(|d| (d[j] - mean).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-6);
        let direct: f64 = (0..4).map(|c| l0.weight(j, 2 + c) * (z1[c] - z2[c])).sum();
        assert!((mean - direct).abs() < 1e-6);
    }
    let x = [0.5, 0.5];
    let same = concat_first_layer_preact(&p, &x, &z1).unwrap();
    assert_eq!(same, concat_first_layer_preact(&p, &x, &z1).unwrap());
    let modulated: ModelParams<f64> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    assert!(concat_first_layer_preact(&modulated, &x, &[0.0; 3]).is_err());
}

#[test]
fn alphas_are_non_negative() {
    let mut rng = RngStream::new(41);
    let mut p: ModelParams<f64> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    randomize_biases(&mut p, &mut rng);
    for _ in 0..200 {
        let z = random_vec(&mut rng, 3, 5.0);
        let m = modulator_forward(&p, &z).unwrap();
        assert!(m.alphas.iter().flatten().all(|a| *a >= 0.0));
    }
}

#[test]
fn tensors_round_trip_through_flat_vector() {
    let mut rng = RngStream::new(8);
    let p: ModelParams<f32> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    let mut q: ModelParams<f32> =
        ModelParams::init(small_config(Conditioning::Modulated, SynthActivation::Sine), &mut rng).unwrap();
    assert_ne!(p, q);
    q.load_flat(&p.flatten()).unwrap();
    assert_eq!(p, q);
    assert!(q.load_flat(&[0.0; 3]).is_err());
}
