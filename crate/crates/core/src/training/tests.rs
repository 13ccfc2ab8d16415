use super::*;
use crate::model::{model_forward, Conditioning};
use crate::nn::finite_difference_grad;

fn tiny_model(n: usize, m: usize, d: usize, k: usize, width: usize) -> ModelConfig {
    ModelConfig {
        latent_dim: d,
        hidden_layers: k,
        width,
        ..ModelConfig::new(n, m)
    }
}

fn gradient_image(w: usize, h: usize) -> SampledSignal {
    let mut v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            v.push(0.1 + 0.8 * (x + y) as f64 / (w + h - 2) as f64);
        }
    }
    SampledSignal::dense(vec![w, h], 1, v).unwrap()
}

#[test]
fn pair_table_counts_overlap_memberships() {
    let grid = TileGrid::uniform(vec![64, 64], 32, 8).unwrap();
    let t = PairTable::build(&[gradient_image(64, 64)], &grid).unwrap();
    // Every tile sees its full footprint.
    assert_eq!(t.len(), grid.tile_count() * 32 * 32);
    assert!(t.local.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(PairTable::build(&[], &grid).is_err());
}

#[test]
fn constant_zero_signal_is_fit() {
    let grid = TileGrid::uniform(vec![16, 16], 8, 2).unwrap();
    let zero = SampledSignal::dense(vec![16, 16], 1, vec![0.0; 256]).unwrap();
    let model = tiny_model(2, 1, 4, 1, 8);
    let train = TrainConfig {
        steps: 500,
        batch_size: 64,
        lr_theta: 1e-3,
        lr_latent: 1e-3,
        ..TrainConfig::default()
    };
    let (_, _, report) = train_autodecoder(&[zero], &grid, &model, &train).unwrap();
    let tail = &report.losses[report.losses.len() - 10..];
    assert!(tail.iter().all(|&l| l < 1e-6), "{tail:?}");
}

#[test]
fn gradient_image_reaches_40_db() {
    let grid = TileGrid::uniform(vec![64, 64], 32, 8).unwrap();
    let img = gradient_image(64, 64);
    let model = tiny_model(2, 1, 16, 2, 32);
    let train = TrainConfig {
        steps: 2000,
        batch_size: 512,
        lr_theta: 1e-3,
        lr_latent: 1e-2,
        ..TrainConfig::default()
    };
    let (params, books, report) = train_autodecoder(std::slice::from_ref(&img), &grid, &model, &train).unwrap();
    let (p1, _) = evaluate_psnr(&params, &books[0], &img).unwrap();
    assert!(p1 >= 40.0, "psnr {p1}");
    assert_eq!(report.last().unwrap().psnr_1x, p1);
}

#[test]
fn training_is_deterministic() {
    let grid = TileGrid::uniform(vec![32, 32], 16, 4).unwrap();
    let img = crate::signals::smooth_blobs(32, 32, 3, 4).unwrap();
    let model = tiny_model(2, 3, 8, 2, 16);
    let train = TrainConfig {
        steps: 60,
        batch_size: 256,
        eval_every: 20,
        deterministic: true,
        ..TrainConfig::default()
    };
    let a = train_autodecoder(std::slice::from_ref(&img), &grid, &model, &train).unwrap();
    let b = train_autodecoder(std::slice::from_ref(&img), &grid, &model, &train).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_eq!(a.2.to_csv(), b.2.to_csv());
    assert_eq!(a.2.rows.len(), 3);
    assert!(a.2.rows.iter().all(|r| r.wall_ms == 0));
}

#[test]
fn loss_trends_down_over_a_window() {
    let grid = TileGrid::uniform(vec![32, 32], 16, 4).unwrap();
    let img = crate::signals::smooth_blobs(32, 32, 1, 9).unwrap();
    let model = tiny_model(2, 1, 8, 2, 16);
    let train = TrainConfig {
        steps: 200,
        batch_size: 256,
        lr_theta: 1e-3,
        lr_latent: 1e-2,
        ..TrainConfig::default()
    };
    let (_, _, report) = train_autodecoder(&[img], &grid, &model, &train).unwrap();
    let l = &report.losses;
    let head: f64 = l[..50].iter().sum::<f64>() / 50.0;
    let tail: f64 = l[150..].iter().sum::<f64>() / 50.0;
    assert!(tail < head, "{tail} vs {head}");
}

#[test]
fn exact_targets_leave_every_parameter_unchanged() {
    // Targets are the initial network's own per-tile predictions; without
    // overlap every sample belongs to one tile, so all residuals are zero.
    let grid = TileGrid::uniform(vec![16, 16], 8, 0).unwrap();
    let model = tiny_model(2, 1, 4, 2, 8);
    let train = TrainConfig {
        steps: 1,
        batch_size: 256,
        ..TrainConfig::default()
    };
    let root = RngStream::new(train.seed);
    let params: ModelParams<f32> = ModelParams::init(model, &mut root.derive(TAG_MODEL)).unwrap();
    let latents = init_latents(grid.tile_count(), 4, train.latent_scale, &mut root.derive(TAG_LATENTS)).unwrap();
    let blank = SampledSignal::dense(vec![16, 16], 1, vec![0.0; 256]).unwrap();
    let table = PairTable::build(std::slice::from_ref(&blank), &grid).unwrap();
    let mut values = vec![0.0; 256];
    for (i, v) in values.iter_mut().enumerate() {
        let p = blank.point(i);
        let tile = grid.tiles_containing(p).unwrap().remove(0);
        let lin = grid.linear_index(&tile.index);
        assert_eq!(table.code[i], lin as u32);
        let x: Vec<f32> = tile.to_local(p).unwrap().into_iter().map(|v| v as f32).collect();
        *v = f64::from(crate::model::predict_batch(&params, &x, &latents[lin]).unwrap()[0]);
    }
    let target = SampledSignal::dense(vec![16, 16], 1, values).unwrap();
    let mut grads = params.zero_grads();
    let table = PairTable::build(std::slice::from_ref(&target), &grid).unwrap();
    for (&code, members) in &table.group(0..table.len()) {
        let (coords, targets) = table.gather(members);
        let mut dz = vec![0.0f32; 4];
        let z = &latents[code as usize];
        let loss = tile_loss_and_grads(&params, &coords, &targets, z, LossKind::L2, 1.0, &mut grads, &mut dz).unwrap();
        assert_eq!(loss, 0.0);
        assert!(dz.iter().all(|&g| g == 0.0));
    }
    assert!(grads.is_zero());
    let epoch = TrainConfig {
        steps: 4,
        batch_size: 64,
        ..train
    };
    let (trained, books, _) = train_autodecoder(&[target], &grid, &model, &epoch).unwrap();
    assert_eq!(trained, params);
    assert_eq!(books[0].codes(), latents.concat().as_slice());
}

#[test]
fn inference_freezes_theta_and_is_order_independent() {
    let grid = TileGrid::uniform(vec![32, 32], 16, 4).unwrap();
    let img = crate::signals::smooth_blobs(32, 32, 1, 2).unwrap();
    let model = tiny_model(2, 1, 8, 2, 16);
    let train = TrainConfig {
        steps: 100,
        batch_size: 256,
        lr_theta: 1e-3,
        lr_latent: 1e-2,
        ..TrainConfig::default()
    };
    let (params, _, _) = train_autodecoder(std::slice::from_ref(&img), &grid, &model, &train).unwrap();
    let before = params.flatten();
    let infer = TrainConfig { steps: 30, ..train };
    let book = infer_latents(&params, &img, &grid, &infer).unwrap();
    assert_eq!(params.flatten(), before);
    assert!(before
        .iter()
        .zip(params.flatten())
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    // Reverse tile order, one tile at a time.
    let table = PairTable::build(std::slice::from_ref(&img), &grid).unwrap();
    let groups = table.group(0..table.len());
    let mut codes = vec![0.0f32; book.codes().len()];
    for tile in (0..grid.tile_count()).rev() {
        let (coords, targets) = table.gather(&groups[&(tile as u32)]);
        let z = infer_tile_latent(&params, &coords, &targets, tile, &infer).unwrap();
        codes[tile * 8..(tile + 1) * 8].copy_from_slice(&z);
    }
    assert_eq!(codes, book.codes());
}

#[test]
fn mismatched_inputs_are_rejected() {
    let grid = TileGrid::uniform(vec![32, 32], 16, 4).unwrap();
    let img = gradient_image(32, 32);
    let train = TrainConfig::default();
    assert!(train_autodecoder(std::slice::from_ref(&img), &grid, &tiny_model(2, 3, 4, 1, 4), &train).is_err());
    assert!(train_autodecoder(&[gradient_image(48, 32)], &grid, &tiny_model(2, 1, 4, 1, 4), &train).is_err());
    let bad = TrainConfig { steps: 0, ..train };
    assert!(train_autodecoder(&[img], &grid, &tiny_model(2, 1, 4, 1, 4), &bad).is_err());
}

#[test]
fn non_finite_targets_abort_with_location() {
    let grid = TileGrid::uniform(vec![16, 16], 8, 0).unwrap();
    let mut v = vec![0.5; 256];
    v[17] = f64::NAN;
    let img = SampledSignal::dense(vec![16, 16], 1, v).unwrap();
    let train = TrainConfig {
        steps: 50,
        batch_size: 256,
        ..TrainConfig::default()
    };
    let err = train_autodecoder(&[img], &grid, &tiny_model(2, 1, 4, 1, 4), &train).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::NonFinite(_)));
    assert!(msg.contains("step") && msg.contains("tile 0"), "{msg}");
}

#[test]
fn tile_inputs_follow_raster_order() {
    let v: Vec<f64> = (0..16).map(f64::from).collect();
    let img = SampledSignal::dense(vec![4, 4], 1, v).unwrap();
    let grid = TileGrid::uniform(vec![4, 4], 2, 0).unwrap();
    let t = tile_inputs(&img, &grid).unwrap();
    assert_eq!(&t[..4], &[0.0, 1.0, 4.0, 5.0]);
    assert_eq!(&t[4..8], &[2.0, 3.0, 6.0, 7.0]);
    assert_eq!(&t[12..], &[10.0, 11.0, 14.0, 15.0]);
}

#[allow(clippy::type_complexity)]
fn encoder_setup(seed: u64) -> (ModelParams<f64>, TileEncoder<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = RngStream::new(seed);
    let n = 1 + rng.index(3);
    let m = 1 + rng.index(2);
    let d = 1 + rng.index(8);
    let model = tiny_model(n, m, d, 1 + rng.index(3), 2 + rng.index(7));
    let params = ModelParams::init(model, &mut rng).unwrap();
    let enc_cfg = EncoderConfig {
        input_dim: 3 + rng.index(6),
        hidden: 2 + rng.index(6),
        latent_dim: d,
    };
    let mut encoder = TileEncoder::<f64>::init(enc_cfg, &mut rng).unwrap();
    // Nonzero biases keep ReLU units away from their kinks.
    let jitter: Vec<f64> = encoder.flatten().iter().map(|w| w + rng.uniform(0.05, 0.2)).collect();
    encoder.load_flat(&jitter).unwrap();
    let tile: Vec<f64> = (0..enc_cfg.input_dim).map(|_| rng.uniform(0.0, 1.0)).collect();
    let rows = 5;
    let coords: Vec<f64> = (0..rows * n).map(|_| rng.uniform(0.0, 1.0)).collect();
    let targets: Vec<f64> = (0..rows * m).map(|_| rng.uniform(0.0, 1.0)).collect();
    (params, encoder, tile, coords, targets)
}

#[test]
fn encoder_gradients_match_finite_differences() {
    for seed in 0..20 {
        let (params, encoder, tile, coords, targets) = encoder_setup(seed);
        let mut grads = params.zero_grads();
        let mut enc_grads = encoder.zero_grads();
        autoencoder_tile_loss(
            &params,
            &encoder,
            &tile,
            &coords,
            &targets,
            LossKind::L2,
            1.0,
            &mut grads,
            &mut enc_grads,
        )
        .unwrap();
        let mut analytic = grads.flatten();
        analytic.extend(enc_grads.concat());
        let theta = params.flatten();
        let split = theta.len();
        let mut flat = theta;
        flat.extend(encoder.flatten());
        let fd = finite_difference_grad(
            |p| {
                let mut pm = params.clone();
                pm.load_flat(&p[..split]).unwrap();
                let mut em = encoder.clone();
                em.load_flat(&p[split..]).unwrap();
                let z = em.encode(&tile).unwrap();
                let y = crate::model::predict_batch(&pm, &coords, &z).unwrap();
                reconstruction_loss(&y, &targets, LossKind::L2).unwrap().0
            },
            &flat,
            1e-5,
        )
        .unwrap();
        let num: f64 = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = analytic
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        assert!(num / den.max(1e-12) < 1e-5, "seed {seed}: rel err {}", num / den);
    }
}

#[test]
fn autoencoder_shares_the_decoder_path() {
    let grid = TileGrid::uniform(vec![32, 32], 16, 4).unwrap();
    let imgs: Vec<_> = (0..2)
        .map(|s| crate::signals::smooth_blobs(32, 32, 1, s).unwrap())
        .collect();
    let model = tiny_model(2, 1, 8, 2, 16);
    let train = TrainConfig {
        steps: 20,
        batch_size: 128,
        ..TrainConfig::default()
    };
    let (params, encoder, report) = train_autoencoder(&imgs, &grid, 32, &model, &train).unwrap();
    assert_eq!(report.losses.len(), 20);
    // Encoding an unseen signal is a single forward pass.
    let unseen = crate::signals::smooth_blobs(32, 32, 1, 99).unwrap();
    let book = encode_tiles(&encoder, &unseen, &grid).unwrap();
    assert_eq!(book, encode_tiles(&encoder, &unseen, &grid).unwrap());
    let p = [5.0, 7.0];
    let tile = grid.tile(0);
    let x: Vec<f32> = tile.to_local(&p).unwrap().into_iter().map(|v| v as f32).collect();
    let direct = model_forward(&params, &x, book.code(0)).unwrap();
    let decoded = crate::tiling::blended_decode(&params, &book, &p).unwrap();
    assert_eq!(decoded[0], f64::from(direct[0]));
    assert_eq!(params.config().conditioning, Conditioning::Modulated);
}
