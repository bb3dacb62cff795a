mod support;

use eben_core::model::*;
use eben_core::pqmf::{PqmfBank, Subbands};
use eben_core::rng::Xoshiro;
use eben_core::signal::Signal;
use eben_core::tensor::Tensor;
use eben_core::Error;
use proptest::prelude::*;

use support::Channels;

fn small_generator() -> GeneratorConfig {
    GeneratorConfig { base_channels: 4, latent_channels: 6, ..GeneratorConfig::default() }
}

fn small_discriminator() -> DiscriminatorConfig {
    DiscriminatorConfig { first_channels: 4, max_channels: 16, ..DiscriminatorConfig::default() }
}

fn noise(len: usize, seed: u64, scale: f64) -> Signal {
    let mut rng = Xoshiro::seed_from_u64(seed);
    Signal::new((0..len).map(|_| scale * rng.gaussian()).collect(), 16_000).unwrap()
}

fn channels(t: &Tensor) -> Channels {
    (0..t.shape()[0]).map(|i| t.row(i).to_vec()).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn parameter_counts_are_pinned() {
    let c = count_config_parameters(&GeneratorConfig::default(), &DiscriminatorConfig::default());
    assert_eq!(c.generator, 2_175_780);
    assert_eq!(c.discriminators, [18_862_913, 8_113_985, 8_113_985, 8_113_985]);
    assert_eq!(c.total, c.generator + c.discriminator_total);
    assert!((500_000..=5_000_000).contains(&c.generator));
    assert_eq!(count_parameters(&[]).total, 0);
    assert_eq!(count_store_parameters(&WeightStore::new()).total, 0);
}

#[test]
fn store_count_matches_config_count() {
    let (g, d) = (small_generator(), small_discriminator());
    let w = init_weights(&g, &d, 4).unwrap();
    assert_eq!(count_store_parameters(&w), count_config_parameters(&g, &d));
}

#[test]
fn generator_matches_straight_line_oracle() {
    let g = GeneratorConfig::default();
    let bank = PqmfBank::design_default(4).unwrap();
    let w = WeightStore::seeded(&generator_parameter_specs(&g), 11).unwrap();
    let x = noise(512, 3, 0.3);
    let y = generator_forward(&w, &x, &g, &bank).unwrap();
    let oracle = support::generator(&w, &g, &bank, x.samples());
    let diff = max_abs_diff(y.samples(), &oracle);
    assert!(diff < 1e-6, "max |diff| = {diff:e}");
    assert!(y.samples().iter().any(|v| v.abs() > 1e-3));
}

#[test]
fn generator_with_two_bands_matches_oracle() {
    let g = GeneratorConfig { bands_to_generator: 2, encoder_strides: vec![2, 3], ..small_generator() };
    let bank = PqmfBank::design_default(4).unwrap();
    let w = WeightStore::seeded(&generator_parameter_specs(&g), 5).unwrap();
    let x = noise(4 * 6 * 10, 8, 0.5);
    let y = generator_forward(&w, &x, &g, &bank).unwrap();
    let diff = max_abs_diff(y.samples(), &support::generator(&w, &g, &bank, x.samples()));
    assert!(diff < 1e-6, "max |diff| = {diff:e}");
}

#[test]
fn zero_weights_give_zero_output() {
    let g = GeneratorConfig::default();
    let bank = PqmfBank::design_default(4).unwrap();
    let w = WeightStore::zeros(&generator_parameter_specs(&g)).unwrap();
    let y = generator_forward(&w, &noise(1024, 1, 1.0), &g, &bank).unwrap();
    assert!(y.samples().iter().all(|&v| v == 0.0));

    let d = small_discriminator();
    let wd = WeightStore::zeros(&discriminator_parameter_specs(&d)).unwrap();
    let x = Tensor::new(vec![1, 256], noise(256, 2, 1.0).into_samples()).unwrap();
    for k in 0..NUM_SCALES {
        let o = discriminator_forward(&wd, &d, &x, k).unwrap();
        assert!(o.logits.data().iter().all(|&v| v == 0.0));
        assert!(o.features.iter().all(|f| f.data().iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn generator_is_deterministic() {
    let g = small_generator();
    let bank = PqmfBank::design_default(4).unwrap();
    let w = WeightStore::seeded(&generator_parameter_specs(&g), 2).unwrap();
    let x = noise(2048, 4, 0.2);
    let a = generator_forward(&w, &x, &g, &bank).unwrap();
    let b = generator_forward(&w, &x, &g, &bank).unwrap();
    assert!(a.samples().iter().zip(b.samples()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn generator_length_errors() {
    let g = GeneratorConfig::default();
    let bank = PqmfBank::design_default(4).unwrap();
    let w = WeightStore::zeros(&generator_parameter_specs(&g)).unwrap();
    let e = generator_forward(&w, &noise(1000, 1, 1.0), &g, &bank).unwrap_err();
    assert!(matches!(e, Error::Argument(ref m) if m.contains("256")), "{e}");
    let mut partial = WeightStore::new();
    for (n, t) in w.iter().filter(|(n, _)| !n.contains("bottleneck.in")) {
        partial.insert(n, t.clone()).unwrap();
    }
    let e = generator_forward(&partial, &noise(256, 1, 1.0), &g, &bank).unwrap_err();
    assert!(matches!(e, Error::Load(ref m) if m.contains("generator.bottleneck.in")), "{e}");
}

#[test]
fn discriminator_matches_straight_line_oracle() {
    let d = DiscriminatorConfig::default();
    let specs: Vec<ParamSpec> =
        discriminator_parameter_specs(&d).into_iter().filter(|s| s.name.starts_with("discriminator1.")).collect();
    let w = WeightStore::seeded(&specs, 21).unwrap();
    let x = noise(1024, 6, 0.5);
    let out = discriminator_forward(&w, &d, &Tensor::new(vec![1, 1024], x.samples().to_vec()).unwrap(), 1).unwrap();
    let oracle = support::discriminator(&w, &d, 1, x.samples());
    assert_eq!(out.features.len(), 6);
    for (f, o) in out.features.iter().zip(&oracle) {
        let got = channels(f);
        for (a, b) in got.iter().zip(o) {
            let diff = max_abs_diff(a, b);
            assert!(diff < 1e-6, "max |diff| = {diff:e}");
        }
    }
    assert_eq!(out.logits, *out.features.last().unwrap());
}

#[test]
fn full_scale_logit_length() {
    let d = DiscriminatorConfig { first_channels: 4, max_channels: 16, ..DiscriminatorConfig::default() };
    let w = init_weights(&small_generator(), &d, 1).unwrap();
    let x = Tensor::new(vec![1, 16384], noise(16384, 1, 0.1).into_samples()).unwrap();
    let o = discriminator_forward(&w, &d, &x, 0).unwrap();
    assert_eq!(o.logits.shape(), [1, 64]);
    assert_eq!(o.num_layers(), 7);
    assert!(matches!(discriminator_forward(&w, &d, &x, 4), Err(Error::Argument(_))));
}

#[test]
fn band_routing() {
    let g = GeneratorConfig::default();
    let bank = PqmfBank::design_default(4).unwrap();
    let sb = bank.analyze(&noise(1024, 9, 1.0)).unwrap();
    let (gen, disc) = split_bands(&sb, &g).unwrap();
    assert_eq!(gen.shape(), [1, 256]);
    assert_eq!(disc.shape(), [3, 256]);
    assert_eq!(gen.row(0), sb.band(0));
    let mut joined = gen.data().to_vec();
    joined.extend_from_slice(disc.data());
    assert_eq!(joined, sb.bands().data());

    let bad = GeneratorConfig { bands_to_generator: 2, ..g.clone() };
    assert!(matches!(split_bands(&sb, &bad), Err(Error::Config(_))));
}

#[test]
fn band_discriminators_never_see_band_zero() {
    let g = GeneratorConfig::default();
    let d = small_discriminator();
    let bank = PqmfBank::design_default(4).unwrap();
    let w = init_weights(&g, &d, 3).unwrap();
    let ens = Ensemble::new(&d, &w).unwrap();
    let x = noise(2048, 10, 1.0);
    let sb = bank.analyze(&x).unwrap();
    let (out, routing) = ens.forward(&x, &sb, &g).unwrap();
    assert_eq!(routing, [None, Some(1), Some(2), Some(3)]);

    // replacing band 0 leaves every band discriminator's output unchanged
    let mut data = sb.bands().data().to_vec();
    for v in &mut data[..sb.band_len()] {
        *v = 5.0;
    }
    let altered = Subbands::new(Tensor::new(sb.bands().shape().to_vec(), data).unwrap(), 16_000, x.len()).unwrap();
    let (out2, _) = ens.forward(&x, &altered, &g).unwrap();
    for k in 1..NUM_SCALES {
        assert_eq!(out[k], out2[k]);
    }
}

#[test]
fn latency_is_pinned_and_matches_perturbation() {
    let bank = PqmfBank::design_default(4).unwrap();
    let g = GeneratorConfig::default();
    let r = report_latency(&g, &bank, 16_000).unwrap();
    assert_eq!(r.lookahead_samples, 3283);
    assert_eq!(r.receptive_field_samples, 6356);
    assert_eq!(r.period_samples, 256);
    assert!((r.lookahead_ms - 3283.0 / 16.0).abs() < 1e-9);
    assert!(!r.within_budget);

    // geometry, not width, sets the latency
    let narrow = GeneratorConfig { base_channels: 1, latent_channels: 1, ..g };
    assert_eq!(report_latency(&narrow, &bank, 16_000).unwrap(), r);
    let probed = probe_lookahead(&narrow, &bank, 7);
    assert_eq!(probed, r.lookahead_samples);
}

/// Largest `p - t` such that an impulse at input `p` reaches output `t`,
/// over one period of impulse positions.
///
/// With biases zeroed, a silent input maps to exact zeros, so any nonzero
/// output sample marks a dependency; weak paths through the filter-bank
/// tails cannot be lost against a nonzero background.
fn probe_lookahead(config: &GeneratorConfig, bank: &PqmfBank, seed: u64) -> i64 {
    let seeded = WeightStore::seeded(&generator_parameter_specs(config), seed).unwrap();
    let mut w = WeightStore::new();
    for (n, t) in seeded.iter() {
        let t = if n.ends_with(".bias") { t.map(|_| 0.0f32) } else { t.clone() };
        w.insert(n, t).unwrap();
    }
    let gen = Generator::new(config, &w).unwrap();
    let period = config.length_multiple();
    let len = period * 64;
    let mut best = i64::MIN;
    for p in len / 2..len / 2 + period {
        let mut s = vec![0.0; len];
        s[p] = 1e-3;
        let y = gen.forward(&Signal::new(s, 16_000).unwrap(), bank).unwrap();
        let first = y.samples().iter().position(|&v| v != 0.0).unwrap();
        best = best.max(p as i64 - first as i64);
    }
    best
}

#[test]
fn weights_file_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.ebwt");
    let mut rng = Xoshiro::seed_from_u64(77);
    let mut store = WeightStore::new();
    for i in 0..50 {
        let rank = 1 + (rng.next_u64() % 3) as usize;
        let shape: Vec<usize> = (0..rank).map(|_| 1 + (rng.next_u64() % 5) as usize).collect();
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gaussian() as f32).collect();
        store.insert(format!("t{i}"), Tensor::new(shape, data).unwrap()).unwrap();
    }
    store.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = WeightStore::load(&path).unwrap();
    assert_eq!(back, store);
    assert_eq!(back.to_bytes(), bytes);
    assert_eq!(&bytes[..4], b"EBWT");
}

fn random_output(rng: &mut Xoshiro, layers: &[(usize, usize)]) -> (DiscriminatorOutput, Vec<Channels>) {
    let mut features = Vec::new();
    let mut nested = Vec::new();
    for &(f, t) in layers {
        let data: Vec<f64> = (0..f * t).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let tensor = Tensor::new(vec![f, t], data).unwrap();
        nested.push(channels(&tensor));
        features.push(tensor);
    }
    let logits = features.last().unwrap().clone();
    (DiscriminatorOutput { logits, features }, nested)
}

fn random_plan(rng: &mut Xoshiro) -> Vec<Vec<(usize, usize)>> {
    (0..NUM_SCALES)
        .map(|_| {
            let depth = 2 + (rng.next_u64() % 5) as usize;
            let mut plan: Vec<(usize, usize)> = (0..depth - 1)
                .map(|_| (1 + (rng.next_u64() % 6) as usize, 1 + (rng.next_u64() % 9) as usize))
                .collect();
            plan.push((1, 1 + (rng.next_u64() % 9) as usize));
            plan
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn losses_match_naive_oracles(seed in any::<u64>()) {
        let mut rng = Xoshiro::seed_from_u64(seed);
        let plan = random_plan(&mut rng);
        let (real, real_n): (Vec<_>, Vec<_>) = plan.iter().map(|p| random_output(&mut rng, p)).unzip();
        let (fake, fake_n): (Vec<_>, Vec<_>) = plan.iter().map(|p| random_output(&mut rng, p)).unzip();
        prop_assert!((loss_discriminator(&real, &fake).unwrap() - support::loss_d(&real_n, &fake_n)).abs() < 1e-10);
        prop_assert!((loss_generator_adv(&fake).unwrap() - support::loss_g_adv(&fake_n)).abs() < 1e-10);
        prop_assert!((loss_generator_rec(&real, &fake).unwrap() - support::loss_g_rec(&real_n, &fake_n)).abs() < 1e-10);
    }

    #[test]
    fn rec_loss_is_zero_iff_included_layers_match(seed in any::<u64>()) {
        let mut rng = Xoshiro::seed_from_u64(seed);
        let plan = random_plan(&mut rng);
        let (real, _): (Vec<_>, Vec<_>) = plan.iter().map(|p| random_output(&mut rng, p)).unzip();
        // differing logits only: still zero
        let mut fake = real.clone();
        for o in &mut fake {
            o.logits = o.logits.map(|v| v + 1.0);
            let last = o.features.len() - 1;
            o.features[last] = o.logits.clone();
        }
        prop_assert_eq!(loss_generator_rec(&real, &fake).unwrap(), 0.0);
        // one changed entry in one included layer: positive
        let k = (rng.next_u64() % NUM_SCALES as u64) as usize;
        let l = (rng.next_u64() % (fake[k].features.len() as u64 - 1)) as usize;
        let mut data = fake[k].features[l].data().to_vec();
        data[0] += 0.5;
        fake[k].features[l] = Tensor::new(fake[k].features[l].shape().to_vec(), data).unwrap();
        prop_assert!(loss_generator_rec(&real, &fake).unwrap() > 0.0);
    }

    #[test]
    fn total_loss_identity(adv in 0.0f64..10.0, rec in 0.0f64..10.0, lambda in 0.0f64..1000.0) {
        let b = loss_generator_total(adv, rec, lambda).unwrap();
        prop_assert_eq!(b.l_g, adv + lambda * rec);
    }
}

#[test]
fn output_length_equals_input_length() {
    let g = GeneratorConfig::default();
    let bank = PqmfBank::design_default(4).unwrap();
    let w = WeightStore::seeded(&generator_parameter_specs(&g), 1).unwrap();
    let gen = Generator::new(&g, &w).unwrap();
    for k in 1..=20 {
        let len = 256 * k;
        let y = gen.forward(&noise(len, k as u64, 0.3), &bank).unwrap();
        assert_eq!(y.len(), len);
    }
}
