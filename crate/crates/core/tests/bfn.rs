use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sculpt::bfn::*;
use sculpt::encoder::{Conditioning, EncoderConfig, ScaNetwork};
use sculpt::io::AtomVocabulary;
use sculpt::numerics::{finite_diff_check, FdOptions, ParameterStore, Tape};
use sculpt::toy::{toy_complex, RigidMotion};

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn coordinate_flow_moments() {
    let s = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = [[1.0, -2.0, 0.5]];
    let draws = 100_000;
    let at_one: Vec<f64> = (0..draws)
        .map(|_| flow_sample_continuous(&x, 1.0, &s, &mut rng).unwrap()[0][1])
        .collect();
    let (m, sd) = mean_sd(&at_one);
    assert!((m - 0.9991 * -2.0).abs() < 3.0 * sd / (draws as f64).sqrt());

    let half: Vec<f64> = (0..draws)
        .map(|_| flow_sample_continuous(&x, 0.5, &s, &mut rng).unwrap()[0][0])
        .collect();
    let (_, sd) = mean_sd(&half);
    assert!((sd * sd / 0.0291 - 1.0).abs() < 0.05);
}

#[test]
fn type_flow_concentrates_and_separates() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hits = (0..10_000)
        .filter(|_| {
            let th = flow_sample_discrete(&[3], 1.0, 50.0, 9, &mut rng).unwrap();
            let row = th.row(0);
            (0..9).all(|j| row[j] <= row[3])
        })
        .count();
    assert!(hits >= 9_900, "{hits}");

    let gaps: Vec<f64> = (0..20_000)
        .map(|_| {
            let y = &sender_sample(&[3], 1.5, 9, &mut rng)[0];
            y[3] - y[0]
        })
        .collect();
    let (m, sd) = mean_sd(&gaps);
    assert!((m - 13.5).abs() < 3.0 * sd / (gaps.len() as f64).sqrt(), "{m}");
}

#[test]
fn coordinate_loss_weight_and_scaling() {
    let s = NoiseSchedule { steps: 1, ..NoiseSchedule::default() };
    let x = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
    assert_eq!(coordinate_loss(&x, &x, 1, &s).unwrap(), 0.0);
    let l = coordinate_loss(&[[0.0; 3]], &[[1.0, 0.0, 0.0]], 1, &s).unwrap();
    let expected = (1.0f64 - 0.0009).powi(2) / (2.0 * 0.0009);
    assert!(((l - expected) / expected).abs() < 1e-9);
    assert!((expected - 554.556).abs() < 1e-3);
    let d = coordinate_loss(&[[0.0; 3]], &[[2.0, 0.0, 0.0]], 1, &s).unwrap();
    assert!((d / l - 4.0).abs() < 1e-12);
}

#[test]
fn type_loss_one_hot_is_zero_for_every_draw() {
    let s = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let probs = vec![vec![0.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]];
    for i in [1, 10, 500, 1000] {
        assert_eq!(type_loss(&[2, 0], &probs, i, &s, &mut rng).unwrap(), 0.0);
    }
}

/// `KL(N(m, v) || (N(m, v) + N(-m, v)) / 2)` by Simpson's rule.
fn mixture_kl(m: f64, v: f64) -> f64 {
    let sd = v.sqrt();
    let log_n = |u: f64, c: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (u - c).powi(2) / (2.0 * v);
    let f = |u: f64| {
        let lp = log_n(u, m);
        let lq = (0.5 * log_n(u, m).exp() + 0.5 * log_n(u, -m).exp()).ln();
        lp.exp() * (lp - lq)
    };
    let (a, b, n) = (m - 14.0 * sd, m + 14.0 * sd, 20_000);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for j in 1..n {
        acc += f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn type_loss_matches_two_class_kl() {
    // Only the difference y_0 - y_1 separates the two class densities.
    let alpha = 2.0;
    let exact = mixture_kl(std::f64::consts::SQRT_2 * alpha, 2.0 * alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let y = &sender_sample(&[0], alpha, 2, &mut rng)[0];
        acc += type_loss_sample(y, 0, &[0.5, 0.5], alpha);
    }
    let estimate = acc / n as f64;
    assert!(((estimate - exact) / exact).abs() < 0.02, "{estimate} vs {exact}");
}

#[test]
fn type_loss_is_nonnegative_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let raw: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let alpha = rng.random_range(0.01..3.0);
        let a = rng.random_range(0..5);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                let y = &sender_sample(&[a], alpha, 5, &mut rng)[0];
                type_loss_sample(y, a, &probs, alpha)
            })
            .collect();
        let (m, sd) = mean_sd(&samples);
        assert!(m > -3.0 * sd / 100.0, "{m}");
    }
}

fn toy_training(seed: u64, config: &EncoderConfig) -> (AtomVocabulary, TrainingComplex) {
    let vocab = AtomVocabulary::default();
    let c = toy_complex(seed, 3, 5, &vocab).unwrap();
    let complex = TrainingComplex::new(&c.pocket, &c.surface, &c.ligand, &vocab, config).unwrap();
    (vocab, complex)
}

#[test]
fn oracle_network_has_zero_loss() {
    let config = EncoderConfig::toy();
    let (vocab, complex) = toy_training(0, &config);
    let oracle = OracleNetwork::new(complex.positions.clone(), complex.types.clone(), vocab.len()).unwrap();
    let store = ParameterStore::new();
    let schedule = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut tape = Tape::new();
        let (_, b) =
            discrete_time_loss(&mut tape, &oracle, &store, &complex, &schedule, &LossOptions::default(), &mut rng)
                .unwrap();
        assert_eq!((b.loss_x, b.loss_v, b.total), (0.0, 0.0, 0.0), "step {}", b.step);
    }
}

#[test]
fn loss_is_deterministic_under_a_fixed_stream() {
    let config = EncoderConfig::toy();
    let (vocab, complex) = toy_training(1, &config);
    let mut store = ParameterStore::new();
    let net = ScaNetwork::register(&mut store, &config, vocab.len(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let run = || {
        let mut tape = Tape::new();
        let mut rng = item_rng(9, 3, 1);
        discrete_time_loss(&mut tape, &net, &store, &complex, &NoiseSchedule::default(), &LossOptions::default(), &mut rng)
            .unwrap()
            .1
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.loss_x >= 0.0);
    assert_eq!(a.total, a.loss_x + a.loss_v);
}

#[test]
fn reconstruction_term_is_optional() {
    let config = EncoderConfig::toy();
    let (vocab, complex) = toy_training(2, &config);
    let mut store = ParameterStore::new();
    let net = ScaNetwork::register(&mut store, &config, vocab.len(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let schedule = NoiseSchedule::default();
    let eval = |options: LossOptions| {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        discrete_time_loss(&mut tape, &net, &store, &complex, &schedule, &options, &mut rng).unwrap().1
    };
    let plain = eval(LossOptions::default());
    let with = eval(LossOptions { reconstruction: true });
    assert_eq!((plain.loss_x, plain.loss_v), (with.loss_x, with.loss_v));
    assert_ne!(plain.total, with.total);
}

fn loss_gradient_report(seed: u64, step: f64) -> sculpt::numerics::GradCheckReport {
    let config = EncoderConfig { identity_init: false, ..EncoderConfig::toy() };
    let (vocab, complex) = toy_training(seed, &config);
    let mut store = ParameterStore::new();
    let net = ScaNetwork::register(&mut store, &config, vocab.len(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let schedule = NoiseSchedule::default();
    finite_diff_check(
        &store,
        |s, tape| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            Ok(discrete_time_loss(tape, &net, s, &complex, &schedule, &LossOptions::default(), &mut rng)?.0)
        },
        &FdOptions { step, ..FdOptions::default() },
    )
    .unwrap()
}

#[test]
fn loss_gradient_passes_finite_difference_check() {
    for seed in [0u64, 1] {
        let r = loss_gradient_report(seed, 1e-6);
        assert!(
            r.passed(),
            "seed {seed}: worst relative error {:.3e} at {}[{}], max |g_ad - g_fd| = {:.3e}",
            r.max_relative_error,
            r.worst_parameter,
            r.worst_entry,
            r.max_abs_error
        );
    }
}

#[test]
fn loss_gradient_matches_finite_differences_normwise() {
    for seed in [0u64, 1] {
        let r = loss_gradient_report(seed, 1e-5);
        assert!(r.normwise_error() < 1e-6, "seed {seed}: {:.3e}", r.normwise_error());
    }
}

#[test]
fn oracle_sampling_converges() {
    let vocab = AtomVocabulary::default();
    let config = EncoderConfig::toy();
    let c = toy_complex(3, 6, 12, &vocab).unwrap();
    let cond = Conditioning::new(c.pocket.clone(), c.surface.clone(), &vocab, &config).unwrap();
    let target = c.ligand.positions().to_vec();
    let oracle = OracleNetwork::new(target.clone(), c.ligand.types().to_vec(), vocab.len()).unwrap();
    let store = ParameterStore::new();
    let schedule = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for update in [TypeUpdate::Replace, TypeUpdate::Accumulate] {
        let options = SamplerOptions { type_update: update, ..SamplerOptions::default() };
        let mut err = 0.0;
        for _ in 0..100 {
            let s = sample_ligand(&oracle, &store, &cond, target.len(), &schedule, &options, &mut rng).unwrap();
            assert_eq!(s.types, c.ligand.types());
            err += s
                .positions
                .iter()
                .zip(&target)
                .map(|(a, b)| sculpt::geometry::vec::dist(*a, *b))
                .sum::<f64>()
                / target.len() as f64;
        }
        assert!(err / 100.0 < 0.1);
    }
}

#[test]
fn single_step_sampling_returns_the_final_prediction() {
    let vocab = AtomVocabulary::default();
    let config = EncoderConfig::toy();
    let c = toy_complex(4, 2, 6, &vocab).unwrap();
    let cond = Conditioning::new(c.pocket.clone(), c.surface.clone(), &vocab, &config).unwrap();
    let oracle = OracleNetwork::new(vec![[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]], vec![4, 1], vocab.len()).unwrap();
    let options = SamplerOptions { steps: 1, ..SamplerOptions::default() };
    let s = sample_ligand(&oracle, &ParameterStore::new(), &cond, 2, &NoiseSchedule::default(), &options, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    assert_eq!(s.positions, oracle.positions);
    assert_eq!(s.types, vec![4, 1]);
}

#[test]
fn sampler_validates_sizes() {
    let vocab = AtomVocabulary::default();
    let config = EncoderConfig::toy();
    let c = toy_complex(4, 2, 6, &vocab).unwrap();
    let cond = Conditioning::new(c.pocket.clone(), c.surface.clone(), &vocab, &config).unwrap();
    let oracle = OracleNetwork::new(vec![[0.0; 3]], vec![0], vocab.len()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let store = ParameterStore::new();
    let schedule = NoiseSchedule::default();
    assert!(sample_ligand(&oracle, &store, &cond, 0, &schedule, &SamplerOptions::default(), &mut rng).is_err());
    let none = SamplerOptions { steps: 0, ..SamplerOptions::default() };
    assert!(sample_ligand(&oracle, &store, &cond, 1, &schedule, &none, &mut rng).is_err());
}

#[test]
fn pocket_sampling_follows_rigid_motions() {
    let vocab = AtomVocabulary::default();
    let config = EncoderConfig { identity_init: false, ..EncoderConfig::toy() };
    let mut store = ParameterStore::new();
    let net = ScaNetwork::register(&mut store, &config, vocab.len(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let c = toy_complex(5, 4, 14, &vocab).unwrap();
    let schedule = NoiseSchedule::default();
    let options = SamplerOptions { steps: 10, ..SamplerOptions::default() };
    let run = |pocket: &sculpt::io::ProteinPocket, surface: &sculpt::io::SurfaceGraph| {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        sample_in_pocket(&net, &store, pocket, surface, &vocab, &config, 4, &schedule, &options, &mut rng).unwrap()
    };
    let base = run(&c.pocket, &c.surface);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let m = RigidMotion::random(&mut rng, 10.0);
        let moved = c.map_positions(|p| m.apply(p));
        let out = run(&moved.pocket, &moved.surface);
        assert_eq!(out.types, base.types);
        for (a, b) in out.positions.iter().zip(&base.positions) {
            let e = m.apply(*b);
            for k in 0..3 {
                assert!((a[k] - e[k]).abs() < 1e-6, "{}", (a[k] - e[k]).abs());
            }
        }
    }
}

#[test]
fn independent_item_streams() {
    let draw = |s: u64, t: u64, i: u64| item_rng(s, t, i).random::<u64>();
    assert_eq!(draw(1, 2, 3), draw(1, 2, 3));
    assert_ne!(draw(1, 2, 3), draw(1, 2, 4));
    assert_ne!(draw(1, 2, 3), draw(1, 3, 3));
}
