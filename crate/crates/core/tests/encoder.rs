use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sculpt::encoder::{sca_forward, time_embedding, Conditioning, EncoderConfig, ScaNetwork, ScaOutput};
use sculpt::io::AtomVocabulary;
use sculpt::numerics::{ParameterStore, Tensor};
use sculpt::toy::{toy_complex, RigidMotion, ToyComplex};

struct Setup {
    vocab: AtomVocabulary,
    config: EncoderConfig,
    store: ParameterStore,
    net: ScaNetwork,
}

fn setup(seed: u64) -> Setup {
    let vocab = AtomVocabulary::default();
    let config = EncoderConfig {
        identity_init: false,
        ..EncoderConfig::toy()
    };
    let mut store = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = ScaNetwork::register(&mut store, &config, vocab.len(), &mut rng).unwrap();
    Setup {
        vocab,
        config,
        store,
        net,
    }
}

fn theta_rows(n: usize, k: usize, seed: u64) -> Tensor {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let r: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Tensor::from_rows(&rows)
}

fn run(s: &Setup, c: &ToyComplex, mu: &Tensor, theta: &Tensor, t: f64) -> ScaOutput {
    let cond = Conditioning::new(c.pocket.clone(), c.surface.clone(), &s.vocab, &s.config).unwrap();
    sca_forward(&s.net, &s.store, &cond, mu, theta, t).unwrap()
}

fn noisy_mu(c: &ToyComplex) -> Tensor {
    let pts: Vec<[f64; 3]> = c
        .ligand
        .positions()
        .iter()
        .enumerate()
        .map(|(i, p)| [p[0] + 0.3 * (i as f64).sin(), p[1] - 0.2, p[2] + 0.1 * i as f64])
        .collect();
    Tensor::from_vec3s(&pts)
}

#[test]
fn single_atom_runs_end_to_end() {
    let s = setup(0);
    let c = toy_complex(1, 1, 3, &s.vocab).unwrap();
    let theta = theta_rows(1, s.vocab.len(), 0);
    let out = run(&s, &c, &Tensor::from_vec3s(c.ligand.positions()), &theta, 0.3);
    assert_eq!(out.probs.len(), 1);
    assert!((out.probs[0].iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn repeated_calls_are_bit_identical() {
    let s = setup(2);
    let c = toy_complex(4, 4, 10, &s.vocab).unwrap();
    let theta = theta_rows(4, s.vocab.len(), 1);
    let mu = noisy_mu(&c);
    assert_eq!(run(&s, &c, &mu, &theta, 0.5), run(&s, &c, &mu, &theta, 0.5));
}

#[test]
fn rigid_motion_equivariance() {
    let s = setup(5);
    let c = toy_complex(7, 5, 16, &s.vocab).unwrap();
    let theta = theta_rows(5, s.vocab.len(), 2);
    let mu = noisy_mu(&c);
    let base = run(&s, &c, &mu, &theta, 0.4);
    let moved_from_start = base.coords.iter().zip(mu.to_vec3s()).any(|(a, b)| a != &b);
    assert!(moved_from_start, "coordinate heads must be live for this test");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let m = RigidMotion::random(&mut rng, 10.0);
        let moved = c.map_positions(|p| m.apply(p));
        let mu_m = Tensor::from_vec3s(&mu.to_vec3s().into_iter().map(|p| m.apply(p)).collect::<Vec<_>>());
        let out = run(&s, &moved, &mu_m, &theta, 0.4);
        for (a, b) in out.coords.iter().zip(&base.coords) {
            let expected = m.apply(*b);
            for k in 0..3 {
                assert!((a[k] - expected[k]).abs() < 1e-6, "coordinate deviation {}", (a[k] - expected[k]).abs());
            }
        }
        for (pa, pb) in out.probs.iter().zip(&base.probs) {
            for (x, y) in pa.iter().zip(pb) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn ligand_permutation_equivariance() {
    let s = setup(8);
    let c = toy_complex(9, 4, 12, &s.vocab).unwrap();
    let theta = theta_rows(4, s.vocab.len(), 3);
    let mu = noisy_mu(&c);
    let base = run(&s, &c, &mu, &theta, 0.7);
    let perm = [2usize, 0, 3, 1];
    let mu_p = Tensor::from_vec3s(&perm.iter().map(|&i| mu.to_vec3s()[i]).collect::<Vec<_>>());
    let th_p = Tensor::from_rows(&perm.iter().map(|&i| theta.row(i).to_vec()).collect::<Vec<_>>());
    let out = run(&s, &c, &mu_p, &th_p, 0.7);
    for (j, &i) in perm.iter().enumerate() {
        for k in 0..3 {
            assert!((out.coords[j][k] - base.coords[i][k]).abs() < 1e-9);
        }
        for (x, y) in out.probs[j].iter().zip(&base.probs[i]) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn identity_init_keeps_coordinates() {
    let vocab = AtomVocabulary::default();
    let config = EncoderConfig::toy();
    let mut store = ParameterStore::new();
    let net = ScaNetwork::register(&mut store, &config, vocab.len(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let c = toy_complex(2, 3, 9, &vocab).unwrap();
    let cond = Conditioning::new(c.pocket.clone(), c.surface.clone(), &vocab, &config).unwrap();
    let mu = noisy_mu(&c);
    let out = sca_forward(&net, &store, &cond, &mu, &theta_rows(3, vocab.len(), 0), 0.2).unwrap();
    assert_eq!(out.coords, mu.to_vec3s());
}

#[test]
fn rejects_unnormalized_types() {
    let s = setup(0);
    let c = toy_complex(1, 2, 4, &s.vocab).unwrap();
    let cond = Conditioning::new(c.pocket.clone(), c.surface.clone(), &s.vocab, &s.config).unwrap();
    let theta = Tensor::full(&[2, s.vocab.len()], 0.5);
    let mu = Tensor::from_vec3s(c.ligand.positions());
    assert!(sca_forward(&s.net, &s.store, &cond, &mu, &theta, 0.1).is_err());
}

#[test]
fn embeddings_depend_on_time_and_types() {
    use sculpt::numerics::Tape;
    let s = setup(3);
    let k = s.vocab.len();
    let embed = |theta: &Tensor, t: f64| {
        let mut tape = Tape::new();
        let h = s.net.embed_ligand(&mut tape, &s.store, theta, t).unwrap();
        tape.value(h).clone()
    };
    let mut one_hot = vec![0.0; k];
    one_hot[1] = 1.0;
    let same = Tensor::from_rows(&[one_hot.clone(), one_hot.clone()]);
    let h = embed(&same, 0.5);
    assert_eq!(h.row(0), h.row(1));
    assert!(embed(&same, 0.0).max_abs_diff(&embed(&same, 1.0)) > 1e-6);
    assert_ne!(time_embedding(0.0, 16), time_embedding(1.0, 16));

    // Smoothing the one-hot row moves the embedding continuously.
    let mut last = f64::INFINITY;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let smooth: Vec<f64> = one_hot.iter().map(|&p| (1.0 - eps) * p + eps / k as f64).collect();
        let d = embed(&Tensor::from_rows(&[smooth]), 0.5).max_abs_diff(&embed(&Tensor::from_rows(&[one_hot.clone()]), 0.5));
        assert!(d < last);
        last = d;
    }
    assert!(last < 1e-3);
}
