#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trendband::engine::{bootstrap_delta_direct, Engine, EngineConfig};
use trendband::multipliers::{multiplier_step, MultiplierState};
use trendband::smoothers::SmootherParams;

/// Runs one random engine instance with explicit innovations and returns the
/// largest gap between online replicate errors and the direct weighted sum.
pub fn online_direct_gap(instance: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
    let eta = rng.random_range(0.02..0.6);
    let params = if instance % 2 == 0 { SmootherParams::ewma(eta) } else { SmootherParams::brown(eta * 0.5) }.unwrap();
    let len: u64 = rng.random_range(20..=300);
    let t0 = rng.random_range(1..len / 4);
    let t1 = rng.random_range(t0 + 1..len / 2);
    let (b1, b2) = (3, 4);
    let cfg = EngineConfig::new(params, 0.1, t0, t1, len, b1, b2).with_seed(instance);
    let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.03).sin() + rng.sample::<f64, _>(StandardNormal)).collect();
    let mut engine = Engine::new(cfg, &x[..t0 as usize]).unwrap();
    let mc = *engine.multiplier_config();
    let transform = engine.transform().clone();

    let reps = b1 + b2;
    let mut latent = vec![MultiplierState::default(); reps];
    let mut v: Vec<Vec<f64>> = vec![Vec::new(); reps];
    let mut lagged = Vec::new();
    let mut gap: f64 = 0.0;
    for (k, &xt) in x[t0 as usize..].iter().enumerate() {
        let xi: Vec<f64> = (0..reps).map(|_| rng.sample(StandardNormal)).collect();
        lagged.push(engine.level());
        for b in 0..reps {
            let (s, vb) = multiplier_step(latent[b], &mc, &transform, xi[b]);
            latent[b] = s;
            v[b].push(vb);
        }
        engine.step_with_innovations(xt, &xi).unwrap();
        let local_t = k as u64 + 1;
        let xs = &x[t0 as usize..];
        for b in 0..reps {
            let direct = bootstrap_delta_direct(&params, &v[b], xs, &lagged, local_t).unwrap();
            let online = engine.replicates()[b].delta();
            gap = gap.max((online - direct).abs());
        }
    }
    gap
}

/// The Monte Carlo setup shared by the coverage experiments.
pub const T0: u64 = 500;
pub const T1: u64 = 900;
pub const T2: u64 = 3500;
pub const B1: usize = 40;
pub const B2: usize = 160;
pub const ALPHA: f64 = 0.1;
pub const REPS: usize = 150;
