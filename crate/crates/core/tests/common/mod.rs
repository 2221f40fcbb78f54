#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reachset::synthetic::{generate_trails, Generator, SyntheticSpec};
use reachset::{ModelParams, Trail};

pub const THRESHOLDS: [f64; 3] = [0.8, 0.99, 1.0];

/// Model with parameters drawn around typical player kinematics.
pub fn random_model(rng: &mut impl Rng) -> ModelParams {
    match rng.gen_range(0..5) {
        0 => ModelParams::ConstantSpeed { v_max: rng.gen_range(4.0..12.0) },
        1 => ModelParams::ConstantAccel { a_max: rng.gen_range(2.0..30.0) },
        2 => ModelParams::CappedAccel {
            a_max: rng.gen_range(2.0..30.0),
            v_max: rng.gen_range(4.0..12.0),
        },
        3 => ModelParams::TwoSegment {
            t_inert: rng.gen_range(0.0..0.6),
            keep_initial: rng.gen(),
            v_const: Some(rng.gen_range(2.0..12.0)),
            a_max: None,
            v_max: None,
        },
        _ => ModelParams::TwoSegment {
            t_inert: rng.gen_range(0.0..0.6),
            keep_initial: true,
            v_const: None,
            a_max: Some(rng.gen_range(2.0..30.0)),
            v_max: Some(rng.gen_range(4.0..12.0)),
        },
    }
}

/// Synthetic trails from a random generator with a few outliers.
pub fn random_trails(rng: &mut impl Rng, n: usize) -> Vec<Trail> {
    let generator = match rng.gen_range(0..3) {
        0 => Generator::ConstantSpeed { v_true: rng.gen_range(5.0..10.0) },
        1 => Generator::CappedAccel {
            a_true: rng.gen_range(5.0..25.0),
            v_true: rng.gen_range(5.0..10.0),
        },
        _ => Generator::TwoSegment {
            t_inert_true: rng.gen_range(0.0..0.5),
            v_final_true: rng.gen_range(5.0..10.0),
        },
    };
    let spec = SyntheticSpec::new(generator, n, rng.gen())
        .with_outliers(rng.gen_range(0.0..0.05), rng.gen_range(0.5..5.0));
    generate_trails(&spec).expect("valid synthetic spec").trails
}

/// One randomized validation instance: model, 10–500 trails, threshold.
pub fn random_instance(seed: u64) -> (ModelParams, Vec<Trail>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(10..=500);
    let trails = random_trails(&mut rng, n);
    let model = random_model(&mut rng);
    let h = THRESHOLDS[rng.gen_range(0..THRESHOLDS.len())];
    (model, trails, h)
}
