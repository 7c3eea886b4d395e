mod common;

use common::{naive_loss, random_matrix, random_params, Example};
use krds_core::linalg::Matrix;
use krds_core::policy::{fused_loss_and_gradients, Ablation, BranchFlags, QNetworkParams, QTarget};
use krds_core::trainer::seeded_rng;
use rand::Rng;

const S: usize = 10;
const H: usize = 8;
const D: usize = 12;
const STEP: f64 = 1e-5;

fn instance(seed: u64) -> (QNetworkParams, Matrix, Vec<Example>) {
    let mut rng = seeded_rng(seed, 0);
    let p = random_params(S, H, D, &mut rng);
    let r = random_matrix(D, D, 0.5, &mut rng);
    let batch = (0..6)
        .map(|_| Example {
            s: (0..S).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            a: rng.gen_range(0..D),
            y: rng.gen_range(-1.0..3.0),
            k: rng.gen_range(-1.0..1.0),
        })
        .collect();
    (p, r, batch)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error over every parameter and every entry of R.
fn max_gradient_error(flags: BranchFlags, seed: u64) -> f64 {
    let (p, r, batch) = instance(seed);
    let targets: Vec<QTarget<'_>> = batch
        .iter()
        .map(|e| QTarget {
            features: &e.s,
            action: e.a,
            target: e.y,
        })
        .collect();
    let a_k: Vec<f64> = batch.iter().map(|e| e.k).collect();
    let (loss, g) = fused_loss_and_gradients(&p, &r, flags, &targets, &a_k).unwrap();
    assert!((loss - naive_loss(&p, &r, flags, &batch)).abs() < 1e-12);

    let mut worst: f64 = 0.0;
    let mut check = |perturb: &dyn Fn(&mut QNetworkParams, &mut Matrix, f64), analytic: f64| {
        let (mut pp, mut rp) = (p.clone(), r.clone());
        perturb(&mut pp, &mut rp, STEP);
        let plus = naive_loss(&pp, &rp, flags, &batch);
        let (mut pm, mut rm) = (p.clone(), r.clone());
        perturb(&mut pm, &mut rm, -STEP);
        let minus = naive_loss(&pm, &rm, flags, &batch);
        worst = worst.max(relative_error(analytic, (plus - minus) / (2.0 * STEP)));
    };
    for i in 0..H * S {
        check(
            &|p, _, h| p.w1.as_mut_slice()[i] += h,
            g.params.w1.as_slice()[i],
        );
    }
    for i in 0..H {
        check(&|p, _, h| p.b1[i] += h, g.params.b1[i]);
    }
    for i in 0..D * H {
        check(
            &|p, _, h| p.w2.as_mut_slice()[i] += h,
            g.params.w2.as_slice()[i],
        );
    }
    for i in 0..D {
        check(&|p, _, h| p.b2[i] += h, g.params.b2[i]);
    }
    if flags.relation {
        for i in 0..D * D {
            check(
                &|_, r, h| r.as_mut_slice()[i] += h,
                g.relation.as_slice()[i],
            );
        }
    }
    worst
}

#[test]
fn full_model_matches_finite_differences() {
    for seed in 0..3 {
        let err = max_gradient_error(Ablation::Full.flags(), seed);
        assert!(err < 1e-4, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn every_ablation_matches_finite_differences() {
    for ablation in [Ablation::Basic, Ablation::Relation, Ablation::Knowledge] {
        let err = max_gradient_error(ablation.flags(), 11);
        assert!(err < 1e-4, "{ablation:?}: max relative error {err:e}");
    }
}

#[test]
fn relation_gradient_only_touches_taken_columns() {
    let (p, r, batch) = instance(5);
    let targets: Vec<QTarget<'_>> = batch
        .iter()
        .map(|e| QTarget {
            features: &e.s,
            action: e.a,
            target: e.y,
        })
        .collect();
    let a_k = vec![0.0; batch.len()];
    let (_, g) = fused_loss_and_gradients(&p, &r, Ablation::Full.flags(), &targets, &a_k).unwrap();
    for c in 0..D {
        if batch.iter().all(|e| e.a != c) {
            assert!((0..D).all(|i| g.relation.get(i, c) == 0.0));
        }
    }
}

#[test]
fn knowledge_values_must_match_batch() {
    let (p, r, batch) = instance(1);
    let targets: Vec<QTarget<'_>> = batch
        .iter()
        .map(|e| QTarget {
            features: &e.s,
            action: e.a,
            target: e.y,
        })
        .collect();
    assert!(fused_loss_and_gradients(&p, &r, Ablation::Full.flags(), &targets, &[0.0]).is_err());
}
