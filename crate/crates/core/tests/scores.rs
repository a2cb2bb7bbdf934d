mod common;

use common::{anchors, density, density_with, memorizer, normal_vec, rng, smooth};
use gendensity::density::LatentPrior;
use gendensity::generator::GeneratorHandle;
use gendensity::paths::{decay_profile, path_density};
use gendensity::scores::{
    decay_score, decay_terms, dip_score, nearest_neighbor_pairs, score_run, AnchorSet, NeighborMetric, ScoreConfig,
    ScoreReport, DEFAULT_RADII,
};
use gendensity::Error;

// numpy prototype (tests/oracle/prototype.py)
const MEM4_MEAN_DIP: f64 = 21.301113217341577;
const MEM4_MEAN_DECAY: f64 = -29.839586988143058;
const SMOOTH4_MEAN_DIP: f64 = -0.06082071040797343;
const SMOOTH4_MEAN_DECAY: f64 = -0.04511982907716483;
const MEM2_DIP: f64 = 22.164926062029004;
const SMOOTH2_DIP: f64 = -0.06250000000037659;

fn run(g: &GeneratorHandle, latents: Vec<Vec<f64>>) -> ScoreReport {
    let set = AnchorSet::new(g, latents, None).unwrap();
    score_run(&density(g), &set, &DEFAULT_RADII, &ScoreConfig::default()).unwrap()
}

#[test]
fn nearest_neighbors_match_brute_force_under_permutation() {
    let g = GeneratorHandle::identity(3);
    let mut r = rng(40);
    let latents: Vec<Vec<f64>> = (0..100).map(|_| normal_vec(&mut r, 3)).collect();
    let set = AnchorSet::new(&g, latents.clone(), None).unwrap();
    let pairs = nearest_neighbor_pairs(&set, NeighborMetric::Output).unwrap();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    for &(i, j) in &pairs {
        let best = (0..100)
            .filter(|&k| k != i)
            .min_by(|&a, &b| dist(&latents[i], &latents[a]).total_cmp(&dist(&latents[i], &latents[b])));
        assert_eq!(Some(j), best);
    }
    // reversing the input order maps pairs through the same permutation
    let rev: Vec<Vec<f64>> = latents.iter().rev().cloned().collect();
    let rev_pairs = nearest_neighbor_pairs(&AnchorSet::new(&g, rev, None).unwrap(), NeighborMetric::Output).unwrap();
    for &(i, j) in &rev_pairs {
        assert_eq!(pairs[99 - i], (99 - i, 99 - j));
    }
}

#[test]
fn two_center_dips() {
    let a = anchors(2);
    let dip = |g: &GeneratorHandle| dip_score(&path_density(&density(g), &a[0], &a[1], 101).unwrap()).unwrap();
    let (m, s) = (dip(&memorizer(2)), dip(&smooth(2)));
    assert!(m - s >= 5.0);
    assert!((m - MEM2_DIP).abs() < 1e-4, "{m}");
    assert!((s - SMOOTH2_DIP).abs() < 1e-4, "{s}");
}

#[test]
fn identity_decay_is_minus_r() {
    let g = GeneratorHandle::identity(2);
    let d = density(&g);
    let p = decay_profile(&d, &[0.0, 0.0], 0, 3.0, 60, false).unwrap().profile;
    let etas = decay_terms(&p, &DEFAULT_RADII);
    assert!((etas[0].unwrap() + 0.5).abs() <= 1e-3);
    assert!((etas[1].unwrap() + 1.0).abs() <= 1e-3);
    let score = decay_score(&[p], &DEFAULT_RADII).unwrap();
    assert!((score.mean + 0.75).abs() <= 1e-3);
}

#[test]
fn memorizer_four_centers_regression() {
    let r = run(&memorizer(4), anchors(4));
    assert!(r.mean_dip > 0.0 && r.mean_decay < 0.0);
    assert!((r.mean_dip - MEM4_MEAN_DIP).abs() < 1e-3, "{}", r.mean_dip);
    assert!((r.mean_decay - MEM4_MEAN_DECAY).abs() < 1e-3, "{}", r.mean_decay);
    assert_eq!(r.n_paths, 4);
    assert_eq!(r.n_excluded_paths, 0);
    // the two outer anchors sit on plateaus on their outward side, which never reach r
    assert_eq!(r.n_excluded_decay_terms, 4);
    let pairs: Vec<(usize, usize)> = r.per_path_dips.iter().map(|p| (p.from, p.to)).collect();
    assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 2)]);
}

#[test]
fn smooth_four_centers_regression() {
    let r = run(&smooth(4), anchors(4));
    assert!((r.mean_dip - SMOOTH4_MEAN_DIP).abs() < 1e-3, "{}", r.mean_dip);
    assert!((r.mean_decay - SMOOTH4_MEAN_DECAY).abs() < 1e-3, "{}", r.mean_decay);
    assert_eq!(r.n_excluded, 0);
    let m = run(&memorizer(4), anchors(4));
    assert!(r.mean_dip.abs() <= 0.1 * m.mean_dip.abs());
    assert!(r.mean_decay.abs() <= 0.1 * m.mean_decay.abs());
}

#[test]
fn report_records_direction_and_sigma() {
    let r = run(&smooth(4), anchors(4));
    for p in &r.per_point_decays {
        assert_eq!(p.direction_index, 0);
        assert!(p.sigma.unwrap() > 1.0);
        assert_eq!(p.etas.len(), 2);
    }
    assert_eq!(r.radii_used, DEFAULT_RADII.to_vec());
}

#[test]
fn anchor_order_does_not_matter() {
    let base = run(&memorizer(4), anchors(4));
    let mut permuted = anchors(4);
    permuted.swap(0, 2);
    permuted.swap(1, 3);
    let other = run(&memorizer(4), permuted);
    assert!((base.mean_dip - other.mean_dip).abs() < 1e-9);
    assert!((base.mean_decay - other.mean_decay).abs() < 1e-9);
}

#[test]
fn constant_log_offsets_cancel() {
    let g = smooth(4);
    let score = |half: f64| {
        let d = density_with(&g, LatentPrior::uniform_box(2, -half, half).unwrap());
        let set = AnchorSet::new(&g, anchors(4), None).unwrap();
        score_run(&d, &set, &DEFAULT_RADII, &ScoreConfig::default()).unwrap()
    };
    let (a, b) = (score(5.0), score(50.0));
    assert!((a.mean_dip - b.mean_dip).abs() < 1e-9);
    assert!((a.mean_decay - b.mean_decay).abs() < 1e-9);
}

#[test]
fn constant_density_pair_has_zero_dip() {
    let g = GeneratorHandle::identity(2);
    let d = density_with(&g, LatentPrior::uniform_box(2, -10.0, 10.0).unwrap());
    let set = AnchorSet::new(&g, vec![vec![0.0, 0.0], vec![1.0, 1.0]], None).unwrap();
    let r = score_run(&d, &set, &DEFAULT_RADII, &ScoreConfig::default()).unwrap();
    assert_eq!(r.mean_dip, 0.0);
    assert!(r.mean_decay.abs() < 1e-9);
}

#[test]
fn labels_reach_the_report() {
    let g = memorizer(4);
    let labels: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    let set = AnchorSet::new(&g, anchors(4), Some(labels)).unwrap();
    let r = score_run(&density(&g), &set, &DEFAULT_RADII, &ScoreConfig::default()).unwrap();
    assert_eq!(r.per_path_dips[2].label.as_deref(), Some("c"));
    assert_eq!(r.per_point_decays[3].label.as_deref(), Some("d"));
}

#[test]
fn empty_and_all_excluded_runs_fail() {
    let g = GeneratorHandle::identity(2);
    let empty = AnchorSet::new(&g, vec![], None).unwrap();
    assert!(score_run(&density(&g), &empty, &DEFAULT_RADII, &ScoreConfig::default()).is_err());

    // two anchors deep in the same plateau: every sample is degenerate
    let m = memorizer(2);
    let a = anchors(2);
    let far = vec![vec![a[0][0] - 2.0, 0.0], vec![a[0][0] - 2.5, 0.0]];
    let set = AnchorSet::new(&m, far, None).unwrap();
    let r = score_run(&density(&m), &set, &DEFAULT_RADII, &ScoreConfig::default());
    assert!(matches!(r, Err(Error::ScoreUndefined(_))), "{r:?}");
}
