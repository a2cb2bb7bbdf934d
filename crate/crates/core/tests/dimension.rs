mod common;

use common::{fixture, memorizer, normal_vec, rng, smooth};
use gendensity::differentiation::FdConfig;
use gendensity::dimension::{mean_spectrum, pointcloud_svd, suggested_dimension};
use gendensity::generator::GeneratorHandle;
use gendensity::spectrum::RankPolicy;
use nalgebra::DMatrix;

// numpy.linalg.svd of the committed matrix (tests/oracle/make_fixtures.py)
const LINEAR6X3_SIGMA: [f64; 3] = [3.3086000015052286, 1.8029302855744471, 0.6330568435828229];

fn draws(seed: u64, count: usize, m: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..count).map(|_| normal_vec(&mut r, m)).collect()
}

#[test]
fn constant_jacobian_mean_is_exact() {
    let g = GeneratorHandle::from_source(&fixture("linear6x3.json")).unwrap();
    let s = mean_spectrum(&g, &draws(50, 50, 3), 3, &FdConfig::default(), &RankPolicy::default(), true).unwrap();
    for (a, b) in s.mean_singular_values.iter().zip(LINEAR6X3_SIGMA) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
    for per in s.per_point_spectra.unwrap() {
        assert!(common::max_abs_diff(&per, &LINEAR6X3_SIGMA) <= 1e-9);
    }
    assert_eq!(s.suggested_dimension, 3);
}

#[test]
fn identity_five() {
    let g = GeneratorHandle::identity(5);
    let s = mean_spectrum(&g, &draws(51, 10, 5), 5, &FdConfig::default(), &RankPolicy::default(), false).unwrap();
    assert!(s.mean_singular_values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    assert_eq!(s.suggested_dimension, 5);
}

#[test]
fn memorizer_looks_lower_dimensional_than_smooth_map() {
    let pts = draws(52, 200, 2);
    let summary =
        |g: &GeneratorHandle| mean_spectrum(g, &pts, 2, &FdConfig::default(), &RankPolicy::default(), false).unwrap();
    let (m, s) = (summary(&memorizer(2)), summary(&smooth(2)));
    assert_eq!(m.suggested_dimension, 1);
    assert_eq!(s.suggested_dimension, 2);
    assert!(m.mean_singular_values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn overflowing_points_are_skipped() {
    let g = GeneratorHandle::linear(DMatrix::from_element(1, 1, 1e308));
    let pts = vec![vec![0.0], vec![10.0], vec![-10.0]];
    let s = mean_spectrum(&g, &pts, 1, &FdConfig::default(), &RankPolicy::default(), false).unwrap();
    assert_eq!((s.n_points, s.n_skipped), (1, 2));
}

#[test]
fn isotropic_cloud_is_flat() {
    let s = pointcloud_svd(&draws(53, 10_000, 4)).unwrap();
    let (hi, lo) = (s[0], s[3]);
    assert!(hi / lo <= 1.05, "{s:?}");
}

#[test]
fn rank_two_cloud_in_ten_dimensions() {
    let mut r = rng(54);
    let basis: Vec<Vec<f64>> = (0..2).map(|_| normal_vec(&mut r, 10)).collect();
    let offset = normal_vec(&mut r, 10);
    let cloud: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let c = normal_vec(&mut r, 2);
            (0..10).map(|i| offset[i] + c[0] * basis[0][i] + c[1] * basis[1][i]).collect()
        })
        .collect();
    let s = pointcloud_svd(&cloud).unwrap();
    assert_eq!(suggested_dimension(&s, RankPolicy::default().relative_threshold()), 2);
}

#[test]
fn translation_and_rotation_leave_values_unchanged() {
    let cloud = draws(55, 300, 3);
    let base = pointcloud_svd(&cloud).unwrap();
    let shifted: Vec<Vec<f64>> = cloud.iter().map(|z| z.iter().map(|v| v + 7.5).collect()).collect();
    assert!(common::max_abs_diff(&pointcloud_svd(&shifted).unwrap(), &base) < 1e-9);
    let q = DMatrix::from_vec(3, 3, normal_vec(&mut rng(56), 9)).qr().q();
    let rotated: Vec<Vec<f64>> =
        cloud.iter().map(|z| (&q * nalgebra::DVector::from_row_slice(z)).iter().copied().collect()).collect();
    assert!(common::max_abs_diff(&pointcloud_svd(&rotated).unwrap(), &base) < 1e-9);
}
