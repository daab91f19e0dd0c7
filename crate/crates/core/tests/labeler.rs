use nalgebra::{Rotation3, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactile_surface::geometry::{poisson_disk_sample, shapes, Point3, SampleCloud, SurfaceSample, Vector3};
use tactile_surface::labeler::{
    classify_point, delta_loss_23, kmeans, label_cloud, local_curvature, read_labeled_ply, write_labeled_csv,
    write_labeled_ply, CurvatureResult, LabelerConfig, SurfaceLabel,
};

fn cap_points(n: usize, geodesic_radius: f64, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zmin = geodesic_radius.cos();
    (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(zmin..=1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).max(0.0).sqrt();
            Point3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Covariance eigenvalues through nalgebra's symmetric eigensolver.
fn oracle_curvature(points: &[Point3]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.coords).sum::<Vector3>() / n;
    let mut cov = nalgebra::Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n - 1.0;
    let ev = SymmetricEigen::new(cov).eigenvalues;
    ev.min() / ev.sum()
}

#[test]
fn sphere_cap_curvature_matches_dense_oracle() {
    let oracle = oracle_curvature(&cap_points(100_000, 0.3, 11));
    for seed in 0..5 {
        let c = local_curvature(&cap_points(500, 0.3, seed), 6).unwrap();
        let rel = (c.curvature - oracle).abs() / oracle;
        assert!(rel < 0.10, "seed {seed}: {} vs {oracle} ({rel})", c.curvature);
    }
}

fn repeated(vs: &[Vector3], n: usize) -> Vec<Vector3> {
    vs.iter().flat_map(|v| std::iter::repeat_n(*v, n)).collect()
}

#[test]
fn kmeans_worked_examples() {
    let two = repeated(&[Vector3::x(), Vector3::y()], 25);
    assert!(kmeans(&two, 2, 3, 50, 0).unwrap().loss.abs() < 1e-15);
    let three = repeated(&[Vector3::x(), Vector3::y(), Vector3::z()], 50);
    assert!(kmeans(&three, 3, 3, 50, 0).unwrap().loss.abs() < 1e-15);
    assert!((kmeans(&three, 2, 3, 50, 0).unwrap().loss - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn delta_loss_worked_examples() {
    let cfg = LabelerConfig::default();
    assert!(delta_loss_23(&repeated(&[Vector3::x(), Vector3::z()], 40), &cfg, 3).unwrap() < 1e-12);
    let corner = repeated(&[Vector3::x(), Vector3::y(), Vector3::z()], 50);
    assert!((delta_loss_23(&corner, &cfg, 3).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(delta_loss_23(&repeated(&[Vector3::z()], 9), &cfg, 3).unwrap(), 0.0);
}

#[test]
fn single_plane_is_all_flat() {
    let cloud = poisson_disk_sample(&shapes::plane(1.0), 0.02, 4).unwrap();
    let (labeled, _) = label_cloud(&cloud, &LabelerConfig::default(), 4).unwrap();
    assert_eq!(labeled.len(), cloud.len());
    assert_eq!(labeled.curvatures.len(), cloud.len());
    assert!(labeled.labels.iter().all(|&l| l == SurfaceLabel::Flat));
}

#[test]
fn parallel_labeling_matches_single_thread() {
    let cloud = poisson_disk_sample(&shapes::cube(1.0), 0.04, 8).unwrap();
    let cfg = LabelerConfig::default();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| label_cloud(&cloud, &cfg, 8).unwrap().0);
    let multi = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| label_cloud(&cloud, &cfg, 8).unwrap().0);
    assert_eq!(single, multi);
}

#[test]
fn thin_neighborhoods_inherit_nearest_label() {
    let mut samples: Vec<SurfaceSample> = (0..100)
        .map(|i| SurfaceSample {
            position: Point3::new((i % 10) as f64 * 0.02, (i / 10) as f64 * 0.02, 0.0),
            normal: Vector3::z(),
        })
        .collect();
    samples.push(SurfaceSample {
        position: Point3::new(5.0, 5.0, 5.0),
        normal: Vector3::x(),
    });
    let cloud = SampleCloud::new(samples, 0.02).unwrap();
    let (labeled, report) = label_cloud(&cloud, &LabelerConfig::default(), 0).unwrap();
    assert_eq!(report.fallbacks.len(), 1);
    assert_eq!(report.fallbacks[0].0, 100);
    assert_eq!(labeled.labels[100], SurfaceLabel::Flat);
    assert!(labeled.curvatures[100].is_none());
}

#[test]
fn all_thin_neighborhoods_is_an_error() {
    let samples = (0..5)
        .map(|i| SurfaceSample {
            position: Point3::new(i as f64, 0.0, 0.0),
            normal: Vector3::z(),
        })
        .collect();
    let cloud = SampleCloud::new(samples, 0.01).unwrap();
    assert!(label_cloud(&cloud, &LabelerConfig::default(), 0).is_err());
}

#[test]
fn labeled_cloud_roundtrips_through_ply_and_writes_csv() {
    let cloud = poisson_disk_sample(&shapes::cube(1.0), 0.05, 2).unwrap();
    let (labeled, _) = label_cloud(&cloud, &LabelerConfig::default(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("labels.ply");
    write_labeled_ply(&labeled, &ply).unwrap();
    let back = read_labeled_ply(&ply).unwrap();
    assert_eq!(back.labels, labeled.labels);
    assert_eq!(back.cloud.samples(), labeled.cloud.samples());
    for (a, b) in back.curvatures.iter().zip(&labeled.curvatures) {
        assert_eq!(a.map(|c| c.curvature), b.map(|c| c.curvature));
    }
    let csv_path = dir.path().join("labels.csv");
    write_labeled_csv(&labeled, &csv_path).unwrap();
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["index", "x", "y", "z", "curvature", "label"]
    );
    assert_eq!(rdr.records().count(), labeled.len());
}

#[test]
fn three_clusters_never_lose_to_two_on_cube_corners() {
    let cloud = poisson_disk_sample(&shapes::cube(1.0), 0.02, 5).unwrap();
    let samples = cloud.samples();
    let grid = tactile_surface::geometry::NeighborGrid::new(&cloud, 0.08).unwrap();
    for i in (0..samples.len()).step_by(37) {
        let normals: Vec<Vector3> = grid.query(i).unwrap().iter().map(|&j| samples[j].normal).collect();
        if normals.len() < 3 {
            continue;
        }
        let l2 = kmeans(&normals, 2, 3, 50, i as u64).unwrap().loss;
        let l3 = kmeans(&normals, 3, 3, 50, i as u64).unwrap().loss;
        assert!(l3 <= l2 + 1e-12, "point {i}: {l3} > {l2}");
    }
}

fn point_set() -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 6..40)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
}

fn unit_vectors() -> impl Strategy<Value = Vec<Vector3>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..30).prop_map(|v| {
        v.into_iter()
            .map(|(x, y, z)| Vector3::new(x, y, z + 1e-3).normalize())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn curvature_stays_in_range(points in point_set()) {
        let c = local_curvature(&points, 6).unwrap();
        prop_assert!((0.0..=1.0 / 3.0).contains(&c.curvature));
        let [s1, s2, s3] = c.singular_values;
        prop_assert!(s1 >= s2 && s2 >= s3 && s3 >= 0.0);
    }

    #[test]
    fn curvature_is_scale_invariant(points in point_set(), s in 0.01f64..100.0) {
        let a = local_curvature(&points, 6).unwrap().curvature;
        let scaled: Vec<Point3> = points.iter().map(|p| Point3::from(p.coords * s)).collect();
        let b = local_curvature(&scaled, 6).unwrap().curvature;
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn curvature_is_rotation_invariant(points in point_set(), axis in (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0), angle in 0.0f64..6.3) {
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(axis.0, axis.1, axis.2)), angle);
        let a = local_curvature(&points, 6).unwrap();
        let rotated: Vec<Point3> = points.iter().map(|p| rot * p).collect();
        let b = local_curvature(&rotated, 6).unwrap();
        prop_assert!((a.curvature - b.curvature).abs() < 1e-9);
        for k in 0..3 {
            prop_assert!((a.singular_values[k] - b.singular_values[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn delta_loss_is_rotation_invariant(normals in unit_vectors(), angle in 0.0f64..6.3) {
        let cfg = LabelerConfig::default();
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
        let rotated: Vec<Vector3> = normals.iter().map(|n| rot * n).collect();
        // same seed, so the same k-means++ picks and the same Lloyd trajectory up to rotation
        let a = delta_loss_23(&normals, &cfg, 5).unwrap();
        let b = delta_loss_23(&rotated, &cfg, 5).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn partition_is_monotone_in_curvature(normals in unit_vectors(), mut levels in prop::collection::vec(0.0f64..1.0 / 3.0, 2..12)) {
        let cfg = LabelerConfig::default();
        levels.sort_by(f64::total_cmp);
        let rank = |l: SurfaceLabel| match l {
            SurfaceLabel::Flat => 0,
            SurfaceLabel::Curve => 1,
            SurfaceLabel::Edge | SurfaceLabel::Corner => 2,
        };
        let labels: Vec<SurfaceLabel> = levels
            .iter()
            .map(|&c| {
                let cr = CurvatureResult { singular_values: [1.0; 3], curvature: c };
                classify_point(&cr, &normals, &cfg, 9).unwrap()
            })
            .collect();
        for w in labels.windows(2) {
            prop_assert!(rank(w[0]) <= rank(w[1]));
        }
        let hard: Vec<_> = labels.iter().filter(|l| rank(**l) == 2).collect();
        prop_assert!(hard.windows(2).all(|w| w[0] == w[1]));
    }
}
