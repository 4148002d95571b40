use super::*;
use crate::landscape::{DoubleWell, GaussianMixture, ParamVector, QuadraticBowl};
use crate::pathopt::{optimize_path, path_max_loss, PathState};
use crate::trainer::SchedulerSpec;

fn minimum<F: ScalarField>(field: &F, coords: &[f64]) -> Minimum {
    Minimum {
        params: ParamVector::new(coords.to_vec()).unwrap(),
        loss: field.value(coords, None),
        grad_norm: 0.0,
        seed: 0,
        converged: true,
        steps: 0,
    }
}

/// Learning rate exactly 0 for the first 1000 steps.
fn frozen_schedule() -> SchedulerSpec {
    SchedulerSpec::new(1000.0, 2000.0, 0.0, 1e-2, 1).unwrap()
}

fn quick() -> MorseConfig {
    MorseConfig {
        path: PathConfig { epochs: 20, ..Default::default() },
        triangle_epochs: 20,
        ..Default::default()
    }
}

fn points(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = d.finite.iter().map(|p| (p.birth, p.death)).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p
}

fn hand_triangle() -> FiltrationComplex {
    FiltrationComplex::from_values(
        vec![0.0, 1.0, 2.0],
        vec![([0, 1], 3.0), ([1, 2], 4.0), ([0, 2], 5.0)],
        vec![([0, 1, 2], 6.0)],
    )
    .unwrap()
}

#[test]
fn hand_reduction() {
    let c = hand_triangle();
    assert!(c.boundary_squares_to_zero().unwrap());
    let d = reduce(&c).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d[0].essential, vec![0.0]);
    assert_eq!(points(&d[0]), vec![(1.0, 3.0), (2.0, 4.0)]);
    assert_eq!(points(&d[1]), vec![(5.0, 6.0)]);
    assert!(d[1].essential.is_empty());
    assert!(d[2].finite.is_empty() && d[2].essential.is_empty());
}

#[test]
fn hand_boundary_columns() {
    let c = hand_triangle();
    // edges are stored in insertion order: [0,1], [1,2], [0,2]
    assert_eq!(c.boundary(1).unwrap(), vec![vec![0, 1], vec![1, 2], vec![0, 2]]);
    assert_eq!(c.boundary(2).unwrap(), vec![vec![0, 1, 2]]);
}

#[test]
fn single_vertex() {
    let c = FiltrationComplex::from_values(vec![2.5], vec![], vec![]).unwrap();
    let d = reduce(&c).unwrap();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].essential, vec![2.5]);
    assert!(d[0].finite.is_empty());
}

#[test]
fn two_vertices_one_edge() {
    let c = FiltrationComplex::from_values(vec![0.5, -1.0], vec![([0, 1], 2.0)], vec![]).unwrap();
    let d = reduce(&c).unwrap();
    assert_eq!(d[0].essential, vec![-1.0]);
    assert_eq!(points(&d[0]), vec![(0.5, 2.0)]);
    assert_eq!(index_r_to_score(&d, 0).unwrap(), 0.75);
}

#[test]
fn loops_without_triangles_are_essential() {
    let c = FiltrationComplex::from_values(
        vec![0.0, 1.0, 2.0],
        vec![([0, 1], 3.0), ([1, 2], 4.0), ([0, 2], 5.0)],
        vec![],
    )
    .unwrap();
    let d = reduce(&c).unwrap();
    assert_eq!(d[1].essential, vec![5.0]);
    assert_eq!(index_r_to_score(&d, 1).unwrap(), 0.0);
}

#[test]
fn scores_by_index() {
    let d = reduce(&hand_triangle()).unwrap();
    assert_eq!(index_r_to_score(&d, 1).unwrap(), 0.5);
    assert_eq!(index_r_to_score(&d, 0).unwrap(), 1.0);
    assert_eq!(index_r_to_score(&d, 2).unwrap(), 0.0);
    assert!(index_r_to_score(&d, 3).is_err());
}

#[test]
fn rejects_bad_complexes() {
    let non_monotone = FiltrationComplex::from_values(vec![0.0, 3.0], vec![([0, 1], 2.0)], vec![]);
    assert!(matches!(non_monotone, Err(Error::NonMonotoneFiltration { .. })));
    let missing_face =
        FiltrationComplex::from_values(vec![0.0, 1.0, 2.0], vec![([0, 1], 3.0)], vec![([0, 1, 2], 4.0)]);
    assert!(missing_face.is_err());
    assert!(FiltrationComplex::from_values(vec![0.0], vec![([0, 0], 1.0)], vec![]).is_err());
}

#[test]
fn zero_persistence_pairs_dropped() {
    let c = FiltrationComplex::from_values(vec![0.0, 1.0], vec![([0, 1], 1.0)], vec![]).unwrap();
    let d = reduce(&c).unwrap();
    assert!(d[0].finite.is_empty());
}

#[test]
fn triangle_counts() {
    let field = QuadraticBowl::new(3);
    let corners = [[1.0, 0.0, 0.5], [0.0, 1.0, 0.5], [-1.0, 0.0, 0.5], [0.0, -1.0, 0.5], [0.3, 0.2, -1.0]];
    let minima: Vec<Minimum> = corners.iter().map(|c| minimum(&field, c)).collect();

    let c3 = build_complex(&minima[..3], &field, 2, &quick()).unwrap();
    assert_eq!([c3.cells(0).len(), c3.cells(1).len(), c3.cells(2).len()], [3, 3, 1]);
    assert!(c3.boundary_squares_to_zero().unwrap());

    let c5 = build_complex(&minima, &field, 2, &quick()).unwrap();
    assert_eq!([c5.cells(0).len(), c5.cells(1).len(), c5.cells(2).len()], [5, 10, 10]);
    assert!(c5.boundary_squares_to_zero().unwrap());
    let d = reduce(&c5).unwrap();
    assert_eq!(d[0].essential.len(), 1);
}

#[test]
fn build_needs_enough_minima() {
    let field = QuadraticBowl::new(2);
    let m = [minimum(&field, &[1.0, 0.0]), minimum(&field, &[0.0, 1.0])];
    assert!(build_complex(&m, &field, 2, &quick()).is_err());
    assert!(build_complex(&m, &field, 3, &quick()).is_err());
    assert_eq!(build_complex(&m, &field, 1, &quick()).unwrap().cells(1).len(), 1);
}

#[test]
fn edge_matches_path_optimizer() {
    let field = GaussianMixture::new(7);
    let known = field.known_minima();
    let (a, b) = (minimum(&field, &known[0].0), minimum(&field, &known[1].0));
    let config = MorseConfig { path: PathConfig { epochs: 100, ..Default::default() }, ..Default::default() };
    let edge = optimize_simplex(&field, &[&a, &b], 8, &config).unwrap();
    let path = PathConfig { n_points: 7, ..config.path.clone() };
    let run = optimize_path(&field, &a.params, &b.params, &path).unwrap();
    assert!((edge.filtration_value - run.max_loss).abs() < 1e-9);
    assert_eq!(edge.sample_points.len(), 8 * 5 + 1);
    assert_eq!(edge.sample_points[0], a.params);
    assert_eq!(edge.sample_points.last().unwrap(), &b.params);
}

#[test]
fn zero_step_keeps_straight_simplex() {
    let frozen = MorseConfig {
        path: PathConfig { scheduler: frozen_schedule(), epochs: 5, refine_every: 0, ..Default::default() },
        triangle_epochs: 5,
        ..Default::default()
    };
    let a = 0.5f64.sqrt();
    let (p, q) = (minimum(&DoubleWell, &[-a]), minimum(&DoubleWell, &[a]));
    let edge = optimize_simplex(&DoubleWell, &[&p, &q], 8, &frozen).unwrap();
    let straight = PathState::straight(&p.params, &q.params, 7).unwrap();
    let (expected, _) = path_max_loss(&DoubleWell, &straight, &frozen.path.alpha_grid).unwrap();
    assert_eq!(edge.filtration_value, expected);

    let field = QuadraticBowl::new(3);
    let corners = [minimum(&field, &[1.0, 0.0, 1.0]), minimum(&field, &[0.0, 1.0, 1.0]), minimum(&field, &[0.0, 0.0, 2.0])];
    let refs: Vec<&Minimum> = corners.iter().collect();
    let tri = optimize_simplex(&field, &refs, 6, &frozen).unwrap();
    // on the flat triangle the bowl peaks at the corner (0, 0, 2)
    assert!((tri.filtration_value - 2.0).abs() < 1e-12);
    for p in &tri.sample_points {
        let x = p.as_slice();
        // the corners span the plane x + y + z = 2
        assert!((x[0] + x[1] + x[2] - 2.0).abs() < 1e-9, "{x:?} left the plane");
    }
}

#[test]
fn bowl_triangle_descends() {
    let field = QuadraticBowl::new(3);
    let s = 3f64.sqrt() / 2.0;
    let corners = [
        minimum(&field, &[1.0, 0.0, 1.0]),
        minimum(&field, &[-0.5, s, 1.0]),
        minimum(&field, &[-0.5, -s, 1.0]),
    ];
    let refs: Vec<&Minimum> = corners.iter().collect();
    let config = MorseConfig {
        path: PathConfig { epochs: 50, ..Default::default() },
        triangle_epochs: 100,
        ..Default::default()
    };
    let tri = optimize_simplex(&field, &refs, 6, &config).unwrap();
    assert_eq!(tri.interior_trace.len(), 100);
    for w in tri.interior_trace.windows(2) {
        assert!(w[1] <= w[0], "interior max rose from {} to {}", w[0], w[1]);
    }
    assert!(tri.interior_trace.last().unwrap() < &tri.interior_trace[0]);
    assert!((tri.filtration_value - 1.0).abs() < 1e-12);
}

#[test]
fn collinear_triangle_is_degenerate() {
    let field = QuadraticBowl::new(2);
    let m = [minimum(&field, &[0.0, 0.0]), minimum(&field, &[1.0, 0.0]), minimum(&field, &[2.0, 0.0])];
    let refs: Vec<&Minimum> = m.iter().collect();
    let frozen = MorseConfig {
        path: PathConfig { scheduler: frozen_schedule(), epochs: 1, refine_every: 0, ..Default::default() },
        triangle_epochs: 1,
        ..Default::default()
    };
    assert!(matches!(optimize_simplex(&field, &refs, 4, &frozen), Err(Error::DegenerateTangent { .. })));
}

#[test]
fn filtration_matches_sample_points() {
    let field = GaussianMixture::new(3);
    let known = field.known_minima();
    let m: Vec<Minimum> = known.iter().take(3).map(|(p, _)| minimum(&field, p)).collect();
    let refs: Vec<&Minimum> = m.iter().collect();
    let tri = optimize_simplex(&field, &refs, 6, &quick()).unwrap();
    let recomputed = tri.sample_points.iter().map(|p| field.value(p.as_slice(), None)).fold(f64::NEG_INFINITY, f64::max);
    assert!((recomputed - tri.filtration_value).abs() < 1e-9);
    assert_eq!(tri.sample_points.len(), 28);
}

#[test]
fn diagrams_json_round_trip() {
    let d = reduce(&hand_triangle()).unwrap();
    let file = DiagramsFile::new(&d, MorseMeta { field: "hand".into(), ..Default::default() });
    let json = serde_json::to_string(&file).unwrap();
    assert!(json.starts_with(r#"{"diagrams":[{"dimension":0,"essential":[{"birth":0.0}],"segments":["#));
    let back: DiagramsFile = serde_json::from_str(&json).unwrap();
    assert_eq!(back.to_diagrams().unwrap(), d);
}
