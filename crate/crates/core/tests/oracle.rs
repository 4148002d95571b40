use lossbar::barcode::bottleneck_distance;
use lossbar::landscape::{make_builtin, BuiltinField};
use lossbar::oracle::{grid_sample, sublevel_persistence, ScalarGrid};
use lossbar::ScalarField;
use proptest::prelude::*;

/// Elder-rule pairs of a 1-D sequence by definition: sample `i` dies at the
/// lowest interval maximum reaching any older sample.
fn pairs_1d(v: &[f64]) -> Vec<(f64, f64)> {
    let older = |j: usize, i: usize| (v[j], j) < (v[i], i);
    let mut pairs: Vec<(f64, f64)> = (0..v.len())
        .filter_map(|i| {
            let death = (0..v.len())
                .filter(|&j| older(j, i))
                .map(|j| v[i.min(j)..=i.max(j)].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            (death.is_finite() && death > v[i]).then_some((v[i], death))
        })
        .collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pairs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn one_dimensional_pairs_follow_the_definition(raw in proptest::collection::vec(0u8..12, 2..40)) {
        let v: Vec<f64> = raw.iter().map(|&x| x as f64).collect();
        let grid = ScalarGrid::new(v.clone(), vec![(0.0, 1.0)], vec![v.len()]).unwrap();
        let d = &sublevel_persistence(&grid)[0];
        let mut ours: Vec<(f64, f64)> = d.finite.iter().map(|p| (p.birth, p.death)).collect();
        ours.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(ours, pairs_1d(&v));
        prop_assert_eq!(d.essential.clone(), vec![v.iter().cloned().fold(f64::INFINITY, f64::min)]);
    }

    #[test]
    fn essential_class_is_born_at_grid_minimum(
        (rows, cols, values) in (2usize..12, 2usize..12)
            .prop_flat_map(|(r, c)| (Just(r), Just(c), proptest::collection::vec(-50.0f64..50.0, r * c))),
    ) {
        let grid = ScalarGrid::new(values.clone(), vec![(0.0, 1.0), (0.0, 1.0)], vec![rows, cols]).unwrap();
        let d = sublevel_persistence(&grid);
        prop_assert_eq!(d.len(), 2);
        prop_assert_eq!(d[0].essential.clone(), vec![values.iter().cloned().fold(f64::INFINITY, f64::min)]);
        for p in &d[0].finite {
            prop_assert!(p.death > p.birth);
        }
    }
}

fn max_gradient(field: &BuiltinField, grid: &ScalarGrid) -> f64 {
    let r = grid.resolution();
    let mut worst: f64 = 0.0;
    for i in 0..r[0] {
        for j in 0..*r.get(1).unwrap_or(&1) {
            let mut theta = vec![grid.coordinate(0, i)];
            if r.len() == 2 {
                theta.push(grid.coordinate(1, j));
            }
            let g = field.gradient(&theta, None);
            worst = worst.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    worst
}

#[test]
fn refinement_moves_points_less_than_lipschitz_bound() {
    let cases = [("double_well_1d", 0, 257), ("gaussian_mixture_2d", 1, 65), ("gaussian_mixture_2d", 6, 65)];
    for (name, seed, res) in cases {
        let field = make_builtin(name, seed).unwrap();
        let bounds = field.default_box();
        let coarse_res = vec![res; bounds.len()];
        let fine_res = vec![2 * res - 1; bounds.len()];
        let coarse = grid_sample(&field, &bounds, &coarse_res).unwrap();
        let fine = grid_sample(&field, &bounds, &fine_res).unwrap();
        let spacing = coarse.spacing().into_iter().fold(0.0, f64::max);
        let bound = 2.0 * spacing * max_gradient(&field, &fine);
        let change = bottleneck_distance(&sublevel_persistence(&coarse)[0], &sublevel_persistence(&fine)[0]);
        assert!(change < bound, "{name} seed {seed}: moved {change} with bound {bound}");
    }
}

#[test]
fn double_well_grid_pins_the_hump() {
    let field = make_builtin("double_well_1d", 0).unwrap();
    let grid = grid_sample(&field, &[(-2.0, 2.0)], &[4097]).unwrap();
    let d = &sublevel_persistence(&grid)[0];
    assert_eq!(d.finite.len(), 1);
    assert!((d.finite[0].birth + 0.25).abs() < 1e-6);
    assert_eq!(d.finite[0].death, 0.0);
}
