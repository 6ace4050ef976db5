mod common;

use bilip::extension::{extend, ExtensionConfig, ExtensionProblem};
use bilip::space_gallery::{grid_id, grid_space};
use bilip::VertexId;
use proptest::prelude::*;

fn row(ts: &[usize]) -> Vec<(f64, VertexId)> {
    ts.iter().map(|&t| (t as f64, grid_id(&[t, 4, 4], 9))).collect()
}

#[test]
fn straight_row_stays_near_isometric() {
    let g = grid_space(3, 9, 1.0).unwrap();
    // with r_min at two lattice steps every gap has room for its own bridge
    let config = ExtensionConfig { r_min: Some(2.0), ..ExtensionConfig::default() };
    let p = ExtensionProblem::new(&g, &row(&[0, 3, 8]), config).unwrap();
    let res = extend(&p).unwrap();
    assert!(res.all_passed());
    assert!(res.report.l_measured <= 2.0 * p.l_measured + 1.0, "L' {}", res.report.l_measured);
}

#[test]
fn full_row_is_returned_unchanged() {
    let g = grid_space(3, 9, 1.0).unwrap();
    let all: Vec<usize> = (0..9).collect();
    let p = ExtensionProblem::new(&g, &row(&all), ExtensionConfig::default()).unwrap();
    let res = extend(&p).unwrap();
    assert!(res.all_passed());
    for (t, v) in row(&all) {
        assert_eq!(res.point_at(t), Some(v));
    }
    assert!((res.report.l_measured - 1.0).abs() < 1e-9);
}

#[test]
fn repeated_runs_agree() {
    let g = grid_space(3, 9, 1.0).unwrap();
    let pairs = row(&[0, 1, 3, 7]);
    let first = extend(&ExtensionProblem::new(&g, &pairs, ExtensionConfig::default()).unwrap()).unwrap();
    let second = extend(&ExtensionProblem::new(&g, &pairs, ExtensionConfig::default()).unwrap()).unwrap();
    assert_eq!(first.samples(), second.samples());
    assert_eq!(first.cases, second.cases);
}

#[test]
fn collinear_components_are_bounded() {
    let g = grid_space(3, 9, 1.0).unwrap();
    let p = ExtensionProblem::new(&g, &row(&[0, 1, 2, 4, 8]), ExtensionConfig::default()).unwrap();
    let res = extend(&p).unwrap();
    assert!(!res.component_certificates.is_empty());
    for c in &res.component_certificates {
        assert!(c.passed && c.diam <= c.bound, "[{}, {}]: {} > {}", c.lo, c.hi, c.diam, c.bound);
        let scale = (c.hi - c.lo).max(g.distance(p.value_at(c.lo).unwrap(), p.value_at(c.hi).unwrap()).unwrap());
        assert!(c.diam <= 75.0 * scale);
    }
}

#[test]
fn crossing_sheets_fails_with_a_clause() {
    let (pp, pairs) = common::plane_pair_control();
    let p = ExtensionProblem::new(&pp.space, &pairs, ExtensionConfig::default()).unwrap();
    let err = extend(&p).unwrap_err();
    assert!(err.is_certified_failure(), "{err}");
    assert!(!err.clause().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn row_subsets_extend(mask in 1u16..(1 << 9)) {
        let ts: Vec<usize> = (0..9).filter(|k| mask & (1 << k) != 0).collect();
        prop_assume!(ts.len() >= 2);
        let g = grid_space(3, 9, 1.0).unwrap();
        let pairs = row(&ts);
        let p = ExtensionProblem::new(&g, &pairs, ExtensionConfig::default()).unwrap();
        let res = extend(&p).unwrap();
        prop_assert!(res.all_passed());
        for (t, v) in pairs {
            prop_assert_eq!(res.point_at(t), Some(v));
        }
        prop_assert!(res.report.l_measured <= 10.0 * p.l_measured);
    }
}
