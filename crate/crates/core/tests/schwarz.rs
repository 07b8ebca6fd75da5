mod common;

use common::*;
use wpgcr::fem::{assemble, paper_coefficients, AssembledCdr};
use wpgcr::linalg::vector::{dot, norm2};
use wpgcr::linalg::{densify, LinearOperator};
use wpgcr::schwarz::{
    build_partition, build_preconditioner, condition_number, Layout, PartitionSpec, SchwarzMode, SchwarzPreconditioner,
};

fn problem(m: usize) -> AssembledCdr<f64> {
    assemble(&paper_coefficients::<f64>(m, 1.0, 1.0)).unwrap()
}

fn two_level(sys: &AssembledCdr<f64>, spec: PartitionSpec) -> SchwarzPreconditioner<f64> {
    let maps = build_partition(&sys.dof_lattice(), &sys.m_matrix, &spec).unwrap();
    build_preconditioner(&sys.m_matrix, &maps, SchwarzMode::TwoLevelSym).unwrap()
}

#[test]
fn grid_partition_covers_every_dof() {
    let sys = problem(12);
    for overlap in 0..3 {
        let maps = build_partition(&sys.dof_lattice(), &sys.m_matrix, &PartitionSpec::grid(3, 2).with_overlap(overlap)).unwrap();
        assert_eq!(maps.len(), 6);
        assert!(maps.multiplicity.iter().all(|&c| c >= 1));
        let total: usize = maps.subdomains.iter().map(Vec::len).sum();
        assert_eq!(total, maps.multiplicity.iter().sum::<usize>());
        if overlap == 0 {
            assert_eq!(total, sys.dof_count);
            assert_eq!(maps.k0, 1);
        } else {
            assert!(maps.k0 >= 2 && maps.k0 <= 4);
        }
    }
}

#[test]
fn overlap_grows_subdomains_monotonically() {
    let sys = problem(12);
    let sizes = |ov| {
        build_partition(&sys.dof_lattice(), &sys.m_matrix, &PartitionSpec::strips(4).with_overlap(ov))
            .unwrap()
            .subdomains
            .iter()
            .map(Vec::len)
            .collect::<Vec<_>>()
    };
    let (a, b) = (sizes(1), sizes(2));
    assert!(a.iter().zip(&b).all(|(x, y)| x < y));
}

#[test]
fn membership_json_lists_every_dof() {
    let sys = problem(6);
    let maps = build_partition(&sys.dof_lattice(), &sys.m_matrix, &PartitionSpec::strips(2)).unwrap();
    let json = maps.to_json();
    assert_eq!(json["memberships"].as_array().unwrap().len(), sys.dof_count);
    assert_eq!(json["k0"], maps.k0);
}

#[test]
fn coarse_basis_is_a_partition_of_unity() {
    let sys = problem(12);
    let h = two_level(&sys, PartitionSpec::grid(2, 2));
    let coarse = h.coarse().unwrap();
    assert_eq!(coarse.dim(), 4);
    let mut sum = vec![0.0; sys.dof_count];
    for column in coarse.dense_basis(sys.dof_count) {
        sum.iter_mut().zip(column).for_each(|(s, c)| *s += c);
    }
    assert!(sum.iter().all(|s| (s - 1.0).abs() < 1e-14));
}

#[test]
fn projection_is_idempotent_and_m_orthogonal_to_the_coarse_space() {
    let sys = problem(12);
    let h = two_level(&sys, PartitionSpec::grid(2, 2).with_overlap(2));
    let coarse = h.coarse().unwrap();
    let mut g = rng(7);
    for _ in 0..5 {
        let x = random_vector(&mut g, sys.dof_count);
        let px = h.project(&x);
        let ppx = h.project(&px);
        assert!(rel_diff(&ppx, &px) <= 1e-12);
        let r0mpx = coarse.restrict(&sys.m_matrix.spmv(&px).unwrap());
        assert!(norm2(&r0mpx) <= 1e-12 * norm2(&x) * sys.m_matrix.to_dense().max_abs());
    }
}

#[test]
fn symmetric_modes_are_symmetric_positive_definite() {
    let sys = problem(10);
    for mode in [SchwarzMode::OneLevelSym, SchwarzMode::TwoLevelSym] {
        let maps = build_partition(&sys.dof_lattice(), &sys.m_matrix, &PartitionSpec::grid(2, 2)).unwrap();
        let h = build_preconditioner(&sys.m_matrix, &maps, mode).unwrap();
        let hd = densify(&h).unwrap();
        assert!(hd.symmetry_defect() <= 1e-12, "{mode:?}");
        let mut g = rng(8);
        let x = random_vector(&mut g, sys.dof_count);
        assert!(dot(&x, &h.apply_vec(&x)) > 0.0);
        assert!(h.clone().into_handle().is_hermitian());
    }
}

#[test]
fn nonsymmetric_mode_is_not_hermitian() {
    let sys = problem(10);
    let a = sys.a_matrix();
    let maps = build_partition(&sys.dof_lattice(), &a, &PartitionSpec::strips(2)).unwrap();
    let h = build_preconditioner(&a, &maps, SchwarzMode::OneLevelNonsym).unwrap();
    assert!(densify(&h).unwrap().symmetry_defect() > 1e-6);
    assert!(!h.into_handle().is_hermitian());
}

#[test]
fn coarse_space_keeps_the_condition_number_flat() {
    let sys = problem(24);
    let mut one = Vec::new();
    let mut two = Vec::new();
    for (p, q) in [(2, 2), (4, 4)] {
        let spec = PartitionSpec::grid(p, q).with_overlap(2);
        let maps = build_partition(&sys.dof_lattice(), &sys.m_matrix, &spec).unwrap();
        let h1 = build_preconditioner(&sys.m_matrix, &maps, SchwarzMode::OneLevelSym).unwrap();
        one.push(condition_number(&h1, &sys.m_matrix).unwrap());
        two.push(condition_number(&two_level(&sys, spec), &sys.m_matrix).unwrap());
    }
    assert!(two[1] < one[1]);
    assert!(two[1] / two[0] < one[1] / one[0]);
}

#[test]
fn layout_serializes_in_snake_case() {
    let json = serde_json::to_string(&Layout::Grid { p: 2, q: 3 }).unwrap();
    assert_eq!(json, r#"{"grid":{"p":2,"q":3}}"#);
}

#[test]
fn two_level_operator_passes_weight_validation() {
    let sys = problem(10);
    let h = two_level(&sys, PartitionSpec::grid(2, 2));
    assert!(wpgcr::weighted::WeightOperator::new(std::sync::Arc::new(h)).is_ok());
}
