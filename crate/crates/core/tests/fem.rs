use wpgcr::fem::{self, assemble, paper_coefficients, BoundaryCondition, PENALTY_FACTOR};
use wpgcr::linalg::cholesky;

fn l2_error(m: usize) -> f64 {
    let sys = assemble(&fem::poisson_manufactured::<f64>(m)).unwrap();
    let u = cholesky(&sys.a_matrix().to_dense()).unwrap().solve(&sys.rhs).unwrap();
    sys.l2_error(&u, fem::manufactured_solution).unwrap()
}

#[test]
fn second_order_in_l2() {
    let errors: Vec<f64> = [4, 8, 16].into_iter().map(l2_error).collect();
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{errors:?}");
    }
}

#[test]
fn divergence_free_convection_gives_a_skew_part() {
    for bc in [BoundaryCondition::Elimination, BoundaryCondition::Penalization { factor: PENALTY_FACTOR }] {
        let sys = assemble(&paper_coefficients::<f64>(8, 1.0, 1.0).with_bc(bc)).unwrap();
        let n = sys.n_matrix.to_dense();
        assert!(n.add(&n.transpose()).unwrap().max_abs() <= 1e-13 * n.max_abs());
        assert_eq!(sys.m_matrix.to_dense().symmetry_defect(), 0.0);
        assert!(cholesky(&sys.m_matrix.to_dense()).is_ok());
    }
}

#[test]
fn dof_counts_follow_the_boundary_treatment() {
    let elim = assemble(&paper_coefficients::<f64>(10, 1.0, 1.0)).unwrap();
    assert_eq!(elim.dof_count, 81);
    let pen = assemble(&paper_coefficients::<f64>(10, 1.0, 1.0).with_bc(BoundaryCondition::Penalization { factor: PENALTY_FACTOR }))
        .unwrap();
    assert_eq!(pen.dof_count, 121);
    assert_eq!(elim.to_vertex_values(&vec![1.0; 81]).unwrap().iter().filter(|&&v| v == 0.0).count(), 40);
}

#[test]
fn no_convection_leaves_n_empty() {
    let sys = assemble(&paper_coefficients::<f64>(6, 1.0, 1.0).without_convection()).unwrap();
    assert_eq!(sys.n_matrix.to_dense().max_abs(), 0.0);
}

#[test]
fn mesh_orientation_and_validation() {
    let mesh = fem::build_mesh::<f64>(5).unwrap();
    assert_eq!(mesh.triangles.len(), 50);
    assert!((0..mesh.triangles.len()).all(|t| mesh.signed_area(t) > 0.0));
    assert_eq!(mesh.lattice(mesh.vertex_index(3, 4)), (3, 4));
    assert!(fem::build_mesh::<f64>(1).is_err());
}

#[test]
fn single_precision_assembly() {
    let sys = assemble(&paper_coefficients::<f32>(6, 1.0, 1.0)).unwrap();
    let wide = assemble(&paper_coefficients::<f64>(6, 1.0, 1.0)).unwrap();
    let diff = sys.m_matrix.to_dense().map(f64::from).sub(&wide.m_matrix.to_dense()).unwrap().max_abs();
    assert!(diff <= 1e-5 * wide.m_matrix.to_dense().max_abs());
}

#[test]
fn skew_part_has_zero_energy_and_m_is_positive() {
    use rand::{Rng, SeedableRng};
    let sys = assemble(&paper_coefficients::<f64>(10, 1.0, 1.0)).unwrap();
    let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x: Vec<f64> = (0..sys.dof_count).map(|_| g.gen_range(-1.0..1.0)).collect();
        let nx = sys.n_matrix.spmv(&x).unwrap();
        let mx = sys.m_matrix.spmv(&x).unwrap();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        assert!(wpgcr::linalg::vector::dot(&x, &nx).abs() <= 1e-13 * xx);
        assert!(wpgcr::linalg::vector::dot(&x, &mx) > 0.0);
    }
    let n = sys.n_matrix.to_dense();
    assert_eq!(n.add(&n.transpose()).unwrap().max_abs(), 0.0);
}

#[test]
fn skew_radius_is_stable_under_refinement() {
    use wpgcr::bounds::{spectral_radius_skew, HermitianSplit};
    let rho: Vec<f64> = [10, 20, 30]
        .into_iter()
        .map(|m| {
            let sys = assemble(&paper_coefficients::<f64>(m, 1.0, 1.0)).unwrap();
            spectral_radius_skew(&HermitianSplit::from_parts(&sys.m_matrix, &sys.n_matrix).unwrap()).unwrap()
        })
        .collect();
    let spread = rho.iter().cloned().fold(f64::MIN, f64::max) - rho.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.03, "{rho:?}");
}

#[test]
fn error_drops_by_at_least_three_and_a_half() {
    assert!(l2_error(8) / l2_error(16) >= 3.5);
}
