use rrsplit::harness::{energy_audit, run_study, AuditConfig, MeshPolicy, Norm, StudyConfig};
use rrsplit::{slanted_interface_mesh, uniform_split_mesh, CaseName, SchemeOrder, Subdomain};

#[test]
fn mesh_families_are_valid() {
    for n in [2, 5, 16] {
        let mesh = uniform_split_mesh(n).unwrap();
        assert!(mesh.validate().is_empty());
        assert!(
            (mesh.subdomain_area(Subdomain::Fluid) + mesh.subdomain_area(Subdomain::Solid) - 1.0)
                .abs()
                < 1e-13
        );
        assert_eq!(mesh.n_interface(), n + 1);
    }
    for level in 0..4 {
        let mesh = slanted_interface_mesh(level).unwrap();
        assert!(mesh.validate().is_empty(), "level {level}");
        assert!((mesh.interface_length() - mesh.geometry.length()).abs() < 1e-12);
    }
}

#[test]
fn slanted_policy_refines_with_dt() {
    let coarse = MeshPolicy::SlantedLevels.build(0.25).unwrap();
    let fine = MeshPolicy::SlantedLevels.build(0.125).unwrap();
    assert_eq!(fine.n_interface() - 1, 2 * (coarse.n_interface() - 1));
}

#[test]
fn zero_case_stays_zero() {
    let table = run_study(&StudyConfig::new(CaseName::Zero, vec![0.25, 0.125])).unwrap();
    for norm in [Norm::L2FinalU, Norm::L2FinalW] {
        assert!(table.errors(norm).unwrap().iter().all(|e| *e == 0.0));
    }
}

/// Reference final-time U rates on the uniform parabolic-parabolic case: slow
/// pre-asymptotic start, then superlinear once the time error dominates.
const PP_U_RATES: [f64; 4] = [-0.30, 0.22, 1.08, 2.43];

#[test]
fn uniform_parabolic_rates_follow_reference() {
    let dts: Vec<f64> = (2..=6).map(|k| 0.5f64.powi(k)).collect();
    let table = run_study(&StudyConfig::new(CaseName::PpUniform, dts)).unwrap();
    assert_eq!(table.failures().count(), 0);
    let rates: Vec<f64> = table
        .rates(Norm::L2FinalU)
        .unwrap()
        .into_iter()
        .flatten()
        .collect();
    assert_eq!(rates.len(), PP_U_RATES.len());
    for (ours, reference) in rates.iter().zip(PP_U_RATES) {
        assert!((ours - reference).abs() < 0.1, "{rates:?}");
    }
}

#[test]
fn study_output_is_reproducible() {
    let cfg = StudyConfig::new(CaseName::PhUniform, vec![0.25, 0.125]);
    assert_eq!(
        run_study(&cfg).unwrap().to_csv_string(),
        run_study(&cfg).unwrap().to_csv_string()
    );
}

#[test]
fn audit_is_seed_deterministic() {
    let cfg = AuditConfig::new(SchemeOrder::Newmark, 0.1, 2.0, 9);
    let a = energy_audit(&cfg).unwrap();
    let b = energy_audit(&cfg).unwrap();
    assert_eq!(a.ledger.z, b.ledger.z);
    assert!(a.max_relative_defect <= 1e-10);
}
