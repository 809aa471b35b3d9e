//! Scenarios shipped inside the binary, one or more per acceptance group.

pub const SCENARIOS: &[(&str, &str)] = &[
    ("backend_3d", include_str!("../scenarios/backend_3d.json")),
    ("bounds_sandwich", include_str!("../scenarios/bounds_sandwich.json")),
    ("contour_exp", include_str!("../scenarios/contour_exp.json")),
    ("coupled_nu", include_str!("../scenarios/coupled_nu.json")),
    ("duality_dense", include_str!("../scenarios/duality_dense.json")),
    ("h0_structure", include_str!("../scenarios/h0_structure.json")),
    ("identities_checkerboard", include_str!("../scenarios/identities_checkerboard.json")),
    ("null_t_3d", include_str!("../scenarios/null_t_3d.json")),
    ("null_t_elasticity", include_str!("../scenarios/null_t_elasticity.json")),
    ("null_t_rperp", include_str!("../scenarios/null_t_rperp.json")),
    ("power_refinement", include_str!("../scenarios/power_refinement.json")),
    ("reference_medium_16", include_str!("../scenarios/reference_medium_16.json")),
    ("reflection_indicator_8", include_str!("../scenarios/reflection_indicator_8.json")),
    ("remarkable_identity", include_str!("../scenarios/remarkable_identity.json")),
    ("resolvent_chain_dense", include_str!("../scenarios/resolvent_chain_dense.json")),
    ("resolvent_chain_grid", include_str!("../scenarios/resolvent_chain_grid.json")),
    ("solve_checkerboard", include_str!("../scenarios/solve_checkerboard.json")),
    ("stieltjes_desk", include_str!("../scenarios/stieltjes_desk.json")),
    ("zstar_hermitian", include_str!("../scenarios/zstar_hermitian.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}
