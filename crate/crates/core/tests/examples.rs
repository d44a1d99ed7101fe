//! Every example runs to completion.

mod convergence_bounds {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/convergence_bounds.rs"));
}

#[test]
fn convergence_bounds_runs() {
    convergence_bounds::run_example().expect("convergence_bounds example should run");
}

mod ecim_box_qp {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ecim_box_qp.rs"));
}

#[test]
fn ecim_box_qp_runs() {
    ecim_box_qp::run_example().expect("ecim_box_qp example should run");
}

mod elliptical_scaling {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/elliptical_scaling.rs"));
}

#[test]
fn elliptical_scaling_runs() {
    elliptical_scaling::run_example().expect("elliptical_scaling example should run");
}

mod legacy_vs_modified {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/legacy_vs_modified.rs"));
}

#[test]
fn legacy_vs_modified_runs() {
    legacy_vs_modified::run_example().expect("legacy_vs_modified example should run");
}

mod rate_fit {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/rate_fit.rs"));
}

#[test]
fn rate_fit_runs() {
    rate_fit::run_example().expect("rate_fit example should run");
}

mod subproblem_oracles {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/subproblem_oracles.rs"));
}

#[test]
fn subproblem_oracles_runs() {
    subproblem_oracles::run_example().expect("subproblem_oracles example should run");
}

mod trace_export {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/trace_export.rs"));
}

#[test]
fn trace_export_runs() {
    trace_export::run_example().expect("trace_export example should run");
}

mod trust_region_rosenbrock {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/trust_region_rosenbrock.rs"));
}

#[test]
fn trust_region_rosenbrock_runs() {
    trust_region_rosenbrock::run_example().expect("trust_region_rosenbrock example should run");
}
