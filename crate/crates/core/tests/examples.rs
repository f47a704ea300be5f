// Every example under examples/ is compiled into this target and run once.

mod compressed_sensing {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/compressed_sensing.rs"));
}

#[test]
fn compressed_sensing_runs() {
    compressed_sensing::run_example().expect("compressed_sensing example should run");
}

mod cosupport {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cosupport.rs"));
}

#[test]
fn cosupport_runs() {
    cosupport::run_example().expect("cosupport example should run");
}

mod dof_and_gsure {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/dof_and_gsure.rs"));
}

#[test]
fn dof_and_gsure_runs() {
    dof_and_gsure::run_example().expect("dof_and_gsure example should run");
}

mod exact_enumeration {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/exact_enumeration.rs"));
}

#[test]
fn exact_enumeration_runs() {
    exact_enumeration::run_example().expect("exact_enumeration example should run");
}

mod experiment_files {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/experiment_files.rs"));
}

#[test]
fn experiment_files_runs() {
    experiment_files::run_example().expect("experiment_files example should run");
}

mod lambda_sweep {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lambda_sweep.rs"));
}

#[test]
fn lambda_sweep_runs() {
    lambda_sweep::run_example().expect("lambda_sweep example should run");
}

mod local_affine_map {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/local_affine_map.rs"));
}

#[test]
fn local_affine_map_runs() {
    local_affine_map::run_example().expect("local_affine_map example should run");
}

mod mc_trace {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mc_trace.rs"));
}

#[test]
fn mc_trace_runs() {
    mc_trace::run_example().expect("mc_trace example should run");
}

mod operators {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/operators.rs"));
}

#[test]
fn operators_runs() {
    operators::run_example().expect("operators example should run");
}

mod reduce_cosupport {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/reduce_cosupport.rs"));
}

#[test]
fn reduce_cosupport_runs() {
    reduce_cosupport::run_example().expect("reduce_cosupport example should run");
}

mod tv_denoising {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/tv_denoising.rs"));
}

#[test]
fn tv_denoising_runs() {
    tv_denoising::run_example().expect("tv_denoising example should run");
}

mod unbiasedness {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/unbiasedness.rs"));
}

#[test]
fn unbiasedness_runs() {
    unbiasedness::run_example().expect("unbiasedness example should run");
}

mod validate_suite {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/validate_suite.rs"));
}

#[test]
fn validate_suite_runs() {
    validate_suite::run_example().expect("validate_suite example should run");
}
