use hmf_tempo::{bath::SpectralDensity, imtempo, model, tensor::TruncationPolicy};
use std::time::Instant;

fn main() {
    let cases: Vec<(&str, model::SystemModel, usize)> = vec![
        ("1q N=64", model::build_single_qubit(1.0, 1.0).unwrap(), 64),
        ("2q N=16", model::build_two_qubit(2.0).unwrap(), 16),
        ("2q N=24", model::build_two_qubit(2.0).unwrap(), 24),
    ];
    for (label, m, n) in cases {
        let j = SpectralDensity::ohmic_exp(0.1, 10.0).unwrap();
        let policy = TruncationPolicy::new(1e-12, None).unwrap();
        let t = Instant::now();
        let r = imtempo::compute_hmf(&m, &j, 1.0, n, &policy).unwrap();
        println!(
            "{label}: {:?} max_bond={} trunc={:.2e} defect={:.2e}",
            t.elapsed(),
            r.diagnostics.max_bond,
            r.diagnostics.truncation_error_accum,
            r.diagnostics.hermiticity_defect
        );
    }
}
