//! Builds blank and ClipBKD canaries for a dataset and shows how strongly
//! each one's gradient stands out from the real samples.

use dpsgd_audit::canary::CanarySpec;
use dpsgd_audit::data::synth_blobs;
use dpsgd_audit::nncore::{per_example_gradient, xavier_init, ModelSpec};

fn main() -> dpsgd_audit::Result<()> {
    let data = synth_blobs(3, 6, 50, 2.0, 11)?;
    let spec = ModelSpec::logistic(6, 3)?;
    let theta0 = xavier_init(&spec, 12);
    let mean_norm = data
        .samples()
        .iter()
        .map(|s| per_example_gradient(&spec, &theta0, s).map(|g| g.l2_norm()))
        .sum::<dpsgd_audit::Result<f64>>()?
        / data.len() as f64;
    println!("mean real-sample gradient norm: {mean_norm:.4}");
    for canary in [CanarySpec::Blank { label: 0 }, CanarySpec::ClipBkd { label: None, scale: 5.0 }] {
        let sample = canary.build(&data, &spec, &theta0)?;
        let g = per_example_gradient(&spec, &theta0, &sample)?;
        let features: Vec<String> = sample.features.iter().map(|v| format!("{v:+.3}")).collect();
        println!("{canary:?}");
        println!("  label {}  features [{}]  gradient norm {:.4}", sample.label, features.join(", "), g.l2_norm());
    }
    Ok(())
}
