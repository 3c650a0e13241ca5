//! Accuracy of the four methods as the session gap grows.
//!
//! `cargo run --release --example benchmark -- [seed]`

use s3rc::classifier::{evaluate, fit, Method, PipelineConfig};
use s3rc::dataio::{generate_synthetic, Protocol, SynthSpec};

fn main() -> s3rc::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    print!("eta");
    for m in Method::ALL {
        print!("\t{m}");
    }
    println!();
    for eta in [0.0, 0.3, 0.6, 1.0, 1.5, 2.0] {
        let spec = SynthSpec {
            eta,
            seed,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec)?;
        let split = data.truth.split(Protocol::Transductive, 0.5, seed)?;
        let test = data.features.data().select_columns(&split.test);
        let truth: Vec<usize> = split.test.iter().map(|&j| data.truth.labels[j]).collect();
        print!("{eta}");
        for method in Method::ALL {
            let cfg = PipelineConfig {
                method,
                ..PipelineConfig::default()
            };
            let model = fit(&data.features, None, &cfg)?;
            let e = evaluate(&model.predict_labels(&test)?, &truth, spec.num_classes)?;
            print!("\t{:.1}", 100.0 * e.rate);
        }
        println!();
    }
    Ok(())
}
