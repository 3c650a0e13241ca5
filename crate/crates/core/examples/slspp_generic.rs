//! Variation learned from a separate generic dataset whose classes do not
//! overlap with the gallery, compared with variation from the gallery
//! itself.

use s3rc::classifier::{evaluate, run_baseline, run_s3rc, Method, PipelineConfig, VariationSource};
use s3rc::dataio::{generate_synthetic, Protocol, SynthSpec};

fn main() -> s3rc::Result<()> {
    let spec = SynthSpec {
        eta: 1.0,
        labeled_per_class: 1,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec)?;
    // Same generator family, different identities and draws.
    let generic = generate_synthetic(&SynthSpec {
        num_classes: 15,
        labeled_per_class: 4,
        unlabeled_per_class: 1,
        seed: 99,
        ..spec
    })?
    .fully_labeled()?;

    let split = data.truth.split(Protocol::Transductive, 0.5, spec.seed)?;
    let truth: Vec<usize> = split.test.iter().map(|&j| data.truth.labels[j]).collect();
    let rate = |labels: Vec<usize>| evaluate(&labels, &truth, spec.num_classes).map(|e| 100.0 * e.rate);

    let generic_cfg = PipelineConfig {
        variation_source: VariationSource::Generic,
        ..PipelineConfig::default()
    };
    let src = run_baseline(Method::Src, &data.features, None, &PipelineConfig::default())?;
    println!("src (no variation)       {:.1}%", rate(src.labels())?);
    let esrc = run_baseline(Method::Esrc, &data.features, Some(&generic), &generic_cfg)?;
    println!("esrc, generic variation  {:.1}%", rate(esrc.labels())?);
    let s3 = run_s3rc(&data.features, Some(&generic), &generic_cfg)?;
    println!("s3rc, generic variation  {:.1}%", rate(s3.labels())?);
    // With one labeled sample per class the gallery alone has no variation to offer.
    let own = run_s3rc(&data.features, None, &PipelineConfig::default())?;
    println!(
        "s3rc, gallery variation  {:.1}% ({} atoms)",
        rate(own.labels())?,
        own.model.variation.len()
    );
    Ok(())
}
