//! Saves a fitted model, loads it back and checks that predictions agree.

use s3rc::archive::{load_model, save_model};
use s3rc::classifier::{fit, PipelineConfig};
use s3rc::dataio::{generate_synthetic, SynthSpec};

fn main() -> s3rc::Result<()> {
    let data = generate_synthetic(&SynthSpec::default())?;
    let model = fit(&data.features, None, &PipelineConfig::default())?;

    let path = std::env::temp_dir().join(format!("s3rc-example-{}.json", std::process::id()));
    save_model(&path, &model)?;
    let bytes = std::fs::metadata(&path)
        .map_err(|e| s3rc::Error::Io {
            path: path.clone(),
            source: e,
        })?
        .len();
    let loaded = load_model(&path)?;
    let _ = std::fs::remove_file(&path);

    let x = data.features.data();
    let before = model.predict(x)?;
    let after = loaded.predict(x)?;
    let identical = before == after;
    println!(
        "archive {bytes} bytes, {} classes, pca {} -> {}",
        loaded.num_classes(),
        loaded.pca.input_dim(),
        loaded.pca.output_dim()
    );
    println!("models equal: {}", loaded == model);
    println!("predictions identical on {} samples: {identical}", before.len());
    Ok(())
}
