//! Builds the gallery and variation dictionaries from a small labeled set.

use s3rc::dataio::{generate_synthetic, SynthSpec};
use s3rc::dictionaries::{
    first_sample_prototypes, gallery_from_centroids, gallery_from_samples, variation_centroid_subtraction,
    variation_prototype_subtraction, LabeledSet,
};

fn main() -> s3rc::Result<()> {
    let data = generate_synthetic(&SynthSpec {
        num_classes: 4,
        labeled_per_class: 3,
        unlabeled_per_class: 1,
        ..SynthSpec::default()
    })?;
    let labeled = LabeledSet::from_features(&data.features)?;
    println!(
        "classes {} samples per class {:?}",
        labeled.num_classes(),
        labeled.counts()
    );

    let centroids = gallery_from_centroids(&labeled)?;
    let samples = gallery_from_samples(&labeled)?;
    println!(
        "centroid gallery: {} columns, classes {:?}",
        centroids.len(),
        centroids.column_classes()
    );
    println!(
        "sample gallery:   {} columns, classes {:?}",
        samples.len(),
        samples.column_classes()
    );

    let by_centroid = variation_centroid_subtraction(&labeled);
    let by_prototype = variation_prototype_subtraction(&labeled, &first_sample_prototypes(&labeled))?;
    println!("centroid variation atoms:  {}", by_centroid.len());
    println!("prototype variation atoms: {}", by_prototype.len());

    let norms: Vec<String> = (0..by_centroid.len())
        .map(|j| format!("{:.3}", by_centroid.matrix().column(j).norm()))
        .collect();
    println!("atom norms {}", norms.join(" "));
    Ok(())
}
