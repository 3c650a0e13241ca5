//! End to end: fit on labeled and unlabeled samples, classify the
//! unlabeled ones, and compare with the generator's ground truth.

use s3rc::classifier::{evaluate, run_s3rc, PipelineConfig};
use s3rc::dataio::{generate_synthetic, Protocol, SynthSpec};

fn main() -> s3rc::Result<()> {
    let spec = SynthSpec {
        eta: 1.0,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec)?;
    let out = run_s3rc(&data.features, None, &PipelineConfig::default())?;

    let split = data.truth.split(Protocol::Transductive, 0.5, spec.seed)?;
    let truth: Vec<usize> = split.test.iter().map(|&j| data.truth.labels[j]).collect();
    let eval = evaluate(&out.labels(), &truth, spec.num_classes)?;

    let trace = out.model.trace.as_ref().expect("s3rc always runs EM");
    println!("EM iterations {} converged {}", trace.iterations, trace.converged);
    println!("accuracy {:.1}% ({}/{})", 100.0 * eval.rate, eval.correct, eval.total);
    println!("confusion (rows are true classes):");
    for i in 0..spec.num_classes {
        let row: Vec<String> = (0..spec.num_classes)
            .map(|j| format!("{:3}", eval.confusion[(i, j)]))
            .collect();
        println!("  {}", row.join(""));
    }
    let r = &out.results[0];
    println!(
        "first sample: class {} residual {:.4} runner-up {:.4}",
        out.model.classes[r.label],
        r.best_residual(),
        r.second_residual()
    );
    Ok(())
}
