//! Learns a sparsity-penalized binary mask over concept activations for a
//! small planted task: only a few concepts carry the labels, and the mask
//! should find them without giving up accuracy.
//!
//!     cargo run --release --example concept_mask

use suplab::numeric::matrix::Matrix;
use suplab::numeric::rng::SeededRng;
use suplab::sae::learn_concept_mask;
use suplab::Result;

fn main() -> Result<()> {
    let (d1, informative, n, classes) = (64, 6, 400, 4);
    let mut rng = SeededRng::new(31);

    // Dense concept activations; the label depends on the first
    // `informative` coordinates through a random linear rule.
    let mut concepts = Matrix::zeros(n, d1);
    let mut labels = Vec::with_capacity(n);
    let rule: Vec<Vec<f64>> =
        (0..classes).map(|_| (0..informative).map(|_| rng.normal()).collect()).collect();
    for r in 0..n {
        for c in 0..d1 {
            concepts.row_mut(r)[c] = rng.normal();
        }
        let scores: Vec<f64> = rule
            .iter()
            .map(|w| w.iter().zip(concepts.row(r)).map(|(a, b)| a * b).sum())
            .collect();
        let best =
            scores.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
        labels.push(best.unwrap());
    }

    println!("{:>8} {:>6} {:>10} {:>12}", "lambda", "kept", "hit-rate", "accuracy");
    for lambda in [0.0, 0.003, 0.01, 0.03, 0.1] {
        let mut mrng = SeededRng::new(31);
        let (mask, head) =
            learn_concept_mask(&concepts, &labels, classes, lambda, 0.1, 400, &mut mrng)?;
        let kept = mask.active_indices();
        let hits = kept.iter().filter(|&&i| i < informative).count();
        let mut correct = 0;
        for r in 0..n {
            if head.predict(&mask.apply(concepts.row(r)))? == labels[r] {
                correct += 1;
            }
        }
        println!(
            "{:>8} {:>6} {:>9}/{} {:>11.1}%",
            lambda,
            kept.len(),
            hits,
            informative,
            100.0 * correct as f64 / n as f64
        );
    }
    println!("\nlarger penalties shrink the mask toward the informative set");
    Ok(())
}
