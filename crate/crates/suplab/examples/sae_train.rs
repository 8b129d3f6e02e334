//! Trains top-k autoencoders on two dictionaries: orthogonal planted atoms,
//! where recovery should be essentially exact, and a coherent 2x
//! overcomplete superposition map, where merged atoms are expected.
//!
//!     cargo run --release --example sae_train

use suplab::concepts::{make_superposition_map, max_cross_coherence};
use suplab::numeric::matrix::{dot, norm2, Matrix};
use suplab::numeric::rng::SeededRng;
use suplab::sae::{train_sae, SaeTrainConfig, TrainedSae};
use suplab::Result;

/// Best |cos| between each column of `atoms` (d2 x d1) and any learned
/// decoder column; returns (mean, worst).
fn recovery(atoms: &Matrix, trained: &TrainedSae) -> (f64, f64) {
    let (d2, d1) = (atoms.rows(), atoms.cols());
    let mut worst = 1.0f64;
    let mut mean = 0.0;
    for i in 0..d1 {
        let atom: Vec<f64> = (0..d2).map(|r| atoms.get(r, i)).collect();
        let mut best = 0.0f64;
        for j in 0..d1 {
            let learned: Vec<f64> = (0..d2).map(|r| trained.model.decoder.get(r, j)).collect();
            let denom = norm2(&atom) * norm2(&learned);
            if denom > 0.0 {
                best = best.max((dot(&atom, &learned) / denom).abs());
            }
        }
        worst = worst.min(best);
        mean += best / d1 as f64;
    }
    (mean, worst)
}

fn train(atoms: &Matrix, s: usize, n: usize, rng: &mut SeededRng) -> Result<TrainedSae> {
    let (d2, d1) = (atoms.rows(), atoms.cols());
    let mut data = Matrix::zeros(n, d2);
    for r in 0..n {
        for _ in 0..s {
            let atom = rng.index(d1);
            let scale = rng.uniform_in(0.5, 1.5);
            for j in 0..d2 {
                data.row_mut(r)[j] += scale * atoms.get(j, atom);
            }
        }
    }
    let mut config = SaeTrainConfig::new(d1, s);
    config.epochs = 60;
    config.batch_size = 64;
    config.peak_lr = 3e-3;
    config.warmup_steps = 100;
    config.horizon_steps = 4000;
    config.sparsity_start = d1;
    config.sparsity_ramp_steps = 400;
    config.dropout = 0.0;
    train_sae(&config, &data, rng)
}

fn main() -> Result<()> {
    let mut rng = SeededRng::new(13);

    let ortho = Matrix::identity(16);
    let trained = train(&ortho, 1, 8192, &mut rng)?;
    let (mean, worst) = recovery(&ortho, &trained);
    println!("orthogonal planted atoms (16 in R^16, 1-sparse):");
    println!("  coherence 0.000, recovery |cos| mean {mean:.4}, worst {worst:.4}");
    println!("  final loss {:.6}", trained.loss_trace.last().unwrap());

    let over = make_superposition_map(32, 16, &mut rng)?;
    let coh = max_cross_coherence(&over);
    let trained = train(&over, 2, 16384, &mut rng)?;
    let (mean, worst) = recovery(&over, &trained);
    println!("\ncoherent overcomplete atoms (32 in R^16, 2-sparse):");
    println!("  coherence {coh:.3}, recovery |cos| mean {mean:.4}, worst {worst:.4}");
    println!("  final loss {:.6}", trained.loss_trace.last().unwrap());
    println!("  dead units {:.1}%", 100.0 * trained.tracker.dead_fraction());
    println!("\nnear-parallel atoms merge; exact recovery needs low coherence");
    Ok(())
}
