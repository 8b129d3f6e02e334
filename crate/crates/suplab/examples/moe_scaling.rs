//! Mixture-of-experts against per-point fine-tuning on the image dataset:
//! more experts close the gap.
//!
//!     cargo run --release --example moe_scaling

use suplab::classify::{
    route_and_predict, train_global_head, train_moe, ttt_finetune, HeadTrainConfig,
    MoeTrainConfig, RandomReluMap, TttConfig,
};
use suplab::harness::idx::{balanced_indices, default_data_dir, load_mnist};
use suplab::numeric::matrix::Matrix;
use suplab::numeric::rng::SeededRng;
use suplab::Result;

fn main() -> Result<()> {
    let mnist = load_mnist(&default_data_dir())?;
    let mut rng = SeededRng::new(83);
    let idx = balanced_indices(&mnist.train.labels, 10, 150, &mut rng);
    let xs_raw = mnist.train.features(&idx)?;
    let ys = mnist.train.labels_for(&idx);
    let map = RandomReluMap::new(mnist.train.dim, 64, &mut rng)?;
    let xs = map.apply_all(&xs_raw)?;

    let head = train_global_head(&xs, &ys, 10, &HeadTrainConfig::default(), &mut rng)?;
    let test_idx = rng.distinct_indices(mnist.test.count, 100);
    let xt = map.apply_all(&mnist.test.features(&test_idx)?)?;
    let yt = mnist.test.labels_for(&test_idx);

    // Per-point fine-tuning as the reference.
    let ttt = TttConfig::default();
    let mut ttt_right = 0;
    for (r, &truth) in yt.iter().enumerate() {
        let mut scored: Vec<(usize, f64)> = (0..xs.rows())
            .map(|i| {
                let d: f64 =
                    xs.row(i).iter().zip(xt.row(r)).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, d)
            })
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        let nb: Vec<usize> = scored.iter().take(ttt.k).map(|&(i, _)| i).collect();
        let rows: Vec<&[f64]> = nb.iter().map(|&i| xs.row(i)).collect();
        let nb_ys: Vec<usize> = nb.iter().map(|&i| ys[i]).collect();
        let tuned = ttt_finetune(&head, &Matrix::from_row_slices(&rows)?, &nb_ys, &ttt)?;
        if tuned.predict(xt.row(r))? == truth {
            ttt_right += 1;
        }
    }
    let ttt_acc = 100.0 * ttt_right as f64 / yt.len() as f64;

    // Experts share the per-point arm's fine-tune recipe; the comparison is
    // about where the adaptation happens, not how hard it trains.
    let moe_config = MoeTrainConfig {
        lr: ttt.lr,
        epochs: ttt.steps,
        neighbors: ttt.k,
        kmeans_iters: 100,
    };
    println!("{:>8} {:>10} {:>10}", "experts", "moe acc", "ttt acc");
    for e in [1usize, 10, 100, 1000] {
        let e = e.min(xs.rows());
        let moe = train_moe(&xs, &ys, e, &head, &moe_config, &mut rng)?;
        let mut right = 0;
        for (r, &truth) in yt.iter().enumerate() {
            if route_and_predict(&moe, xt.row(r))? == truth {
                right += 1;
            }
        }
        println!(
            "{:>8} {:>9.1}% {:>9.1}%",
            e,
            100.0 * right as f64 / yt.len() as f64,
            ttt_acc
        );
    }
    Ok(())
}
