//! Temperature-calibrated comparison of predictive distributions: how close
//! does a head fine-tuned on one neighborhood come to heads fine-tuned
//! elsewhere, after each is rescaled to match sharpness?
//!
//!     cargo run --release --example calibrate_compare

use suplab::classify::{
    calibrate_and_compare, train_global_head, ttt_finetune, HeadTrainConfig, RandomReluMap,
    TttConfig,
};
use suplab::harness::idx::{balanced_indices, default_data_dir, load_mnist};
use suplab::numeric::matrix::Matrix;
use suplab::numeric::rng::SeededRng;
use suplab::Result;

fn main() -> Result<()> {
    let mnist = load_mnist(&default_data_dir())?;
    let mut rng = SeededRng::new(97);
    let idx = balanced_indices(&mnist.train.labels, 10, 150, &mut rng);
    let xs_raw = mnist.train.features(&idx)?;
    let ys = mnist.train.labels_for(&idx);
    let map = RandomReluMap::new(mnist.train.dim, 64, &mut rng)?;
    let xs = map.apply_all(&xs_raw)?;
    let head = train_global_head(&xs, &ys, 10, &HeadTrainConfig::default(), &mut rng)?;

    let test_idx = rng.distinct_indices(mnist.test.count, 60);
    let xt = map.apply_all(&mnist.test.features(&test_idx)?)?;

    let ttt = TttConfig::default();
    let neighbors = |query: &[f64]| -> Vec<usize> {
        let mut scored: Vec<(usize, f64)> = (0..xs.rows())
            .map(|i| {
                let d: f64 =
                    xs.row(i).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, d)
            })
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        scored.iter().take(ttt.k).map(|&(i, _)| i).collect()
    };
    let tune_on = |nb: &[usize]| -> Result<suplab::classify::LinearHead> {
        let rows: Vec<&[f64]> = nb.iter().map(|&i| xs.row(i)).collect();
        let nb_ys: Vec<usize> = nb.iter().map(|&i| ys[i]).collect();
        ttt_finetune(&head, &Matrix::from_row_slices(&rows)?, &nb_ys, &ttt)
    };

    // Reference: each point scored by the head tuned on its own
    // neighborhood. Rivals: the head tuned on one point's neighborhood
    // reused everywhere, and the untuned global head.
    let n = xt.rows();
    let mut own = Matrix::zeros(n, 10);
    let mut borrowed = Matrix::zeros(n, 10);
    let mut fixed = Matrix::zeros(n, 10);
    let borrowed_head = tune_on(&neighbors(xt.row(0)))?;
    for r in 0..n {
        let tuned = tune_on(&neighbors(xt.row(r)))?;
        own.row_mut(r).copy_from_slice(&tuned.logits(xt.row(r))?);
        borrowed.row_mut(r).copy_from_slice(&borrowed_head.logits(xt.row(r))?);
        fixed.row_mut(r).copy_from_slice(&head.logits(xt.row(r))?);
    }

    let t = 5;
    let vs_borrowed = calibrate_and_compare(&own, &borrowed, t)?;
    let vs_fixed = calibrate_and_compare(&own, &fixed, t)?;
    println!("relative total variation per rank (own-neighborhood head as reference):");
    println!("{:>6} {:>16} {:>14}", "rank", "borrowed head", "global head");
    for i in 0..t {
        println!("{:>6} {:>16.4} {:>14.4}", i + 1, vs_borrowed.rel_tv[i], vs_fixed.rel_tv[i]);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "\nmean relTV: borrowed {:.4}, global {:.4}",
        mean(&vs_borrowed.rel_tv),
        mean(&vs_fixed.rel_tv)
    );
    Ok(())
}
