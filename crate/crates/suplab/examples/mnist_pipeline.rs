//! End-to-end image pipeline: load the IDX files, lift pixels through a
//! random relu map, train a softmax head, then fine-tune a copy per test
//! point on its nearest neighbors. Saves and reloads the head checkpoint.
//!
//! Wants the four uncompressed IDX files under SUPLAB_DATA_DIR (falls back
//! to ~/data/mnist, then ./data/mnist).
//!
//!     cargo run --release --example mnist_pipeline

use suplab::classify::{
    majority_vote, train_global_head, ttt_finetune, HeadTrainConfig, RandomReluMap, TttConfig,
};
use suplab::harness::checkpoint::{load_head, save_head};
use suplab::harness::idx::{balanced_indices, default_data_dir, load_mnist};
use suplab::numeric::matrix::Matrix;
use suplab::numeric::rng::SeededRng;
use suplab::Result;

fn main() -> Result<()> {
    let dir = default_data_dir();
    println!("loading IDX files from {}", dir.display());
    let mnist = load_mnist(&dir)?;
    println!("train {} x {}, test {}", mnist.train.count, mnist.train.dim, mnist.test.count);

    let mut rng = SeededRng::new(71);
    let idx = balanced_indices(&mnist.train.labels, 10, 200, &mut rng);
    let xs_raw = mnist.train.features(&idx)?;
    let ys = mnist.train.labels_for(&idx);

    let map = RandomReluMap::new(mnist.train.dim, 64, &mut rng)?;
    let xs = map.apply_all(&xs_raw)?;
    let head = train_global_head(&xs, &ys, 10, &HeadTrainConfig::default(), &mut rng)?;

    let test_idx = rng.distinct_indices(mnist.test.count, 100);
    let xt = map.apply_all(&mnist.test.features(&test_idx)?)?;
    let yt = mnist.test.labels_for(&test_idx);
    println!("global head accuracy: {:.1}%", 100.0 * head.accuracy(&xt, &yt)?);

    let ttt = TttConfig::default();
    let mut ttt_right = 0;
    let mut vote_right = 0;
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
        let nb_xs = Matrix::from_row_slices(&rows)?;
        let nb_ys: Vec<usize> = nb.iter().map(|&i| ys[i]).collect();
        if majority_vote(&nb_ys)? == truth {
            vote_right += 1;
        }
        let tuned = ttt_finetune(&head, &nb_xs, &nb_ys, &ttt)?;
        if tuned.predict(xt.row(r))? == truth {
            ttt_right += 1;
        }
    }
    let pct = |n: usize| 100.0 * n as f64 / yt.len() as f64;
    println!("neighbor vote accuracy: {:.1}%", pct(vote_right));
    println!("fine-tuned accuracy:    {:.1}%", pct(ttt_right));

    let path = std::env::temp_dir().join("suplab-head.bin");
    save_head(&path, &head)?;
    let back = load_head(&path)?;
    println!(
        "checkpoint roundtrip at {}: accuracy matches: {}",
        path.display(),
        (back.accuracy(&xt, &yt)? - head.accuracy(&xt, &yt)?).abs() < 1e-15
    );
    Ok(())
}
