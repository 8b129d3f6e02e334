use suplab::classify::{train_global_head, train_moe, route_and_predict, ttt_finetune, HeadTrainConfig, MoeTrainConfig, TttConfig};
use suplab::harness::idx::{balanced_indices, default_data_dir, load_mnist};
use suplab::numeric::matrix::Matrix;
use suplab::numeric::rng::SeededRng;
use suplab::Result;
use std::time::Instant;

fn main() -> Result<()> {
    let mnist = load_mnist(&default_data_dir())?;
    let mut rng = SeededRng::new(83);
    let idx = balanced_indices(&mnist.train.labels, 10, 500, &mut rng);
    let xs = mnist.train.features(&idx)?;
    let ys = mnist.train.labels_for(&idx);
    let head = train_global_head(&xs, &ys, 10, &HeadTrainConfig::default(), &mut rng)?;
    let test_idx = rng.distinct_indices(mnist.test.count, 1000);
    let xt = mnist.test.features(&test_idx)?;
    let yt = mnist.test.labels_for(&test_idx);

    let mut base_right = 0;
    for (r, &truth) in yt.iter().enumerate() {
        if head.predict(xt.row(r))? == truth { base_right += 1; }
    }
    println!("n={} raw-pixel base acc {:.1}%", xs.rows(), 100.0*base_right as f64/yt.len() as f64);

    let ttt = TttConfig { k: 100, ..TttConfig::default() };
    let t0 = Instant::now();
    let mut ttt_right = 0;
    for (r, &truth) in yt.iter().enumerate() {
        let mut scored: Vec<(usize, f64)> = (0..xs.rows()).map(|i| {
            let d: f64 = xs.row(i).iter().zip(xt.row(r)).map(|(a,b)| (a-b)*(a-b)).sum();
            (i, d)
        }).collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        let nb: Vec<usize> = scored.iter().take(ttt.k).map(|&(i, _)| i).collect();
        let rows: Vec<&[f64]> = nb.iter().map(|&i| xs.row(i)).collect();
        let nb_ys: Vec<usize> = nb.iter().map(|&i| ys[i]).collect();
        let tuned = ttt_finetune(&head, &Matrix::from_row_slices(&rows)?, &nb_ys, &ttt)?;
        if tuned.predict(xt.row(r))? == truth { ttt_right += 1; }
    }
    println!("ttt acc {:.1}%  ({:.0}s)", 100.0*ttt_right as f64/yt.len() as f64, t0.elapsed().as_secs_f64());

    let moe_config = MoeTrainConfig { lr: ttt.lr, epochs: ttt.steps, neighbors: ttt.k, kmeans_iters: 20 };
    for &e in &[1000usize] {
        let t1 = Instant::now();
        let moe = train_moe(&xs, &ys, e, &head, &moe_config, &mut rng)?;
        let mut right = 0;
        for (r, &truth) in yt.iter().enumerate() {
            if route_and_predict(&moe, xt.row(r))? == truth { right += 1; }
        }
        println!("E={} moe acc {:.1}%  ({:.0}s)", e, 100.0*right as f64/yt.len() as f64, t1.elapsed().as_secs_f64());
    }
    Ok(())
}
