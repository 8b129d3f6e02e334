//! Excess risk of the local sparse fit shrinks like sigma^2 s' / k as the
//! neighborhood grows; the log-log slope against k comes out near -1.
//!
//!     cargo run --release --example ttt_rate

use suplab::concepts::{ConceptWorld, SupportLaw};
use suplab::estimators::ttt_rate_curve;
use suplab::numeric::rng::SeededRng;
use suplab::Result;

fn main() -> Result<()> {
    let (d1, d2, s) = (256, 64, 4);
    let sigma2 = 0.25;
    let ks = [32, 64, 128, 256, 512, 1024];
    let trials = 200;

    let mut setup = SeededRng::new(3);
    let world =
        ConceptWorld::random(d1, d2, s, SupportLaw::clustered_default(s), sigma2, &mut setup)?;
    let report = ttt_rate_curve(&world, &ks, s, trials, &SeededRng::new(3))?;

    println!("{:>6} {:>12} {:>12}", "k", "excess", "sigma^2 s/k");
    let mut logs = Vec::new();
    for p in &report.per_k {
        println!("{:>6} {:>12.6} {:>12.6}", p.k, p.mean, sigma2 * s as f64 / p.k as f64);
        logs.push(((p.k as f64).ln(), p.mean.max(1e-300).ln()));
    }

    // Least-squares slope of ln(excess) on ln(k).
    let n = logs.len() as f64;
    let (mx, my) = logs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (num, den) = logs.iter().fold((0.0, 0.0), |(num, den), &(x, y)| {
        (num + (x - mx) * (y - my), den + (x - mx) * (x - mx))
    });
    println!("\nlog-log slope: {:.3} (parametric rate is -1)", num / den);
    Ok(())
}
