//! Regularity diagnostics for the local fit: angular spread, spatial
//! balance, representation drift, and the condition proxy of the restricted
//! map, swept over the retrieval radius. Tight balls satisfy everything,
//! wide balls mix pools and break it.
//!
//!     cargo run --release --example assumption_report

use suplab::assumptions::check_assumptions;
use suplab::concepts::{sample_dataset, ConceptWorld, SupportLaw};
use suplab::numeric::rng::SeededRng;
use suplab::{Error, Result};

fn main() -> Result<()> {
    let mut rng = SeededRng::new(5);
    let law = SupportLaw::Clustered { pool_size: 16, stride: 8 };
    let world = ConceptWorld::random(256, 64, 4, law, 0.04, &mut rng)?;
    let data = sample_dataset(&world, 4000, &mut rng);

    println!(
        "{:>7} {:>7} {:>8} {:>8} {:>8} {:>8} {:>10} {:>6}",
        "radius", "size", "eta_ang", "eta_spa", "eta_rep", "kappa", "satisfied", "empty"
    );
    for r in [0.4, 0.5, 0.6, 0.8, 1.2] {
        let trials = 30u64;
        let mut sizes = 0usize;
        let mut sums = [0.0f64; 4];
        let mut sat = 0usize;
        let mut empty = 0usize;
        for t in 0..trials {
            let mut trng = SeededRng::with_stream(9, t);
            let test = world.sample(&mut trng);
            let rep = match check_assumptions(&world, &data, &test, r, world.s, 0.5) {
                Ok(rep) => rep,
                Err(Error::Retrieval(_)) => {
                    empty += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            sizes += rep.neighborhood_size;
            sums[0] += rep.eta_ang;
            sums[1] += rep.eta_spa;
            sums[2] += rep.eta_rep;
            sums[3] += rep.kappa;
            sat += rep.satisfied as usize;
        }
        let hits = trials as usize - empty;
        if hits == 0 {
            println!("{r:>7} every ball came back empty");
            continue;
        }
        let n = hits as f64;
        println!(
            "{:>7} {:>7.1} {:>8.4} {:>8.4} {:>8.4} {:>8.3} {:>9}% {:>6}",
            r,
            sizes as f64 / n,
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n,
            (100.0 * sat as f64 / n).round(),
            empty
        );
    }
    Ok(())
}
