//! One concept per cell, more cells than feature dimensions: the global
//! min-norm readout pays 1 - d2/d1 in population error while a per-cell fit
//! on the cell's own map is exact.
//!
//!     cargo run --release --example interference

use suplab::concepts::make_nonlearnable_instance;
use suplab::estimators::{evaluate_interference, fit_ttt_sparse, FitMode};
use suplab::neighborhood::{knn, Space};
use suplab::numeric::rng::SeededRng;
use suplab::Result;

fn main() -> Result<()> {
    let d1 = 128;
    let trials = 40;
    println!("{:>4} {:>5} {:>10} {:>10} {:>12}", "d1", "d2", "global", "analytic", "per-cell");
    for d2 in [16, 32, 64, 96] {
        let mut global = 0.0;
        let mut local = 0.0f64;
        for t in 0..trials {
            let mut rng = SeededRng::with_stream(11, t);
            let inst = make_nonlearnable_instance(d1, d2, &mut rng)?;
            global += evaluate_interference(&inst)?.measured;

            // Each cell's population is its single sample; fit on the
            // restriction of the map to that cell.
            for m in 0..d1 {
                let cell = inst.cell_sample(m);
                let nbhd = knn(&cell.feature, std::slice::from_ref(&cell), 1, Space::Feature)?;
                let fit = fit_ttt_sparse(
                    &nbhd,
                    std::slice::from_ref(&cell),
                    &inst.local_map(m),
                    1,
                    FitMode::Exhaustive,
                )?;
                local = local.max((fit.predict(&cell.feature) - cell.label).powi(2));
            }
        }
        println!(
            "{:>4} {:>5} {:>10.4} {:>10.4} {:>12.2e}",
            d1,
            d2,
            global / trials as f64,
            1.0 - d2 as f64 / d1 as f64,
            local
        );
    }
    println!("\nper-cell column is the worst squared error seen across all cells");
    Ok(())
}
