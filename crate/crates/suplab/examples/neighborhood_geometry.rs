//! Retrieval geometry on a clustered world: how neighborhood size moves
//! with the radius, how well feature similarity tracks concept overlap, and
//! the U-shaped local-fit error over k.
//!
//!     cargo run --release --example neighborhood_geometry

use suplab::concepts::{sample_dataset, ConceptWorld, SupportLaw};
use suplab::estimators::fit_global_minnorm;
use suplab::neighborhood::{
    concentration_diagnostics, containment_slack, knn, radius_neighborhood, Space,
};
use suplab::numeric::matrix::Matrix;
use suplab::numeric::rng::SeededRng;
use suplab::Result;

fn main() -> Result<()> {
    let mut rng = SeededRng::new(21);
    let law = SupportLaw::Clustered { pool_size: 16, stride: 8 };
    let world = ConceptWorld::random(96, 32, 4, law, 0.25, &mut rng)?;
    let data = sample_dataset(&world, 2000, &mut rng);
    let query = world.sample(&mut rng);

    println!("radius sweep around one query:");
    println!("{:>7} {:>6} {:>10} {:>9}", "radius", "size", "slack", "eta_ang");
    for r in [0.5, 1.0, 1.5, 2.0] {
        let nbhd = radius_neighborhood(&query.feature, &data, r, Space::Feature)?;
        if nbhd.len() == 0 {
            println!("{r:>7} {:>6} {:>10} {:>9}", 0, "-", "-");
            continue;
        }
        let slack = containment_slack(&query, &data, r)?;
        let geo = concentration_diagnostics(
            &nbhd,
            &data,
            &query,
            &world,
            world.s,
            64,
            None,
            &mut rng,
        )?;
        println!("{r:>7} {:>6} {:>10.4} {:>9.4}", nbhd.len(), slack, geo.eta_ang);
    }

    println!("\nlocal min-norm fit error over k (noise floor {:.3}):", world.sigma2);
    println!("{:>6} {:>12}", "k", "sq error");
    for k in [10, 25, 50, 100, 200, 400, 800] {
        let trials = 60;
        let mut err = 0.0;
        for t in 0..trials {
            let mut trng = SeededRng::with_stream(77, t);
            let data = sample_dataset(&world, 2000, &mut trng);
            let test = world.sample(&mut trng);
            let nbhd = knn(&test.feature, &data, k, Space::Feature)?;
            let feats: Vec<&[f64]> =
                nbhd.members.iter().map(|&m| data[m].feature.as_slice()).collect();
            let labels: Vec<f64> = nbhd.members.iter().map(|&m| data[m].label).collect();
            let fit = fit_global_minnorm(&Matrix::from_row_slices(&feats)?, &labels)?;
            err += (fit.predict(&test.feature) - world.f_star(&test.concept)).powi(2);
        }
        println!("{:>6} {:>12.4}", k, err / trials as f64);
    }
    println!("\nsmall k fits the noise, large k mixes pools; the minimum is interior");
    Ok(())
}
