//! Draw a reproducible ensemble and compare network statistics with the
//! observed graph.

use recm::ensembles::{constraints_from_graph, fit, FitOptions};
use recm::sampler::{GraphSampler, StatDistribution};
use recm::{global_stats, ModelKind, WeightedDigraph};

fn main() -> recm::Result<()> {
    let mut g = WeightedDigraph::empty(12)?;
    for i in 0..12 {
        for j in 0..12 {
            if i != j && (i * 7 + j * 3) % 5 < 2 {
                g.set_weight(i, j, 1 + ((i + 2 * j) % 9) as u64)?;
            }
        }
    }
    let observed = global_stats(&g);

    for model in ModelKind::ALL {
        let r = fit(&constraints_from_graph(&g, model), &FitOptions::default())?;
        let sampler = GraphSampler::new(&r.params)?;
        // every sample has its own stream, so the result does not depend on threads
        let stats = sampler.map(2024, 1000, |_, s| global_stats(s))?;
        println!("{model} (1000 samples, seed 2024)");
        let rows: [(&str, f64, Vec<f64>); 4] = [
            (
                "links",
                observed.links as f64,
                stats.iter().map(|s| s.links as f64).collect(),
            ),
            (
                "volume",
                observed.volume as f64,
                stats.iter().map(|s| s.volume as f64).collect(),
            ),
            (
                "rec links",
                observed.rec_links as f64,
                stats.iter().map(|s| s.rec_links as f64).collect(),
            ),
            (
                "rec volume",
                observed.rec_volume as f64,
                stats.iter().map(|s| s.rec_volume as f64).collect(),
            ),
        ];
        for (name, x, values) in rows {
            let d = StatDistribution::from_values(name, values)?;
            println!(
                "  {name:<11} observed {x:>6} mean {:>8.2} 95% [{:>6.1}, {:>6.1}] z {:>6.2}",
                d.mean,
                d.p2_5,
                d.p97_5,
                d.z(x).value().unwrap_or(f64::NAN)
            );
        }
    }

    let a = GraphSampler::new(
        &fit(
            &constraints_from_graph(&g, ModelKind::Recm),
            &FitOptions::default(),
        )?
        .params,
    )?;
    assert_eq!(a.sample_indexed(7, 3)?, a.sample_indexed(7, 3)?);
    println!("\nsample (seed 7, index 3) is reproducible");
    Ok(())
}
