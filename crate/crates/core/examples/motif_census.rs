//! Count the 13 triadic motifs, binary and weighted, and test them against a
//! RECM ensemble.

use recm::ensembles::{constraints_from_graph, fit, FitOptions};
use recm::motifs::{motif_census, motif_zscores, MOTIFS};
use recm::sampler::GraphSampler;
use recm::{ModelKind, WeightedDigraph};

fn main() -> recm::Result<()> {
    let mut g = WeightedDigraph::empty(10)?;
    for i in 0..10 {
        for j in 0..10 {
            if i != j && (i * 3 + j * 5) % 7 < 2 {
                g.set_weight(i, j, 1 + ((i * j) % 6) as u64)?;
            }
        }
    }
    let census = motif_census(&g);

    let r = fit(
        &constraints_from_graph(&g, ModelKind::Recm),
        &FitOptions::default(),
    )?;
    let ensemble = GraphSampler::new(&r.params)?.map(1, 500, |_, s| motif_census(s))?;
    let z = motif_zscores(&census, &ensemble)?;

    println!("motif  count  weighted   z(count)  z(weighted)");
    let show = |v: Option<f64>| v.map_or("undef".to_string(), |x| format!("{x:.2}"));
    for m in 0..MOTIFS {
        println!(
            "{:>5}  {:>5}  {:>8.2}  {:>9}  {:>11}",
            m + 1,
            census.unweighted[m],
            census.weighted[m],
            show(z.unweighted[m].value()),
            show(z.weighted[m].value()),
        );
    }
    Ok(())
}
