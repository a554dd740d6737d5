//! Fit all three models to a small weighted network and compare the expected
//! constraints with the observed ones.

use recm::ensembles::{constraints_from_graph, expected_constraints, fit, FitOptions};
use recm::{global_stats, ModelKind, WeightedDigraph};

fn main() -> recm::Result<()> {
    let g = WeightedDigraph::from_edges(
        6,
        [
            (0, 1, 12),
            (1, 0, 9),
            (0, 2, 4),
            (2, 0, 4),
            (1, 2, 7),
            (2, 1, 1),
            (3, 0, 2),
            (0, 3, 5),
            (4, 1, 3),
            (2, 4, 6),
            (5, 2, 1),
            (3, 4, 2),
        ],
    )?;
    let s = global_stats(&g);
    println!(
        "n={} links={} volume={} reciprocated links={} reciprocated volume={}",
        s.n, s.links, s.volume, s.rec_links, s.rec_volume
    );

    let options = FitOptions {
        tol: 1e-6,
        max_iter: 2000,
    };
    for model in ModelKind::ALL {
        let targets = constraints_from_graph(&g, model);
        let r = fit(&targets, &options)?;
        println!(
            "\n{model}: converged={} residual={:.2e} iterations={} (newton {}, fixed point {}, pinned {})",
            r.converged, r.residual_sup_norm, r.iterations, r.newton_steps, r.fixed_point_steps, r.pinned
        );
        let expected = expected_constraints(&r.params)?;
        for (f, name) in model.constraint_names().iter().enumerate() {
            let obs: Vec<String> = targets
                .family(f)
                .iter()
                .map(|v| format!("{v:>5.1}"))
                .collect();
            let exp: Vec<String> = expected
                .family(f)
                .iter()
                .map(|v| format!("{v:>5.1}"))
                .collect();
            println!(
                "  {name:<14} observed {}\n  {:<14} expected {}",
                obs.join(" "),
                "",
                exp.join(" ")
            );
        }
    }
    Ok(())
}
