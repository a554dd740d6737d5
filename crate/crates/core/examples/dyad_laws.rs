//! The joint law of one dyad under each model, and the six RECM cases.

use recm::ensembles::{dyad_probability, recm_case_probabilities};
use recm::{dyad_decompose, ModelKind, ParamSet};

fn main() -> recm::Result<()> {
    // families are node-major blocks: DECM [k_out, k_in, l_out, l_in],
    // RWCM [l_out_nonrec, l_in_nonrec, l_rec], RECM adds degree multipliers.
    let decm = ParamSet::new(
        ModelKind::Decm,
        2,
        vec![1.5, 0.8, 0.7, 1.2, 0.4, 0.3, 0.5, 0.6],
    )?;
    let rwcm = ParamSet::new(ModelKind::Rwcm, 2, vec![0.4, 0.3, 0.5, 0.6, 0.7, 0.6])?;
    let recm = ParamSet::new(
        ModelKind::Recm,
        2,
        vec![1.5, 0.8, 0.7, 1.2, 2.0, 1.1, 0.4, 0.3, 0.5, 0.6, 0.7, 0.6],
    )?;

    println!("P(w_01, w_10) for small weights");
    println!(
        "{:>8} {:>10} {:>10} {:>10}",
        "(a,b)", "decm", "rwcm", "recm"
    );
    for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (3, 3), (5, 2)] {
        println!(
            "{:>8} {:>10.5} {:>10.5} {:>10.5}",
            format!("({a},{b})"),
            dyad_probability(&decm, 0, 1, a, b)?,
            dyad_probability(&rwcm, 0, 1, a, b)?,
            dyad_probability(&recm, 0, 1, a, b)?,
        );
    }

    let names = [
        "empty",
        "0->1 only",
        "1->0 only",
        "balanced",
        "0->1 surplus",
        "1->0 surplus",
    ];
    let cases = recm_case_probabilities(&recm, 0, 1)?.as_array();
    println!("\nRECM case probabilities");
    for (name, p) in names.iter().zip(cases) {
        println!("  {name:<14} {p:.6}");
    }
    println!("  total          {:.15}", cases.iter().sum::<f64>());

    let d = dyad_decompose(7, 3);
    println!("\n(7, 3) splits into {:?}, state {:?}", d, d.state());
    Ok(())
}
