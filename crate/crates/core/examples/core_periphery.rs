//! Detect a core-periphery partition with the three available methods and
//! print the block statistics.

use recm::coreperiphery::{block_stats, detect_core, detect_core_exhaustive, detect_core_sorted};
use recm::WeightedDigraph;

fn main() -> recm::Result<()> {
    let mut g = WeightedDigraph::empty(14)?;
    // a complete core of four, each periphery node hangs off one core node
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                g.set_weight(i, j, 20 + (i + j) as u64)?;
            }
        }
    }
    for v in 4..14 {
        let u = v % 4;
        if v % 2 == 0 {
            g.set_weight(v, u, 3)?;
        } else {
            g.set_weight(u, v, 2)?;
        }
    }
    g.set_weight(5, 9, 1)?;
    g.set_weight(2, 11, 4)?;

    let sorted = detect_core_sorted(&g)?;
    let refined = detect_core(&g, 1000)?;
    let exact = detect_core_exhaustive(&g)?;
    for (name, p) in [
        ("sorted", &sorted),
        ("refined", &refined),
        ("exhaustive", &exact),
    ] {
        println!("{name:<11} core {:?} error {:.4}", p.core, p.error);
    }

    let b = block_stats(&g, &refined)?;
    println!("\nblock  links  density  volume  reciprocity");
    for (name, blk) in b.blocks() {
        println!(
            "{name:<6} {:>5}  {:>7}  {:>6}  {:>11}",
            blk.links,
            blk.density.map_or("-".into(), |d| format!("{d:.3}")),
            blk.volume,
            blk.reciprocity.map_or("-".into(), |r| format!("{r:.3}")),
        );
    }
    Ok(())
}
