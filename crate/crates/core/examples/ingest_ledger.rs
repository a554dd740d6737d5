//! Aggregate a transaction ledger into one weighted graph per period and
//! write them as edge lists.

use recm::io::{ingest, write_graph_csv, IngestOptions, Period};

const LEDGER: &str = "\
date,time,lender,borrower,amount,maturity
2011-01-03,09:15:00,IT001,IT002,100,ON
2011-01-03,10:02:11,IT001,IT002,50,ON
2011-01-20,,IT003,IT001,75,ON
2011-02-11,14:00:00,IT002,IT004,20,1W
2011-02-28,,IT004,IT004,10,ON
2011-03-02,16:45:00,IT002,IT001,30,ON
2011-04-05,,IT003,IT002,5,ON
2011-05-17,11:30:00,IT001,IT003,40,ON
2011-06-30,,IT005,IT001,0,ON
";

fn main() -> recm::Result<()> {
    let options = IngestOptions {
        period: Period::Quarter,
        strict: false,
        filters: vec![("maturity".into(), "ON".into())],
    };
    let out = ingest(LEDGER.as_bytes(), &options)?;
    println!("filtered out {} rows", out.filtered);
    for s in &out.skipped {
        println!("skipped line {}: {}", s.line, s.message);
    }
    for p in &out.periods {
        println!(
            "\n{} ({} banks, {} links)",
            p.period,
            p.graph.n(),
            p.graph.link_count()
        );
        write_graph_csv(std::io::stdout(), &p.graph)?;
    }

    let strict = IngestOptions {
        strict: true,
        ..options
    };
    match ingest(LEDGER.as_bytes(), &strict) {
        Ok(_) => println!("\nstrict ingest succeeded"),
        Err(e) => println!("\nstrict ingest fails: {e}"),
    }
    Ok(())
}
