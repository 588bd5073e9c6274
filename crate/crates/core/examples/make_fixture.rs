//! Generate a deterministic synthetic fixture tree.
//!
//! ```text
//! cargo run -p tradecrew-core --example make_fixture -- <dir> [n_tickers] [seed]
//! ```

use tradecrew_core::data::save_repository;
use tradecrew_core::testkit::{synthetic_repository, FixtureSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| {
        eprintln!("usage: make_fixture <dir> [n_tickers] [seed]");
        std::process::exit(2);
    });
    let n_tickers: usize = args
        .next()
        .map(|v| v.parse().expect("n_tickers"))
        .unwrap_or(6);
    let seed: u64 = args
        .next()
        .map(|v| v.parse().expect("seed"))
        .unwrap_or(2024);
    let spec = FixtureSpec::desk(n_tickers, seed);
    let repo = synthetic_repository(&spec);
    save_repository(&repo, std::path::Path::new(&dir)).expect("write fixture");

    // Equal-weight open-to-open market return per month, as the demo index.
    let mut csv = String::from("month,return\n");
    let mut month = spec.price_start;
    while month < spec.price_end {
        let (Some(entry), Some(exit)) = (
            repo.calendar.first_business_day(month),
            repo.calendar.first_business_day(month.next()),
        ) else {
            month = month.next();
            continue;
        };
        let mut sum = 0.0;
        for code in repo.prices.keys() {
            let a = repo.open_on(code, entry).expect("open at entry");
            let b = repo.open_on(code, exit).expect("open at exit");
            sum += b / a - 1.0;
        }
        csv.push_str(&format!("{},{}\n", month, sum / repo.prices.len() as f64));
        month = month.next();
    }
    std::fs::write(format!("{dir}/index_returns.csv"), csv).expect("write index returns");

    println!(
        "wrote {} tickers, {} business days to {}",
        repo.universe.len(),
        repo.calendar.business_days().len(),
        dir
    );
}
