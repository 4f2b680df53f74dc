//! Regenerates the bundled synthetic price dataset
//! (`data/synthetic_prices.csv`): two artificial assets whose daily
//! returns share a Gaussian copula with rho = 0.6 and normal marginals.
//! Checked in so the data's provenance is reproducible; tests treat the
//! dependence parameter as known ground truth.

use std::fs;

use chrono::{Datelike, NaiveDate, Weekday};
use qopula::models::{normal_quantile, sample_gaussian_copula, GaussianCopulaModel};
use qopula_cli::csvio::format_sig;

const RETURN_ROWS: usize = 1500;
const RHO: f64 = 0.6;
const SEED: u64 = 20170102;
// Daily drift/volatility per asset.
const MU: [f64; 2] = [0.0004, 0.0003];
const SIGMA: [f64; 2] = [0.012, 0.015];
const START_PRICE: [f64; 2] = [100.0, 50.0];

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/synthetic_prices.csv".into());

    let copula = GaussianCopulaModel::new(RHO)?;
    let u = sample_gaussian_copula(&copula, RETURN_ROWS, SEED);

    let mut date = NaiveDate::from_ymd_opt(2017, 1, 2).expect("valid start date");
    let mut prices = START_PRICE;
    let mut csv = String::from("date,SYNA,SYNB\n");
    csv.push_str(&row(date, prices));
    for point in &u {
        for k in 0..2 {
            let r = MU[k] + SIGMA[k] * normal_quantile(point[k])?;
            prices[k] *= 1.0 + r;
        }
        date = next_weekday(date);
        csv.push_str(&row(date, prices));
    }

    fs::write(&out, csv)?;
    println!("wrote {} price rows to {out}", RETURN_ROWS + 1);
    Ok(())
}

fn row(date: NaiveDate, prices: [f64; 2]) -> String {
    format!(
        "{},{},{}\n",
        date.format("%Y-%m-%d"),
        format_sig(prices[0]),
        format_sig(prices[1])
    )
}

fn next_weekday(mut date: NaiveDate) -> NaiveDate {
    loop {
        date = date.succ_opt().expect("dates stay in range");
        if !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            return date;
        }
    }
}
