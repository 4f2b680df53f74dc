//! CSV formats spoken by the tool: price tables (`date,<a>,<b>`), return
//! series (`r1,r2`), and sample files (`u1,u2` in copula space, `x1,x2`
//! in data space). Parsers take byte slices so they can be driven by
//! in-memory tests and fuzzers as well as files.

use anyhow::{bail, ensure, Context, Result};
use chrono::NaiveDate;

/// A parsed two-asset price table. Only usable rows are kept: a row with
/// any missing cell is dropped pairwise, so the two series stay aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceTable {
    pub symbols: [String; 2],
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<[f64; 2]>,
}

/// Parses a price CSV with header `date,<a>,<b>`, ISO-8601 dates and
/// strictly positive decimal prices. Rows with an empty cell are skipped;
/// anything else malformed is an error. At least two usable rows must
/// remain (one return).
pub fn parse_prices(bytes: &[u8]) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = rdr.headers().context("unreadable price CSV header")?;
    ensure!(
        headers.len() == 3,
        "price CSV needs exactly 3 columns (date,<a>,<b>), got {}",
        headers.len()
    );
    ensure!(
        headers.get(0).is_some_and(|h| h.eq_ignore_ascii_case("date")),
        "first price CSV column must be 'date', got '{}'",
        headers.get(0).unwrap_or("")
    );
    let symbols = [headers[1].to_string(), headers[2].to_string()];
    ensure!(
        !symbols[0].is_empty() && !symbols[1].is_empty(),
        "price CSV symbol columns must be named"
    );

    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2; // 1-based, after the header
        let record = record.with_context(|| format!("malformed price CSV row {row}"))?;
        let cells = [&record[0], &record[1], &record[2]];
        if cells.iter().any(|c| c.is_empty()) {
            continue; // missing value: drop the row from both series
        }
        let date = NaiveDate::parse_from_str(cells[0], "%Y-%m-%d")
            .with_context(|| format!("row {row}: '{}' is not an ISO-8601 date", cells[0]))?;
        let mut pair = [0.0; 2];
        for (k, cell) in cells[1..].iter().enumerate() {
            let p: f64 = cell
                .parse()
                .with_context(|| format!("row {row}: '{cell}' is not a number"))?;
            ensure!(
                p.is_finite() && p > 0.0,
                "row {row}: price {p} for {} must be positive",
                symbols[k]
            );
            pair[k] = p;
        }
        dates.push(date);
        prices.push(pair);
    }
    ensure!(
        prices.len() >= 2,
        "need at least 2 usable price rows to compute returns, got {}",
        prices.len()
    );
    Ok(PriceTable {
        symbols,
        dates,
        prices,
    })
}

/// Percentage-change returns for both series of a price table, aligned
/// row-for-row (one fewer row than the table).
pub fn table_returns(table: &PriceTable) -> Result<Vec<[f64; 2]>> {
    let col = |k: usize| table.prices.iter().map(|p| p[k]).collect::<Vec<_>>();
    let ra = qopula::copula::daily_returns(&col(0))?;
    let rb = qopula::copula::daily_returns(&col(1))?;
    Ok(ra.into_iter().zip(rb).map(|(a, b)| [a, b]).collect())
}

/// Writes a `r1,r2` returns CSV (9 significant digits, trailing newline).
pub fn write_returns_csv(returns: &[[f64; 2]]) -> String {
    let mut out = String::from("r1,r2\n");
    for r in returns {
        out.push_str(&format!("{},{}\n", format_sig(r[0]), format_sig(r[1])));
    }
    out
}

/// Parses a `r1,r2` returns CSV; every row must hold two finite numbers.
pub fn parse_returns(bytes: &[u8]) -> Result<Vec<[f64; 2]>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = rdr.headers().context("unreadable returns CSV header")?;
    ensure!(
        headers.len() == 2 && &headers[0] == "r1" && &headers[1] == "r2",
        "returns CSV must have header 'r1,r2'"
    );
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record.with_context(|| format!("malformed returns CSV row {row}"))?;
        rows.push(parse_pair(&record, row)?);
    }
    ensure!(!rows.is_empty(), "returns CSV has no data rows");
    Ok(rows)
}

/// Which space a sample CSV lives in, determined by its header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSpace {
    /// `u1,u2`: copula space, coordinates in [0, 1].
    Copula,
    /// `x1,x2`: data space, any finite values.
    Data,
}

impl SampleSpace {
    fn header(self) -> &'static str {
        match self {
            SampleSpace::Copula => "u1,u2",
            SampleSpace::Data => "x1,x2",
        }
    }
}

/// Parses a sample CSV, detecting the space from the `u1,u2` / `x1,x2`
/// header. Copula-space coordinates must lie in [0, 1].
pub fn parse_samples(bytes: &[u8]) -> Result<(SampleSpace, Vec<[f64; 2]>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = rdr.headers().context("unreadable samples CSV header")?;
    let space = if headers.len() == 2 && &headers[0] == "u1" && &headers[1] == "u2" {
        SampleSpace::Copula
    } else if headers.len() == 2 && &headers[0] == "x1" && &headers[1] == "x2" {
        SampleSpace::Data
    } else {
        bail!("samples CSV must have header 'u1,u2' or 'x1,x2'");
    };
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record.with_context(|| format!("malformed samples CSV row {row}"))?;
        let pair = parse_pair(&record, row)?;
        if space == SampleSpace::Copula {
            for u in pair {
                ensure!(
                    (0.0..=1.0).contains(&u),
                    "row {row}: copula coordinate {u} outside [0, 1]"
                );
            }
        }
        rows.push(pair);
    }
    ensure!(!rows.is_empty(), "samples CSV has no data rows");
    Ok((space, rows))
}

/// Writes a sample CSV in the given space (9 significant digits).
pub fn write_samples_csv(space: SampleSpace, rows: &[[f64; 2]]) -> String {
    let mut out = String::from(space.header());
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{}\n", format_sig(r[0]), format_sig(r[1])));
    }
    out
}

fn parse_pair(record: &csv::StringRecord, row: usize) -> Result<[f64; 2]> {
    ensure!(
        record.len() == 2,
        "row {row}: expected 2 columns, got {}",
        record.len()
    );
    let mut pair = [0.0; 2];
    for k in 0..2 {
        let cell = &record[k];
        let v: f64 = cell
            .parse()
            .with_context(|| format!("row {row}: '{cell}' is not a number"))?;
        ensure!(v.is_finite(), "row {row}: non-finite value {v}");
        pair[k] = v;
    }
    Ok(pair)
}

/// Formats with 9 significant digits, plain decimal for moderate
/// magnitudes and scientific notation otherwise (the `%.9g` convention).
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let epos = sci.find('e').expect("scientific format always has an exponent");
    let exp: i32 = sci[epos + 1..].parse().expect("exponent is an integer");
    if (-4..=8).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}
