use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{open_reader, parse_error};
use crate::error::{Error, Result};
use crate::linalg::ObservationMatrix;
use crate::warning::Warning;

/// Daily prices: one row per date, one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeriesTable {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub prices: DMatrix<f64>,
}

impl PriceSeriesTable {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.shape() != (dates.len(), tickers.len()) {
            return Err(Error::Input(format!(
                "price matrix is {}x{} but there are {} dates and {} tickers",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        if let Some(w) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!(
                "dates not strictly increasing at {} -> {}",
                dates[w],
                dates[w + 1]
            )));
        }
        for (col, ticker) in tickers.iter().enumerate() {
            for (row, date) in dates.iter().enumerate() {
                let v = prices[(row, col)];
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Input(format!(
                        "price {v} for {ticker} on {date} is not a positive number"
                    )));
                }
            }
        }
        Ok(Self {
            dates,
            tickers,
            prices,
        })
    }

    /// Rows with `from <= date <= to`.
    pub fn between(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Self {
        let keep: Vec<usize> = (0..self.dates.len())
            .filter(|&i| {
                let d = self.dates[i];
                from.is_none_or(|f| d >= f) && to.is_none_or(|t| d <= t)
            })
            .collect();
        Self {
            dates: keep.iter().map(|&i| self.dates[i]).collect(),
            tickers: self.tickers.clone(),
            prices: self.prices.select_rows(keep.iter()),
        }
    }
}

/// Reads `date,TICKER1,TICKER2,...` with ISO dates. Rows with empty cells are
/// dropped and reported; unparsable cells are errors.
pub fn read_prices(path: &Path) -> Result<(PriceSeriesTable, Vec<Warning>)> {
    let mut reader = open_reader(path)?;
    let mut records = reader.records();
    let header = loop {
        match records.next() {
            None => return Err(parse_error(path, 1, "empty price file")),
            Some(r) => {
                let r = r.map_err(|e| parse_error(path, 1, e.to_string()))?;
                if !r.iter().all(str::is_empty) {
                    break r;
                }
            }
        }
    };
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if tickers.is_empty() {
        return Err(parse_error(path, 1, "header names no tickers"));
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    for record in records {
        let record = record.map_err(|e| {
            parse_error(path, e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != tickers.len() + 1 {
            return Err(parse_error(
                path,
                line,
                format!("{} cells, expected {}", record.len(), tickers.len() + 1),
            ));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| parse_error(path, line, format!("bad date {:?}: {e}", &record[0])))?;
        if record.iter().skip(1).any(str::is_empty) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(tickers.len());
        for (k, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(path, line, format!("non-numeric price {cell:?} for {}", tickers[k]))
            })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(parse_error(
                    path,
                    line,
                    format!("nonpositive price {v} for {} on {date}", tickers[k]),
                ));
            }
            row.push(v);
        }
        dates.push(date);
        values.push(row);
    }
    let prices = DMatrix::from_fn(dates.len(), tickers.len(), |i, j| values[i][j]);
    let table = PriceSeriesTable::new(dates, tickers, prices)?;
    let warnings = if dropped > 0 {
        vec![Warning::RowsDropped { count: dropped }]
    } else {
        vec![]
    };
    Ok((table, warnings))
}

/// `r_{t,i} = log(P_{t,i} / P_{t-1,i})` as a `tickers × (dates - 1)` matrix.
pub fn log_return_matrix(table: &PriceSeriesTable) -> Result<DMatrix<f64>> {
    let (t, p) = table.prices.shape();
    if t < 2 {
        return Err(Error::Input(format!("{t} date(s); log returns need at least 2")));
    }
    for j in 0..p {
        for i in 0..t {
            let v = table.prices[(i, j)];
            if !(v > 0.0) {
                return Err(Error::Input(format!(
                    "nonpositive price {v} for {} on {}",
                    table.tickers[j], table.dates[i]
                )));
            }
        }
    }
    Ok(DMatrix::from_fn(p, t - 1, |i, k| {
        (table.prices[(k + 1, i)] / table.prices[(k, i)]).ln()
    }))
}

/// Log returns as a sample of `dates - 1` observations (needs 3 or more dates).
pub fn log_returns(table: &PriceSeriesTable) -> Result<ObservationMatrix> {
    ObservationMatrix::new(log_return_matrix(table)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn day(i: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let t = PriceSeriesTable::new(
            (0..4).map(day).collect(),
            vec!["A".into(), "B".into()],
            DMatrix::from_element(4, 2, 7.5),
        )
        .unwrap();
        let r = log_returns(&t).unwrap();
        assert_eq!((r.p(), r.n_obs()), (2, 3));
        assert!(r.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_log_ratio() {
        let prices = DMatrix::from_row_slice(2, 1, &[1.0, std::f64::consts::E]);
        let t = PriceSeriesTable::new((0..2).map(day).collect(), vec!["X".into()], prices).unwrap();
        let r = log_return_matrix(&t).unwrap();
        assert_eq!(r.shape(), (1, 1));
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15);
        // one return is not a usable sample
        assert!(matches!(log_returns(&t), Err(Error::DegenerateSample { .. })));
    }

    #[test]
    fn quarter_sizes() {
        // 63 trading days and 71 tickers give 62 returns, i.e. n = 61
        let t = PriceSeriesTable::new(
            (0..63).map(day).collect(),
            (0..71).map(|i| format!("T{i}")).collect(),
            DMatrix::from_fn(63, 71, |i, j| 10.0 + ((i * 7 + j * 3) % 11) as f64),
        )
        .unwrap();
        let r = log_returns(&t).unwrap();
        assert_eq!((r.p(), r.n_obs(), r.dof()), (71, 62, 61));
    }

    #[test]
    fn reading_drops_incomplete_rows_and_rejects_bad_prices() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "date,AAA,BBB\n2012-01-03,1.0,2.0\n2012-01-04,,2.1\n2012-01-05,1.1,2.2\n2012-01-06,1.2,2.3\n"
        )
        .unwrap();
        let (t, w) = read_prices(f.path()).unwrap();
        assert_eq!(t.dates.len(), 3);
        assert_eq!(w, vec![Warning::RowsDropped { count: 1 }]);
        let q = t.between(Some(day(2)), Some(day(4)));
        assert_eq!(q.dates.len(), 2);

        let mut g = tempfile::NamedTempFile::new().unwrap();
        write!(g, "date,AAA\n2012-01-03,1.0\n2012-01-04,-1.0\n").unwrap();
        let err = read_prices(g.path()).unwrap_err();
        assert!(err.to_string().contains("AAA") && err.to_string().contains("line 3"), "{err}");
    }
}
