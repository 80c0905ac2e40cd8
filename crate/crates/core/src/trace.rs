//! Per-update simulation traces and their CSV export.
//!
//! Columns, in order: `t`, `link`, `p_<i>_<m>` for every link and slot,
//! `r_<i>`, `sat_<i>`, then `beta_<i>` (randomized runs with flags),
//! `ilast_<i>` (interference-triggered runs) and `branch` when present.
//! Floats use Rust's shortest round-trip formatting, so output is
//! byte-stable for a given run.

use std::io::Write;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Binary power packing response.
    Bpp,
    /// Fresh random row.
    Random,
    /// Row left unchanged.
    Keep,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Bpp => "bpp",
            Branch::Random => "random",
            Branch::Keep => "keep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub link: usize,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    pub satisfied: Vec<bool>,
    pub beta: Option<Vec<bool>>,
    pub i_last: Option<Vec<f64>>,
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub n_links: usize,
    pub frame_size: usize,
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn new(n_links: usize, frame_size: usize) -> Self {
        Self {
            n_links,
            frame_size,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn header(&self) -> Vec<String> {
        let n = self.n_links;
        let mut cols = vec!["t".to_string(), "link".to_string()];
        for i in 0..n {
            for m in 0..self.frame_size {
                cols.push(format!("p_{i}_{m}"));
            }
        }
        cols.extend((0..n).map(|i| format!("r_{i}")));
        cols.extend((0..n).map(|i| format!("sat_{i}")));
        let first = self.rows.first();
        if first.is_some_and(|r| r.beta.is_some()) {
            cols.extend((0..n).map(|i| format!("beta_{i}")));
        }
        if first.is_some_and(|r| r.i_last.is_some()) {
            cols.extend((0..n).map(|i| format!("ilast_{i}")));
        }
        if first.is_some_and(|r| r.branch.is_some()) {
            cols.push("branch".to_string());
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
        for row in &self.rows {
            let mut rec = vec![row.t.to_string(), row.link.to_string()];
            rec.extend(row.powers.iter().map(f64::to_string));
            rec.extend(row.rates.iter().map(f64::to_string));
            rec.extend(row.satisfied.iter().copied().map(flag));
            if let Some(beta) = &row.beta {
                rec.extend(beta.iter().copied().map(flag));
            }
            if let Some(i_last) = &row.i_last {
                rec.extend(i_last.iter().map(f64::to_string));
            }
            if let Some(branch) = row.branch {
                rec.push(branch.as_str().to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV write");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}
