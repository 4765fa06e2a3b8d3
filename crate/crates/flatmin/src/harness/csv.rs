//! Minimal CSV builder. Every table starts with a `#` comment line carrying
//! the config hash, seed, and toolkit version, then a header row. Floats are
//! rendered with Rust's shortest round-trip formatting so identical runs
//! produce identical bytes.

pub struct CsvTable {
    comment: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(config_hash: u64, seed: u64, header: &[&str]) -> Self {
        Self {
            comment: format!(
                "# config_hash={config_hash:016x} seed={seed} version={}",
                env!("CARGO_PKG_VERSION")
            ),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.comment);
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Parse a CSV produced by [`CsvTable`]: skips `#` comments, returns
/// (header, rows).
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header: Vec<String> = lines
        .next()
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .unwrap_or_default();
    let rows = lines.map(|l| l.split(',').map(|s| s.to_string()).collect()).collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_parse() {
        let mut t = CsvTable::new(0xabcd, 7, &["a", "b"]);
        t.push_row(vec![fmt_f64(1.5), fmt_f64(f64::NAN)]);
        t.push_row(vec!["x".into(), fmt_f64(0.1)]);
        let text = t.to_text();
        assert!(text.starts_with("# config_hash=000000000000abcd seed=7"));
        let (header, rows) = parse_csv(&text);
        assert_eq!(header, vec!["a", "b"]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][0], "1.5");
        assert_eq!(rows[0][1], "nan");
    }
}
