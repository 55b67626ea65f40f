//! Line-oriented run reports: `key=value` lines, fenced tables and a final
//! `status=ok|fail` line.

use std::fmt::Write as _;

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub entries: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub ok: bool,
}

/// Formats a float with full round-trip precision.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

impl Report {
    pub fn new() -> Self {
        Self { ok: true, ..Self::default() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn set_num(&mut self, key: &str, value: f64) {
        self.set(key, num(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        for t in &self.tables {
            let _ = writeln!(s, "```table {}", t.name);
            let _ = writeln!(s, "{}", t.columns.join(","));
            for r in &t.rows {
                let _ = writeln!(s, "{}", r.join(","));
            }
            let _ = writeln!(s, "```");
        }
        let _ = writeln!(s, "status={}", if self.ok { "ok" } else { "fail" });
        s
    }

    /// Reads `key=value` lines back (tables are skipped).
    pub fn parse_entries(text: &str) -> Vec<(String, String)> {
        let mut out = vec![];
        let mut in_table = false;
        for line in text.lines() {
            if line.starts_with("```") {
                in_table = !in_table;
                continue;
            }
            if in_table {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                out.push((k.to_string(), v.to_string()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trip() {
        let mut r = Report::new();
        r.set("command", "ode");
        r.set_num("rate", std::f64::consts::SQRT_2);
        let mut t = Table::new("u", &["y", "u"]);
        t.row(vec!["1".into(), "0.5".into()]);
        r.table(t);
        let text = r.render();
        assert!(text.ends_with("status=ok\n"));
        let e = Report::parse_entries(&text);
        let rate: f64 = e.iter().find(|(k, _)| k == "rate").unwrap().1.parse().unwrap();
        assert_eq!(rate, std::f64::consts::SQRT_2);
        assert_eq!(e.last().unwrap().1, "ok");
    }
}
