use std::io::Write;

/// CSV table with `#` comment lines before and after the data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footer: Vec<String>,
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Self::default() }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| fmt(*v)).collect());
    }

    pub fn push_labelled(&mut self, label: &str, values: &[f64]) {
        let mut row = vec![label.to_string()];
        row.extend(values.iter().map(|v| fmt(*v)));
        self.rows.push(row);
    }

    /// Column `name` parsed back as numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r.get(k)?.parse().ok()).collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for line in &self.header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        for line in &self.footer {
            writeln!(w, "# {line}")?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 table")
    }
}
