/// A rectangular report table rendered as aligned text or CSV.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    /// Optional header row above `headers`: (title, number of columns spanned).
    pub groups: Vec<(String, usize)>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            groups: Vec::new(),
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: impl IntoIterator<Item = impl Into<String>>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.headers.len(), "row width must match headers");
        self.rows.push(row);
    }

    fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                w[i] = w[i].max(cell.chars().count());
            }
        }
        // widen the last column of each group so its title fits
        let mut col = 0;
        for (title, span) in &self.groups {
            if *span == 0 || col + span > w.len() {
                break;
            }
            let inner: usize = w[col..col + span].iter().sum::<usize>() + 2 * (span - 1);
            let need = title.chars().count();
            if need > inner {
                w[col + span - 1] += need - inner;
            }
            col += span;
        }
        w
    }

    /// First column left-aligned, the rest right-aligned, two-space gutters.
    pub fn to_text(&self) -> String {
        let w = self.widths();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let mut s = String::new();
            for (i, cell) in cells.iter().enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = w[i].saturating_sub(cell.chars().count());
                if i == 0 {
                    s.push_str(cell);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str(&" ".repeat(pad));
                    s.push_str(cell);
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        if !self.groups.is_empty() {
            let mut s = String::new();
            let mut col = 0;
            for (title, span) in &self.groups {
                if col > 0 {
                    s.push_str("  ");
                }
                let inner: usize = w[col..col + span].iter().sum::<usize>() + 2 * (span.saturating_sub(1));
                s.push_str(title);
                s.push_str(&" ".repeat(inner.saturating_sub(title.chars().count())));
                col += span;
            }
            out.push_str(s.trim_end());
            out.push('\n');
        }
        line(&self.headers, &mut out);
        let rule: usize = w.iter().sum::<usize>() + 2 * w.len().saturating_sub(1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for row in &self.rows {
            line(row, &mut out);
        }
        out
    }

    /// CSV with one header row. Grouped columns are prefixed `"{group} {header}"`.
    pub fn to_csv(&self) -> String {
        let mut headers = self.headers.clone();
        let mut col = 0;
        for (title, span) in &self.groups {
            for h in headers.iter_mut().skip(col).take(*span) {
                if !title.is_empty() {
                    *h = format!("{title} {h}");
                }
            }
            col += span;
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&headers).expect("in-memory write");
        for row in &self.rows {
            writer.write_record(row).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv of utf-8 cells is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_text_and_csv() {
        let mut t = Table::new(["", "CL", "TOT"]);
        t.groups = vec![(String::new(), 1), ("Missing".into(), 2)];
        t.push_row(["it", "41", "851"]);
        t.push_row(["Sloven.", "13", "338"]);
        assert_eq!(
            t.to_text(),
            "         Missing\n         CL  TOT\n----------------\nit       41  851\nSloven.  13  338\n"
        );
        assert_eq!(t.to_csv(), ",Missing CL,Missing TOT\nit,41,851\nSloven.,13,338\n");
    }

    #[test]
    fn csv_quotes_commas() {
        let mut t = Table::new(["a"]);
        t.push_row(["x,y"]);
        assert_eq!(t.to_csv(), "a\n\"x,y\"\n");
    }
}
