use annoproj::stats::Table;
use serde::{Deserialize, Serialize};

/// Revision counts for one language or a whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RevisionCounts {
    pub total_mismatches: usize,
    /// Mismatch candidates with a decision.
    pub checked: usize,
    /// Checked mismatch candidates whose span was changed or rejected.
    pub corrected: usize,
    pub total_missing: usize,
    /// MISSING annotations materialized by an ADD decision.
    pub created: usize,
}

impl std::ops::AddAssign for RevisionCounts {
    fn add_assign(&mut self, o: Self) {
        self.total_mismatches += o.total_mismatches;
        self.checked += o.checked;
        self.corrected += o.corrected;
        self.total_missing += o.total_missing;
        self.created += o.created;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionStats {
    pub total_mismatches: usize,
    pub checked: usize,
    pub corrected: usize,
    /// corrected / checked, 0 when nothing was checked.
    pub error_rate: f64,
    pub total_missing: usize,
    pub created: usize,
}

impl RevisionStats {
    pub fn from_counts(c: RevisionCounts) -> Self {
        debug_assert!(c.corrected <= c.checked && c.checked <= c.total_mismatches);
        debug_assert!(c.created <= c.total_missing);
        let error_rate = if c.checked == 0 {
            0.0
        } else {
            c.corrected as f64 / c.checked as f64
        };
        Self {
            total_mismatches: c.total_mismatches,
            checked: c.checked,
            corrected: c.corrected,
            error_rate,
            total_missing: c.total_missing,
            created: c.created,
        }
    }

    pub fn counts(&self) -> RevisionCounts {
        RevisionCounts {
            total_mismatches: self.total_mismatches,
            checked: self.checked,
            corrected: self.corrected,
            total_missing: self.total_missing,
            created: self.created,
        }
    }

    /// Error rate as a percentage truncated to one decimal ("14.6%" for 71/483).
    pub fn error_rate_display(&self) -> String {
        percent_truncated(self.corrected, self.checked)
    }
}

/// `num / den` as a percentage truncated (not rounded) to one decimal.
pub fn percent_truncated(num: usize, den: usize) -> String {
    let permille = (num * 1000).checked_div(den).unwrap_or(0);
    format!("{}.{}%", permille / 10, permille % 10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageRevision {
    pub language: String,
    #[serde(flatten)]
    pub stats: RevisionStats,
}

/// Metrics as rows, one column per language.
pub fn revision_table(languages: &[LanguageRevision]) -> Table {
    let mut headers = vec![String::new()];
    headers.extend(languages.iter().map(|l| l.language.clone()));
    let mut t = Table::new(headers);
    let row = |label: &str, f: &dyn Fn(&RevisionStats) -> String| {
        let mut r = vec![label.to_string()];
        r.extend(languages.iter().map(|l| f(&l.stats)));
        r
    };
    t.push_row(row("Total mismatches", &|s| s.total_mismatches.to_string()));
    t.push_row(row("Checked mismatches", &|s| s.checked.to_string()));
    t.push_row(row("Corrected mismatches", &|s| s.corrected.to_string()));
    t.push_row(row("Error rate on checked", &|s| s.error_rate_display()));
    t.push_row(row("Total missing", &|s| s.total_missing.to_string()));
    t.push_row(row("Created missing", &|s| s.created.to_string()));
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(total: usize, checked: usize, corrected: usize) -> RevisionStats {
        RevisionStats::from_counts(RevisionCounts {
            total_mismatches: total,
            checked,
            corrected,
            ..Default::default()
        })
    }

    #[test]
    fn error_rate_arithmetic() {
        let s = stats(10, 6, 2);
        assert_eq!(s.error_rate, 2.0 / 6.0);
        assert_eq!(s.error_rate_display(), "33.3%");
        assert_eq!(stats(5, 0, 0).error_rate, 0.0);
        assert_eq!(stats(5, 0, 0).error_rate_display(), "0.0%");
        assert_eq!(stats(4, 4, 4).error_rate_display(), "100.0%");
    }

    #[test]
    fn truncated_display() {
        assert_eq!(percent_truncated(71, 483), "14.6%");
        assert_eq!(percent_truncated(274, 615), "44.5%");
        assert_eq!(percent_truncated(102, 768), "13.2%");
        assert_eq!(percent_truncated(207, 742), "27.8%");
        // 41.187: truncation gives 41.1, rounding would give 41.2
        assert_eq!(percent_truncated(236, 573), "41.1%");
        assert_eq!(percent_truncated(1, 8), "12.5%");
    }

    #[test]
    fn table_shape() {
        let langs = vec![
            LanguageRevision {
                language: "sk".into(),
                stats: stats(2899, 483, 71),
            },
            LanguageRevision {
                language: "it".into(),
                stats: stats(3032, 615, 274),
            },
        ];
        let t = revision_table(&langs);
        assert_eq!(t.rows.len(), 6);
        let text = t.to_text();
        assert!(text.lines().any(|l| l.starts_with("Error rate on checked") && l.contains("14.6%") && l.contains("44.5%")), "{text}");
    }
}
