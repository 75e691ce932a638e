//! Pool-size histogram in the `[0,2) [2,5) … [25,30]` layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval edges; every interval is half-open except the last, which is closed.
pub const DEFAULT_EDGES: [usize; 8] = [0, 2, 5, 10, 15, 20, 25, 30];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolHistogram {
    pub edges: Vec<usize>,
    pub counts: Vec<u64>,
    /// Pools larger than the last edge.
    pub overflow: u64,
    pub total: u64,
}

pub fn pool_stats<I>(sizes: I, edges: &[usize]) -> Result<PoolHistogram>
where
    I: IntoIterator<Item = usize>,
{
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "histogram edges must be strictly increasing with at least two entries, got {edges:?}"
        )));
    }
    let bins = edges.len() - 1;
    let last = edges[bins];
    let mut counts = vec![0u64; bins];
    let mut overflow = 0;
    let mut total = 0;
    for size in sizes {
        total += 1;
        if size < edges[0] {
            overflow += 1;
        } else if size == last {
            counts[bins - 1] += 1;
        } else if size > last {
            overflow += 1;
        } else {
            // edges[bin] <= size < edges[bin + 1]
            let bin = edges.partition_point(|&e| e <= size) - 1;
            counts[bin] += 1;
        }
    }
    Ok(PoolHistogram {
        edges: edges.to_vec(),
        counts,
        overflow,
        total,
    })
}

fn group_thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl PoolHistogram {
    pub fn labels(&self) -> Vec<String> {
        let n = self.counts.len();
        (0..n)
            .map(|i| {
                let close = if i + 1 == n { ']' } else { ')' };
                format!("[{},{}{}", self.edges[i], self.edges[i + 1], close)
            })
            .collect()
    }

    /// Per-interval percentages of the total, rounded to two decimals.
    pub fn percentages(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| {
                if self.total == 0 {
                    0.0
                } else {
                    (c as f64 * 10_000.0 / self.total as f64).round() / 100.0
                }
            })
            .collect()
    }

    /// Plain-text table with a count row and a percentage row.
    pub fn render_table(&self) -> String {
        let mut header = vec!["Count Interval".to_string()];
        header.extend(self.labels());
        let mut counts = vec!["Count".to_string()];
        counts.extend(self.counts.iter().map(|&c| group_thousands(c)));
        let mut pct = vec!["Percentage(%)".to_string()];
        pct.extend(self.percentages().iter().map(|p| format!("{p:.2}")));
        if self.overflow > 0 {
            header.push(format!(">{}", self.edges[self.edges.len() - 1]));
            counts.push(group_thousands(self.overflow));
            let p = (self.overflow as f64 * 10_000.0 / self.total as f64).round() / 100.0;
            pct.push(format!("{p:.2}"));
        }
        header.push("Total".into());
        counts.push(group_thousands(self.total));
        pct.push(if self.total == 0 { "0" } else { "100" }.into());

        let rows = [header, counts, pct];
        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            out.push_str(cells.join(" | ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_counting() {
        let h = pool_stats([1, 1, 3], &DEFAULT_EDGES).unwrap();
        assert_eq!(h.counts, vec![2, 1, 0, 0, 0, 0, 0]);
        assert_eq!(h.total, 3);
    }

    #[test]
    fn last_interval_is_closed() {
        let h = pool_stats([30], &DEFAULT_EDGES).unwrap();
        assert_eq!(h.counts[6], 1);
        let h = pool_stats([31, 29, 25], &DEFAULT_EDGES).unwrap();
        assert_eq!(h.counts[6], 2);
        assert_eq!(h.overflow, 1);
    }

    #[test]
    fn empty_input() {
        let h = pool_stats(std::iter::empty(), &DEFAULT_EDGES).unwrap();
        assert_eq!(h.total, 0);
        assert!(h.counts.iter().all(|&c| c == 0));
        assert!(h.percentages().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn edges_must_increase() {
        assert!(pool_stats([1], &[0, 2, 2]).is_err());
        assert!(pool_stats([1], &[0]).is_err());
    }

    #[test]
    fn reference_corpus_counts_and_layout() {
        // bin counts of the full pre-filter StackOverflow python corpus
        let counts: [u64; 7] = [325_780, 245_793, 21_986, 2_057, 572, 203, 222];
        let reps = [1usize, 3, 7, 12, 17, 22, 27];
        let sizes = counts
            .iter()
            .zip(reps)
            .flat_map(|(&c, s)| std::iter::repeat_n(s, c as usize));
        let h = pool_stats(sizes, &DEFAULT_EDGES).unwrap();
        assert_eq!(h.counts, counts.to_vec());
        assert_eq!(h.total, 596_613);
        let sum: f64 = h.percentages().iter().sum();
        assert!((sum - 100.0).abs() <= 0.05, "{sum}");
        let table = h.render_table();
        let header: Vec<&str> = table.lines().next().unwrap().split('|').map(str::trim).collect();
        assert_eq!(
            header,
            [
                "Count Interval",
                "[0,2)",
                "[2,5)",
                "[5,10)",
                "[10,15)",
                "[15,20)",
                "[20,25)",
                "[25,30]",
                "Total"
            ]
        );
        assert!(table.contains("325,780"));
        assert!(table.contains("596,613"));
        assert!(table.contains("54.60"));
    }
}
