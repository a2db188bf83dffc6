//! Fixed-width metric tables with the best entry of each column starred.

use std::fmt::Write as _;

/// A metric column: display name and whether larger values are better.
#[derive(Debug, Clone, Copy)]
pub struct Metric<'a> {
    pub name: &'a str,
    pub higher_is_better: bool,
}

/// Values are compared after rounding to the printed 3 decimals, so rows
/// that look tied are all starred. Missing values print as `-`.
pub fn report_table(rows: &[(String, Vec<Option<f64>>)], metrics: &[Metric<'_>]) -> String {
    let round = |v: f64| (v * 1000.0).round() / 1000.0;
    let best: Vec<Option<f64>> = (0..metrics.len())
        .map(|c| {
            let vals = rows.iter().filter_map(|(_, r)| r.get(c).copied().flatten()).map(round);
            if metrics[c].higher_is_better {
                vals.reduce(f64::max)
            } else {
                vals.reduce(f64::min)
            }
        })
        .collect();

    let header: Vec<String> = metrics
        .iter()
        .map(|m| format!("{}{}", m.name, if m.higher_is_better { '+' } else { '-' }))
        .collect();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(_, r)| {
            (0..metrics.len())
                .map(|c| match r.get(c).copied().flatten() {
                    Some(v) if Some(round(v)) == best[c] => format!("{:.3}*", v),
                    Some(v) => format!("{:.3} ", v),
                    None => "- ".to_string(),
                })
                .collect()
        })
        .collect();

    let label_w = rows.iter().map(|(n, _)| n.chars().count()).chain([5]).max().unwrap_or(5);
    let widths: Vec<usize> = (0..metrics.len())
        .map(|c| cells.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count() + 1]).max().unwrap_or(1))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "Model");
    for (h, w) in header.iter().zip(&widths) {
        // headers line up with the numbers, not with the star column
        let _ = write!(out, "  {:>w$}", format!("{h} "), w = *w);
    }
    out.push('\n');
    let total = label_w + widths.iter().map(|w| w + 2).sum::<usize>();
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for ((name, _), row) in rows.iter().zip(&cells) {
        let _ = write!(out, "{name:<label_w$}");
        for (cell, w) in row.iter().zip(&widths) {
            let _ = write!(out, "  {cell:>w$}", w = *w);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: [Metric<'static>; 2] = [
        Metric { name: "CC", higher_is_better: true },
        Metric { name: "KLD", higher_is_better: false },
    ];

    fn row(name: &str, v: &[Option<f64>]) -> (String, Vec<Option<f64>>) {
        (name.to_string(), v.to_vec())
    }

    #[test]
    fn single_row_is_starred_everywhere() {
        let t = report_table(&[row("only", &[Some(0.5), Some(1.25)])], &M);
        let line = t.lines().nth(2).unwrap();
        assert_eq!(line.matches('*').count(), 2, "{t}");
        assert!(t.lines().next().unwrap().contains("CC+") && t.contains("KLD-"));
    }

    #[test]
    fn ties_star_both_rows() {
        let t = report_table(&[row("a", &[Some(0.8271), Some(0.3)]), row("b", &[Some(0.8269), Some(0.2)])], &M);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[2].contains("0.827*") && lines[3].contains("0.827*"), "{t}");
        assert!(lines[3].contains("0.200*") && !lines[2].contains("0.300*"));
    }

    #[test]
    fn columns_fit_the_widest_cell() {
        let t = report_table(
            &[row("a-very-long-model-name", &[Some(123456.0), None]), row("b", &[Some(1.0), Some(2.0)])],
            &M,
        );
        let lens: Vec<usize> = t.lines().map(|l| l.chars().count()).collect();
        assert!(lens.iter().all(|&l| l == lens[0]), "{t}");
        assert!(t.contains("123456.000*"));
        assert!(t.lines().nth(2).unwrap().trim_end().ends_with('-'));
    }
}
