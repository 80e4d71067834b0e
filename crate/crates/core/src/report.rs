//! Plain-text tables for fitted models, income-group elasticities and
//! scenario grids.

use std::fmt::Write;

use crate::design::{ControlBlock, LOG_PF, LOG_PI, LOG_PT};
use crate::estimator::{normal_p_value, ElasticitySet, Estimate, FitResult};
use crate::forecast::ScenarioGrid;

/// Placeholder printed for a section with nothing to show.
pub const EMPTY_SECTION: &str = "(no results)";

pub const SIGNIFICANCE_NOTE: &str =
    "Significance: *** p < 0.01, ** p < 0.05, * p < 0.1 (two-sided, normal approximation). USD are nominal, unadjusted.";

/// Significance stars at the 1, 5 and 10 percent levels.
///
/// ```
/// use vmt_rebound::report::stars;
/// assert_eq!(stars(0.003), "***");
/// assert_eq!(stars(0.2), "");
/// ```
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn starred(value: f64, p: f64) -> String {
    format!("{value:.4}{}", stars(p))
}

fn estimate_cells(e: Option<Estimate>) -> (String, String) {
    match e {
        Some(e) => (starred(e.value, normal_p_value(e.value / e.se)), format!("({:.4})", e.se)),
        None => (String::new(), String::new()),
    }
}

fn row_label(name: &str) -> String {
    let (price, suffix) = match name.split_once(':') {
        Some((p, s)) => (p, format!(" x {s}")),
        None => (name, String::new()),
    };
    let base = match price {
        LOG_PF => "log fuel cost/mile",
        LOG_PT => "log time cost/mile",
        LOG_PI => "log total cost/mile",
        other => other,
    };
    format!("{base}{suffix}")
}

fn is_price(name: &str) -> bool {
    let head = name.split(':').next().unwrap_or(name);
    [LOG_PF, LOG_PT, LOG_PI].contains(&head)
}

/// Lay out rows of cells with the first column left-aligned and the rest
/// right-aligned.
fn render(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, w) in widths.iter().enumerate() {
            let cell = r.get(c).map(String::as_str).unwrap_or("");
            if c == 0 {
                let _ = write!(line, "{cell:<w$}");
            } else {
                let _ = write!(line, "  {cell:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn rule(table: &str) -> String {
    "-".repeat(table.lines().map(|l| l.chars().count()).max().unwrap_or(0))
}

/// Side-by-side price coefficients of several fitted models with standard
/// errors in parentheses beneath each estimate.
pub fn model_table(fits: &[FitResult]) -> String {
    if fits.is_empty() {
        return format!("{EMPTY_SECTION}\n");
    }
    let mut names: Vec<&str> = Vec::new();
    for f in fits {
        for n in f.names.iter().filter(|n| is_price(n)) {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    let mut rows = vec![std::iter::once(String::new()).chain(fits.iter().map(|f| f.spec.model.label().to_string())).collect::<Vec<_>>()];
    for name in names {
        let cells: Vec<(String, String)> = fits.iter().map(|f| estimate_cells(f.coef(name))).collect();
        rows.push(std::iter::once(row_label(name)).chain(cells.iter().map(|c| c.0.clone())).collect());
        rows.push(std::iter::once(String::new()).chain(cells.iter().map(|c| c.1.clone())).collect());
    }
    for block in ControlBlock::ALL {
        rows.push(
            std::iter::once(format!("{} controls", block.as_str()))
                .chain(fits.iter().map(|f| if f.spec.control_blocks.contains(&block) { "Yes" } else { "No" }.to_string()))
                .collect(),
        );
    }
    rows.push(std::iter::once("Observations".to_string()).chain(fits.iter().map(|f| f.n.to_string())).collect());
    rows.push(std::iter::once("Clusters".to_string()).chain(fits.iter().map(|f| f.n_clusters.to_string())).collect());
    rows.push(std::iter::once("Pseudo R2".to_string()).chain(fits.iter().map(|f| format!("{:.4}", f.pseudo_r2))).collect());
    let body = render(&rows);
    let r = rule(&body);
    format!("{r}\n{body}{r}\n{SIGNIFICANCE_NOTE}\n")
}

/// Elasticities by income group, one panel per fitted model.
pub fn group_table(sets: &[ElasticitySet]) -> String {
    let sets: Vec<&ElasticitySet> = sets.iter().filter(|s| !s.per_group.is_empty()).collect();
    if sets.is_empty() {
        return format!("{EMPTY_SECTION}\n");
    }
    let mut out = String::new();
    for set in sets {
        let groups: Vec<u8> = set.per_group.keys().copied().collect();
        let mut rows = vec![std::iter::once(String::new()).chain(groups.iter().map(|g| format!("Group {g}"))).collect::<Vec<_>>()];
        let panels: [(&str, fn(&crate::estimator::GroupElasticity) -> Option<Estimate>); 3] = [
            ("fuel cost elasticity", |g| g.eps_f),
            ("time cost elasticity", |g| g.eps_t),
            ("total cost elasticity", |g| g.eps_vmt),
        ];
        for (label, get) in panels {
            let cells: Vec<(String, String)> = set.per_group.values().map(|g| estimate_cells(get(g))).collect();
            if cells.iter().all(|c| c.0.is_empty()) {
                continue;
            }
            rows.push(std::iter::once(label.to_string()).chain(cells.iter().map(|c| c.0.clone())).collect());
            rows.push(std::iter::once(String::new()).chain(cells.iter().map(|c| c.1.clone())).collect());
        }
        let body = render(&rows);
        let r = rule(&body);
        let _ = write!(out, "{}\n{r}\n{body}{r}\n", set.model.label());
    }
    out.push_str(SIGNIFICANCE_NOTE);
    out.push('\n');
    out
}

/// Induced travel in percent with fuel-economy gains down the rows and
/// time-cost reductions across the columns. Backfire cells carry a `+`.
pub fn grid_table(grid: &ScenarioGrid) -> String {
    if grid.x_values.is_empty() || grid.y_values.is_empty() {
        return format!("{EMPTY_SECTION}\n");
    }
    let mut rows = vec![std::iter::once("x \\ y".to_string())
        .chain(grid.y_values.iter().map(|y| format!("{:.0}%", y * 100.0)))
        .collect::<Vec<_>>()];
    for (i, x) in grid.x_values.iter().enumerate() {
        rows.push(
            std::iter::once(format!("{:.0}%", x * 100.0))
                .chain(grid.delta[i].iter().zip(&grid.backfire[i]).map(|(d, b)| format!("{:.1}{}", d * 100.0, if *b { "+" } else { " " })))
                .collect(),
        );
    }
    let mut out = render(&rows);
    out.push_str("Induced VMT (%); + marks backfire.\n");
    let frontier: Vec<Vec<String>> = grid
        .frontier
        .iter()
        .map(|p| {
            vec![
                format!("x = {:.0}%", p.x * 100.0),
                p.y_star.map_or_else(|| "none".to_string(), |y| format!("y* = {:.1}%", y * 100.0)),
            ]
        })
        .collect();
    if !frontier.is_empty() {
        out.push_str("Break-even time-cost reduction:\n");
        out.push_str(&render(&frontier));
    }
    out
}
