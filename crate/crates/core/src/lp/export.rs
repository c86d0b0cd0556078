//! CPLEX LP text format, readable by HiGHS, GLPK, CBC, Gurobi and CPLEX.

use std::fmt::Write;

use super::LinearProgram;

fn term(out: &mut String, coef: f64, name: &str, first: bool) {
    let sign = if coef < 0.0 { "-" } else if first { "" } else { "+" };
    let _ = write!(out, " {sign} {:e} {name}", coef.abs());
}

fn var_name(lp: &LinearProgram, j: usize) -> String {
    let raw = lp.col_names.get(j).filter(|s| !s.is_empty()).cloned().unwrap_or_else(|| format!("x{j}"));
    let clean: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    format!("{clean}_{j}")
}

pub fn write_lp_format(lp: &LinearProgram) -> String {
    let names: Vec<String> = (0..lp.num_vars()).map(|j| var_name(lp, j)).collect();
    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, c, &names[j], first);
            first = false;
        }
    }
    if first {
        let _ = write!(out, " 0 {}", names.first().map_or("x0", |s| s.as_str()));
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let mut body = String::new();
        for (k, &(j, c)) in row.coefs.iter().enumerate() {
            term(&mut body, c, &names[j], k == 0);
        }
        if row.lower == row.upper {
            let _ = writeln!(out, " r{i}:{body} = {:e}", row.upper);
            continue;
        }
        if row.lower.is_finite() {
            let _ = writeln!(out, " r{i}_lo:{body} >= {:e}", row.lower);
        }
        if row.upper.is_finite() {
            let _ = writeln!(out, " r{i}_up:{body} <= {:e}", row.upper);
        }
    }
    out.push_str("Bounds\n");
    for (j, name) in names.iter().enumerate() {
        let (l, u) = (lp.col_lower[j], lp.col_upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) => {
                let _ = writeln!(out, " {l:e} <= {name} <= {u:e}");
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {l:e}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {u:e}");
            }
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Row;

    #[test]
    fn writes_sections() {
        let mut lp = LinearProgram::new();
        let t = lp.add_var("t", 1.0, f64::NEG_INFINITY, f64::INFINITY);
        let g = lp.add_var("g[1,inf]", 0.0, 0.0, 1.0);
        lp.add_row(Row::le(vec![(g, -2.0), (t, -1.0)], -2.0));
        let text = write_lp_format(&lp);
        assert!(text.starts_with("Minimize\n obj:  1e0 t_0"));
        assert!(text.contains(" r0_up: - 2e0 g_1_inf__1 - 1e0 t_0 <= -2e0"));
        assert!(text.contains(" t_0 free"));
        assert!(text.contains(" 0e0 <= g_1_inf__1 <= 1e0"));
        assert!(text.ends_with("End\n"));
    }
}
