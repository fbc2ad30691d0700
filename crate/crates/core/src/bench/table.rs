//! CSV and Markdown rendering of result rows.

use std::fmt::Write;

use super::ResultRow;

pub const CSV_HEADER: &str = "method,n,mu,omega,alpha,IT,CPU_s,RES,converged,warnings";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = crate::error::GaveError;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(crate::error::GaveError::Config(format!("unknown table format `{other}`"))),
        }
    }
}

/// Scientific notation with `digits` decimals and a signed two-digit
/// exponent, e.g. `6.7322e-07`.
pub fn fmt_sci(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.digits$e}");
    let (mantissa, exp) = s.split_once('e').expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("LowerExp exponent is an integer");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_cpu(v: f64) -> String {
    format!("{v:.4}")
}

pub fn emit_table(rows: &[ResultRow], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => emit_csv(rows),
        TableFormat::Markdown => emit_markdown(rows),
    }
}

fn emit_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.method),
            r.n,
            fmt_opt(r.mu),
            csv_field(&r.omega),
            fmt_opt(r.alpha),
            r.iterations,
            fmt_cpu(r.cpu_s),
            fmt_sci(r.res, 4),
            r.converged,
            csv_field(&r.warnings.join("; ")),
        );
    }
    out
}

type CellFn = Box<dyn Fn(&ResultRow) -> String>;

/// One block per method (`IT`, `CPU`, `RES` rows, plus `α_exp` when the
/// method carries α) and one column per problem size.
fn emit_markdown(rows: &[ResultRow]) -> String {
    let mut sizes: Vec<usize> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let lookup = |m: &str, n: usize| rows.iter().find(|r| r.method == m && r.n == n);

    let mut out = String::new();
    let _ = write!(out, "| Method | n |");
    for n in &sizes {
        let _ = write!(out, " {n} |");
    }
    out.push('\n');
    out.push_str("|---|---|");
    for _ in &sizes {
        out.push_str("---|");
    }
    out.push('\n');

    for m in methods {
        let has_alpha = sizes.iter().any(|&n| lookup(m, n).is_some_and(|r| r.alpha.is_some()));
        let mut lines: Vec<(&str, CellFn)> = Vec::new();
        if has_alpha {
            lines.push(("α_exp", Box::new(|r: &ResultRow| fmt_opt(r.alpha))));
        }
        lines.push((
            "IT",
            Box::new(|r: &ResultRow| {
                if r.converged {
                    r.iterations.to_string()
                } else {
                    format!("{}*", r.iterations)
                }
            }),
        ));
        lines.push(("CPU", Box::new(|r: &ResultRow| fmt_cpu(r.cpu_s))));
        lines.push(("RES", Box::new(|r: &ResultRow| fmt_sci(r.res, 4))));
        for (i, (label, cell)) in lines.iter().enumerate() {
            let name = if i == 0 { m } else { "" };
            let _ = write!(out, "| {name} | {label} |");
            for &n in &sizes {
                let text = lookup(m, n).map(cell).unwrap_or_else(|| "-".into());
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
    }
    if rows.iter().any(|r| !r.converged) {
        out.push_str("\n`*` not converged within k_max or diverged.\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, n: usize, it: usize) -> ResultRow {
        ResultRow {
            method: method.into(),
            n,
            mu: Some(4.0),
            omega: "hatM".into(),
            alpha: None,
            iterations: it,
            cpu_s: 0.25,
            res: 6.7322e-7,
            converged: true,
            warnings: Vec::new(),
            x: Vec::new(),
        }
    }

    #[test]
    fn sci_format() {
        assert_eq!(fmt_sci(6.7322e-7, 4), "6.7322e-07");
        assert_eq!(fmt_sci(1.0, 4), "1.0000e+00");
        assert_eq!(fmt_sci(123456.0, 4), "1.2346e+05");
        assert_eq!(fmt_sci(0.0, 4), "0.0000e+00");
        assert_eq!(fmt_sci(2.5e-123, 1), "2.5e-123");
        assert_eq!(fmt_sci(f64::INFINITY, 4), "inf");
    }

    #[test]
    fn csv_single_row() {
        let out = emit_table(&[row("NJ", 10000, 12)], TableFormat::Csv);
        assert_eq!(
            out,
            "method,n,mu,omega,alpha,IT,CPU_s,RES,converged,warnings\n\
             NJ,10000,4,hatM,,12,0.2500,6.7322e-07,true,\n"
        );
    }

    #[test]
    fn csv_quotes_fields() {
        let mut r = row("NJ", 4, 1);
        r.warnings = vec!["a, b".into(), "c".into()];
        let out = emit_table(&[r], TableFormat::Csv);
        assert!(out.ends_with(",\"a, b; c\"\n"));
    }

    #[test]
    fn markdown_missing_cells_and_nonconverged() {
        let mut r2 = row("NGS", 400, 30);
        r2.converged = false;
        let out = emit_table(&[row("NJ", 100, 5), r2], TableFormat::Markdown);
        assert!(out.contains("| NJ | IT | 5 | - |"));
        assert!(out.contains("| NGS | IT | - | 30* |"));
        assert!(out.contains("not converged"));
    }
}
