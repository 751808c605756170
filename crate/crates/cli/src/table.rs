use gcr_core::inference::WaldRow;

pub fn fmt_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn print_wald(title: &str, rows: &[WaldRow]) {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(4);
    println!("{title}");
    println!("  {:<width$} {:>11} {:>11} {:>9} {:>10}", "term", "estimate", "std.error", "z", "p");
    for r in rows {
        println!(
            "  {:<width$} {:>11.5} {:>11.5} {:>9.3} {:>10} {}",
            r.name,
            r.estimate,
            r.std_error,
            r.z_stat,
            fmt_p(r.p_value),
            r.stars
        );
    }
}

pub fn print_estimates(title: &str, names: &[String], values: &[f64]) {
    let width = names.iter().map(String::len).max().unwrap_or(0).max(4);
    println!("{title}");
    for (n, v) in names.iter().zip(values) {
        println!("  {n:<width$} {v:>11.5}");
    }
}
