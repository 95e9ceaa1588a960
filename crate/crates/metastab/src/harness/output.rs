//! CSV and gnuplot emission. Numbers use 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::{Module, SweepResult, Table};

fn number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Turns a scenario key into a file stem.
pub fn file_stem(key: &str) -> String {
    key.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn table_csv(t: &Table) -> String {
    let mut s = t.columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in &t.rows {
        s.push_str(&row.iter().map(|v| number(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// `key,metric,value` rows in key order.
pub fn summary_csv(r: &SweepResult) -> String {
    let mut s = String::from("key,metric,value\n");
    for (k, m) in &r.records {
        for (name, v) in m {
            let _ = writeln!(s, "{},{},{}", quote(k), name, number(*v));
        }
    }
    s
}

pub fn fits_csv(r: &SweepResult) -> String {
    let mut s = String::from("fit,slope,intercept,residual\n");
    for (k, f) in &r.fits {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            quote(k),
            number(f.slope),
            number(f.intercept),
            number(f.residual)
        );
    }
    s
}

/// Writes `summary.csv`, `fits.csv` and one CSV per table under `dir`.
pub fn write_outputs(r: &SweepResult, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("tables"))?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, text: String| -> io::Result<()> {
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put(dir.join("summary.csv"), summary_csv(r))?;
    put(dir.join("fits.csv"), fits_csv(r))?;
    for (name, t) in &r.tables {
        put(
            dir.join("tables").join(format!("{}.csv", file_stem(name))),
            table_csv(t),
        )?;
    }
    Ok(written)
}

fn header(title: &str, out: &str) -> String {
    format!("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 1000,700\nset output '{out}'\nset title '{title}'\n")
}

fn snapshot_script(name: &str, t: &Table) -> String {
    let stem = file_stem(name);
    let panels = t.columns.len().saturating_sub(1);
    let mut s = header(name, &format!("{stem}.png"));
    let _ = writeln!(s, "set multiplot layout 1,{panels}");
    for c in 0..panels {
        let _ = writeln!(s, "plot '../tables/{stem}.csv' using 1:{} with lines", c + 2);
    }
    s.push_str("unset multiplot\n");
    s
}

fn overlay_script(track: &str, drift: &str) -> String {
    let (a, b) = (file_stem(track), file_stem(drift));
    let mut s = header(track, &format!("{a}.png"));
    s.push_str("set xlabel 't'\nset ylabel 'layer position'\n");
    let _ = writeln!(
        s,
        "plot '../tables/{a}.csv' using 1:2 with points title 'PDE', \\\n     '../tables/{b}.csv' using 1:2 with lines title 'drift'"
    );
    s
}

fn spectrum_script(r: &SweepResult) -> String {
    let mut s = header(&r.scenario, "spectrum.png");
    s.push_str("set logscale y\nset xlabel '1/eps'\nset ylabel '|lambda|'\n");
    s.push_str("plot '../tables/spectrum.csv' using 1:2 with linespoints title '|lambda_1|', \\\n     '' using 1:3 with linespoints title '|lambda_2|'\n");
    s
}

/// Table of `1/eps, |lambda_1|, |lambda_2|` in key order.
fn spectrum_table(r: &SweepResult) -> Table {
    let mut t = Table::new(&["inv_eps", "abs_lambda1", "abs_lambda2"]);
    for m in r.records.values() {
        if let (Some(e), Some(l1), Some(l2)) = (m.get("epsilon"), m.get("lambda1"), m.get("lambda2")) {
            t.rows.push(vec![1.0 / e, l1.abs(), l2.abs()]);
        }
    }
    t.rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    t
}

/// Writes gnuplot scripts under `dir/plots` that read the CSVs from `dir/tables`.
pub fn emit_plots(r: &SweepResult, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if r.is_empty() {
        return Ok(written);
    }
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    fs::create_dir_all(dir.join("tables"))?;
    let mut put = |name: String, text: String| -> io::Result<()> {
        let p = plots.join(name);
        fs::write(&p, text)?;
        written.push(p);
        Ok(())
    };
    for (name, t) in &r.tables {
        if name.starts_with("snapshots/") {
            put(format!("{}.gp", file_stem(name)), snapshot_script(name, t))?;
        }
        if let Some(rest) = name.strip_prefix("track/") {
            let drift = format!("drift/{rest}");
            if r.tables.contains_key(&drift) {
                put(format!("{}.gp", file_stem(name)), overlay_script(name, &drift))?;
            }
        }
    }
    if r.module == Module::Spectrum {
        fs::write(dir.join("tables").join("spectrum.csv"), table_csv(&spectrum_table(r)))?;
        put("spectrum.gp".into(), spectrum_script(r))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(number(0.1), "1.0000000000000001e-1");
        assert_eq!(number(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn csv_has_header() {
        let mut t = Table::new(&["a", "b,c"]);
        t.rows.push(vec![1.0, 2.0]);
        let s = table_csv(&t);
        assert!(s.starts_with("a,\"b,c\"\n"));
        assert_eq!(s.lines().count(), 2);
    }

    #[test]
    fn stems_are_path_safe() {
        assert_eq!(
            file_stem("track/burgers/eps=0.1/xi=0.3"),
            "track_burgers_eps_0.1_xi_0.3"
        );
    }
}
