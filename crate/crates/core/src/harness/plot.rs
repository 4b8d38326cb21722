//! Gnuplot data and scripts from curve or grid CSVs.
//!
//! The first CSV column names the series, the second is the x value and
//! every column whose header ends in `_pct` becomes a y curve.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub y_names: Vec<String>,
    /// `(series, rows of (x, ys))` in order of first appearance.
    pub series: Vec<(String, Vec<(f64, Vec<f64>)>)>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

/// Parse a CSV into plot series; `None` when it has no data rows.
pub fn read_plot_csv(text: &str) -> Result<Option<PlotData>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(header) = lines.next() else {
        return Ok(None);
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 {
        return Err(Error::arg("plot CSV needs a series and an x column"));
    }
    let y_idx: Vec<usize> = (2..cols.len()).filter(|&i| cols[i].ends_with("_pct")).collect();
    let mut series: Vec<(String, Vec<(f64, Vec<f64>)>)> = Vec::new();
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::arg(format!("plot CSV row {line:?} has {} fields", f.len())));
        }
        let Ok(x) = f[1].parse::<f64>() else { continue };
        let ys = y_idx
            .iter()
            .map(|&i| f[i].parse::<f64>().map_err(|_| Error::arg(format!("bad number {:?}", f[i]))))
            .collect::<Result<Vec<f64>>>()?;
        xr = (xr.0.min(x), xr.1.max(x));
        for &y in &ys {
            yr = (yr.0.min(y), yr.1.max(y));
        }
        match series.iter_mut().find(|(s, _)| s == f[0]) {
            Some((_, rows)) => rows.push((x, ys)),
            None => series.push((f[0].to_string(), vec![(x, ys)])),
        }
    }
    if series.is_empty() {
        return Ok(None);
    }
    Ok(Some(PlotData {
        y_names: y_idx.iter().map(|&i| cols[i].to_string()).collect(),
        series,
        x_range: xr,
        y_range: yr,
    }))
}

fn padded(r: (f64, f64)) -> (f64, f64) {
    let pad = if r.1 > r.0 { 0.02 * (r.1 - r.0) } else { 0.5 };
    (r.0 - pad, r.1 + pad)
}

fn safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Write one `.dat` per series and a `.gp` script covering all of them.
/// An empty CSV writes nothing.
pub fn emit_plots(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    let Some(data) = read_plot_csv(&text)? else {
        return Ok(Vec::new());
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    let mut files = Vec::new();
    let mut plots = Vec::new();
    for (name, rows) in &data.series {
        let dat = out_dir.join(format!("{stem}_{}.dat", safe(name)));
        let mut body = format!("# x {}\n", data.y_names.join(" "));
        for (x, ys) in rows {
            let _ = write!(body, "{x}");
            for y in ys {
                let _ = write!(body, " {y}");
            }
            body.push('\n');
        }
        fs::write(&dat, body).map_err(|e| Error::io(&dat, e))?;
        let file = dat.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        for (j, y) in data.y_names.iter().enumerate() {
            plots.push(format!("'{file}' using 1:{} with linespoints title '{name} {y}'", j + 2));
        }
        files.push(dat);
    }
    let (x0, x1) = padded(data.x_range);
    let (y0, y1) = padded(data.y_range);
    let script = format!(
        "set terminal pngcairo size 900,600\nset output '{stem}.png'\nset key outside right\n\
         set xrange [{x0}:{x1}]\nset yrange [{y0}:{y1}]\nset ylabel 'accuracy (%)'\nplot {}\n",
        plots.join(", \\\n     ")
    );
    let gp = out_dir.join(format!("{stem}.gp"));
    fs::write(&gp, script).map_err(|e| Error::io(&gp, e))?;
    files.push(gp);
    Ok(files)
}
