//! File outputs: grid-function CSV and binary dumps, iteration-record CSV,
//! self-contained SVG plots and run manifests. Plots are written directly as
//! SVG text so every artifact is reproducible and diffable.

use std::io::{Read, Write};
use std::path::Path;

use crate::banach::{GridFunction, Space};
use crate::iteration::IterationRecord;
use crate::{Error, Result};

/// Write `(index, value)` rows.
pub fn write_grid_csv(path: &Path, gf: &GridFunction) -> Result<()> {
    let mut out = String::with_capacity(16 * gf.len() + 16);
    out.push_str("index,value\n");
    for (i, v) in gf.values().iter().enumerate() {
        out.push_str(&format!("{i},{v:.17e}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a grid-function CSV back onto a given space.
pub fn read_grid_csv(path: &Path, space: Space) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(space.len());
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("index") {
            continue;
        }
        let (_, value) = line
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("malformed CSV row: {line}")))?;
        values.push(
            value
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad value {value:?}: {e}")))?,
        );
    }
    if values.len() != space.len() {
        return Err(Error::Config(format!(
            "CSV holds {} values, expected {}",
            values.len(),
            space.len()
        )));
    }
    Ok(GridFunction::new(space, values))
}

/// Binary dump: nodes-per-axis as u64, the quadrature weight, then the
/// values, all little-endian; the node count is recovered from the file
/// size. Flat vectors store a side of 0.
pub fn write_grid_binary(path: &Path, gf: &GridFunction) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&(gf.space().side() as u64).to_le_bytes())?;
    file.write_all(&gf.weight().to_le_bytes())?;
    for v in gf.values() {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_binary(path: &Path) -> Result<GridFunction> {
    let mut file = std::fs::File::open(path)?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    if buf.len() < 16 || (buf.len() - 16) % 8 != 0 {
        return Err(Error::Config("truncated binary grid dump".into()));
    }
    let side = u64::from_le_bytes(buf[0..8].try_into().unwrap()) as usize;
    let weight = f64::from_le_bytes(buf[8..16].try_into().unwrap());
    let values: Vec<f64> =
        buf[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let space = if side > 0 {
        if side * side != values.len() {
            return Err(Error::Config(format!(
                "dump claims side {side} but holds {} values",
                values.len()
            )));
        }
        if (weight - Space::grid(side).weight()).abs() > 1e-15 * weight.abs() {
            Space::flat(values.len(), weight)
        } else {
            Space::grid(side)
        }
    } else {
        Space::flat(values.len(), weight)
    };
    Ok(GridFunction::new(space, values))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

/// Iteration trace CSV with one row per visited iterate.
pub fn write_records_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut out =
        String::from("k,alpha,beta,residual,error_x,error_mid,gamma,Gamma,inner1,inner2\n");
    for r in records {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{},{},{},{},{},{}\n",
            r.k,
            r.alpha,
            r.beta,
            r.residual,
            opt(r.error_x),
            opt(r.error_mid),
            opt(r.gamma),
            opt(r.cap_gamma),
            r.stage1.map(|d| d.inner_iters).unwrap_or(0),
            r.stage2.map(|d| d.inner_iters).unwrap_or(0),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 480.0;
const MARGIN: f64 = 64.0;

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn from_log10(values: impl Iterator<Item = f64>) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if v > 0.0 && v.is_finite() {
                lo = lo.min(v.log10());
                hi = hi.max(v.log10());
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 0.5 {
            hi += 0.25;
            lo -= 0.25;
        }
        let pad = 0.05 * (hi - lo);
        Axis { lo: lo - pad, hi: hi + pad }
    }

    fn from_linear(values: impl Iterator<Item = f64>) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Axis { lo, hi }
    }

    fn to_x(&self, v: f64) -> f64 {
        MARGIN + (v - self.lo) / (self.hi - self.lo) * (PLOT_W - 2.0 * MARGIN)
    }

    fn to_y(&self, v: f64) -> f64 {
        PLOT_H - MARGIN - (v - self.lo) / (self.hi - self.lo) * (PLOT_H - 2.0 * MARGIN)
    }

    fn decade_ticks(&self) -> Vec<f64> {
        let first = self.lo.ceil() as i64;
        let last = self.hi.floor() as i64;
        (first..=last).map(|e| e as f64).collect()
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"15\">{}</text>\n",
        PLOT_W / 2.0,
        xml_escape(title)
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame_and_labels(xlabel: &str, ylabel: &str) -> String {
    format!(
        "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{by}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{xl}</text>\n\
         <text x=\"18\" y=\"{cy}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {cy})\">{yl}</text>\n",
        m = MARGIN,
        w = PLOT_W - 2.0 * MARGIN,
        h = PLOT_H - 2.0 * MARGIN,
        cx = PLOT_W / 2.0,
        by = PLOT_H - 18.0,
        cy = PLOT_H / 2.0,
        xl = xml_escape(xlabel),
        yl = xml_escape(ylabel),
    )
}

/// Log-log scatter with an optional fitted line (natural-log slope and
/// intercept, as produced by the rate fit).
pub fn svg_log_log(
    points: &[(f64, f64)],
    fit: Option<(f64, f64)>,
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let xaxis = Axis::from_log10(points.iter().map(|p| p.0));
    let yaxis = Axis::from_log10(points.iter().map(|p| p.1));
    let mut svg = svg_header(title);
    svg.push_str(&frame_and_labels(xlabel, ylabel));
    for t in xaxis.decade_ticks() {
        let x = xaxis.to_x(t);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#cccccc\"/>\n\
             <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">1e{}</text>\n",
            MARGIN,
            PLOT_H - MARGIN,
            PLOT_H - MARGIN + 16.0,
            t as i64
        ));
    }
    for t in yaxis.decade_ticks() {
        let y = yaxis.to_y(t);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#cccccc\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">1e{}</text>\n",
            MARGIN,
            PLOT_W - MARGIN,
            MARGIN - 6.0,
            y + 4.0,
            t as i64
        ));
    }
    if let Some((slope, intercept_ln)) = fit {
        let ln10 = std::f64::consts::LN_10;
        let y_at = |x10: f64| (slope * (x10 * ln10) + intercept_ln) / ln10;
        let (x0, x1) = (xaxis.lo, xaxis.hi);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#d62728\" \
             stroke-width=\"1.5\"/>\n",
            xaxis.to_x(x0),
            yaxis.to_y(y_at(x0)),
            xaxis.to_x(x1),
            yaxis.to_y(y_at(x1)),
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"#d62728\">slope {:.3}</text>\n",
            MARGIN + 10.0,
            MARGIN + 18.0,
            slope
        ));
    }
    for &(x, y) in points {
        if x > 0.0 && y > 0.0 {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"#1f77b4\"/>\n",
                xaxis.to_x(x.log10()),
                yaxis.to_y(y.log10())
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Named series against iteration index with a logarithmic value axis.
pub fn svg_semilogy(
    series: &[(String, Vec<f64>)],
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let max_len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(2);
    let xaxis = Axis::from_linear([0.0, (max_len - 1) as f64].into_iter());
    let yaxis = Axis::from_log10(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut svg = svg_header(title);
    svg.push_str(&frame_and_labels(xlabel, ylabel));
    for t in yaxis.decade_ticks() {
        let y = yaxis.to_y(t);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#cccccc\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">1e{}</text>\n",
            MARGIN,
            PLOT_W - MARGIN,
            MARGIN - 6.0,
            y + 4.0,
            t as i64
        ));
    }
    for (i, (name, values)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0 && v.is_finite())
            .map(|(k, &v)| format!("{},{}", xaxis.to_x(k as f64), yaxis.to_y(v.log10())))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{}</text>\n",
            pts.join(" "),
            MARGIN + 10.0,
            MARGIN + 18.0 + 16.0 * i as f64,
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// A plain text table rendered as SVG (labels and values).
pub fn svg_table(rows: &[(String, String)], title: &str) -> String {
    let height = 60.0 + 22.0 * rows.len() as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{height}\" \
         viewBox=\"0 0 {PLOT_W} {height}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"15\">{}</text>\n",
        PLOT_W / 2.0,
        xml_escape(title)
    );
    for (i, (label, value)) in rows.iter().enumerate() {
        let y = 52.0 + 22.0 * i as f64;
        svg.push_str(&format!(
            "<text x=\"40\" y=\"{y}\" font-family=\"monospace\" font-size=\"13\">{}</text>\n\
             <text x=\"{}\" y=\"{y}\" text-anchor=\"end\" font-family=\"monospace\" \
             font-size=\"13\">{}</text>\n",
            xml_escape(label),
            PLOT_W - 40.0,
            xml_escape(value)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let gf = GridFunction::from_fn(Space::grid(5), |x, y| 3.0 * x - y);
        write_grid_csv(&path, &gf).unwrap();
        let back = read_grid_csv(&path, gf.space()).unwrap();
        assert_eq!(gf, back);
    }

    #[test]
    fn plots_are_well_formed() {
        let points = [(1e-2, 0.1), (1e-3, 0.033), (1e-4, 0.011), (1e-5, 0.0031)];
        let svg = svg_log_log(&points, Some((0.5, -1.0)), "rate", "delta", "error");
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("circle"));
        assert!(!svg.contains("NaN"));

        let series = vec![("a".to_string(), vec![1.0, 0.1, 0.01]), ("b".into(), vec![0.5, 0.2])];
        let svg = svg_semilogy(&series, "errors", "k", "error");
        assert!(svg.contains("polyline") && !svg.contains("NaN"));

        let table = svg_table(&[("C(3)".into(), "1.2539".into())], "margins");
        assert!(table.contains("C(3)"));
    }

    proptest! {
        #[test]
        fn binary_round_trip(
            values in proptest::collection::vec(-1e6f64..1e6, 1..64),
            weight in 1e-6f64..10.0,
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("g.bin");
            let gf = GridFunction::new(Space::flat(values.len(), weight), values);
            write_grid_binary(&path, &gf).unwrap();
            let back = read_grid_binary(&path).unwrap();
            prop_assert_eq!(gf, back);
        }

        #[test]
        fn grid_binary_round_trip_square(n in 1usize..8) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("g.bin");
            let gf = GridFunction::from_fn(Space::grid(n), |x, y| x * y);
            write_grid_binary(&path, &gf).unwrap();
            let back = read_grid_binary(&path).unwrap();
            prop_assert_eq!(gf, back);
        }
    }
}
