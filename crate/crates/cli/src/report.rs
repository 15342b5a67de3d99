//! Empirical CDFs, gain and utilization tables from a directory of runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use entsched::scheduling::PolicyKind;
use entsched::simulator::{read_rows, SlotRow, SummaryRow, TraceRow};

use crate::commands::{read_file, slots_path, summary_path, trace_path, write_file};
use crate::CliResult;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Also render each CDF group as an SVG chart.
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Fidelity,
    Latency,
    Throughput,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Fidelity, Metric::Latency, Metric::Throughput];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Fidelity => "fidelity",
            Metric::Latency => "latency",
            Metric::Throughput => "throughput",
        }
    }
}

/// Sorted distinct values with the fraction of samples at or below each.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    out
}

/// Samples of one metric pooled over every seed of a (policy, lambda) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub policy: PolicyKind,
    pub lambda: f64,
    pub fidelities: Vec<f64>,
    pub latencies: Vec<f64>,
    pub throughputs: Vec<f64>,
    pub bell_pairs: u64,
    pub successes: u64,
}

impl Cell {
    pub fn samples(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Fidelity => &self.fidelities,
            Metric::Latency => &self.latencies,
            Metric::Throughput => &self.throughputs,
        }
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        let v = self.samples(metric);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn utilization(&self) -> Option<f64> {
        (self.successes > 0).then(|| self.bell_pairs as f64 / self.successes as f64)
    }
}

/// Reads the summary and every run file it lists, pooled per (policy, lambda)
/// in the summary's order.
pub fn load_cells(runs: &Path) -> CliResult<Vec<Cell>> {
    let summary: Vec<SummaryRow> = read_rows(read_file(&summary_path(runs))?.as_slice())?;
    let mut cells: Vec<Cell> = Vec::new();
    for row in summary {
        let idx = match cells.iter().position(|c| c.policy == row.policy && c.lambda == row.lambda) {
            Some(i) => i,
            None => {
                cells.push(Cell {
                    policy: row.policy,
                    lambda: row.lambda,
                    fidelities: Vec::new(),
                    latencies: Vec::new(),
                    throughputs: Vec::new(),
                    bell_pairs: 0,
                    successes: 0,
                });
                cells.len() - 1
            }
        };
        let cell = &mut cells[idx];
        let trace: Vec<TraceRow> =
            read_rows(read_file(&trace_path(runs, row.policy, row.lambda, row.seed))?.as_slice())?;
        let slots: Vec<SlotRow> =
            read_rows(read_file(&slots_path(runs, row.policy, row.lambda, row.seed))?.as_slice())?;
        cell.fidelities.extend(trace.iter().filter_map(|t| t.final_fidelity));
        cell.latencies.extend(trace.iter().filter_map(|t| t.latency));
        cell.throughputs.extend(slots.iter().map(|s| s.throughput));
        cell.bell_pairs += row.bell_pairs;
        cell.successes += row.successes;
    }
    Ok(cells)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(entsched::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(entsched::Error::from)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn cdf_file_name(metric: Metric, policy: PolicyKind, lambda: f64) -> String {
    format!("cdf_{}_{policy}_lambda{lambda}.csv", metric.name())
}

/// Relative gains of semi_medium over fixed2 per load: positive latency gain
/// means semi_medium is faster, positive throughput gain means it serves more.
pub fn gains(cells: &[Cell]) -> Vec<(f64, Option<f64>, Option<f64>)> {
    let find = |p: PolicyKind, l: f64| cells.iter().find(|c| c.policy == p && c.lambda == l);
    lambdas(cells)
        .into_iter()
        .filter_map(|l| {
            let semi = find(PolicyKind::SemiSupervisedMedium, l)?;
            let fixed = find(PolicyKind::ShortestPathFixedTwo, l)?;
            let rel = |m: Metric, sign: f64| match (semi.mean(m), fixed.mean(m)) {
                (Some(s), Some(f)) if f != 0.0 => Some(sign * (s - f) / f),
                _ => None,
            };
            Some((l, rel(Metric::Latency, -1.0), rel(Metric::Throughput, 1.0)))
        })
        .collect()
}

fn lambdas(cells: &[Cell]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for c in cells {
        if !out.contains(&c.lambda) {
            out.push(c.lambda);
        }
    }
    out
}

fn policies(cells: &[Cell]) -> Vec<PolicyKind> {
    let mut out = Vec::new();
    for c in cells {
        if !out.contains(&c.policy) {
            out.push(c.policy);
        }
    }
    out
}

/// Writes CDF files, `gains.csv`, `utilization.csv` and optional SVG charts
/// into `out`. Returns the paths written.
pub fn write_report(runs: &Path, out: &Path, options: &ReportOptions) -> CliResult<Vec<PathBuf>> {
    let cells = load_cells(runs)?;
    let mut written = Vec::new();
    for cell in &cells {
        for metric in Metric::ALL {
            let rows: Vec<Vec<String>> = empirical_cdf(cell.samples(metric))
                .into_iter()
                .map(|(v, p)| vec![v.to_string(), p.to_string()])
                .collect();
            let path = out.join(cdf_file_name(metric, cell.policy, cell.lambda));
            write_file(&path, &csv_bytes(&["value", "cumulative_probability"], &rows)?)?;
            written.push(path);
        }
    }

    let rows: Vec<Vec<String>> = gains(&cells)
        .into_iter()
        .map(|(l, lat, thr)| vec![l.to_string(), opt(lat), opt(thr)])
        .collect();
    let path = out.join("gains.csv");
    write_file(&path, &csv_bytes(&["lambda", "latency_gain", "throughput_gain"], &rows)?)?;
    written.push(path);

    let loads = lambdas(&cells);
    let mut header = vec!["policy".to_string()];
    header.extend(loads.iter().map(|l| format!("lambda_{l}")));
    let rows: Vec<Vec<String>> = policies(&cells)
        .into_iter()
        .map(|p| {
            let mut row = vec![p.to_string()];
            for &l in &loads {
                let u = cells.iter().find(|c| c.policy == p && c.lambda == l).and_then(Cell::utilization);
                row.push(opt(u));
            }
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = out.join("utilization.csv");
    write_file(&path, &csv_bytes(&header_refs, &rows)?)?;
    written.push(path);

    if options.svg {
        for &l in &loads {
            for metric in Metric::ALL {
                let group: Vec<&Cell> = cells.iter().filter(|c| c.lambda == l).collect();
                let path = out.join(format!("cdf_{}_lambda{l}.svg", metric.name()));
                write_file(&path, render_svg(metric, l, &group).as_bytes())?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

const COLOURS: [&str; 5] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"];

/// Step plot of each policy's CDF on shared axes.
pub fn render_svg(metric: Metric, lambda: f64, cells: &[&Cell]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let curves: Vec<(PolicyKind, Vec<(f64, f64)>)> =
        cells.iter().map(|c| (c.policy, empirical_cdf(c.samples(metric)))).collect();
    let all = curves.iter().flat_map(|(_, c)| c.iter().map(|p| p.0));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0), lo.max(0.0) + 1.0) };
    let x = |v: f64| pad + (v - lo) / (hi - lo) * (w - 2.0 * pad);
    let y = |p: f64| h - pad - p * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {} H{} M{pad} {} V{pad}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad,
        h - pad
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{} (lambda {lambda})</text>"#, w / 2.0, h - 15.0, metric.name());
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="start">{lo:.4}</text>"#, pad, h - pad + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.4}</text>"#, w - pad, h - pad + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1</text>"#, pad - 5.0, pad + 4.0);
    for (i, (policy, cdf)) in curves.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        if let Some(&(v0, _)) = cdf.first() {
            let mut d = format!("M{:.2} {:.2}", x(v0), y(0.0));
            let mut prev = 0.0;
            for &(v, p) in cdf {
                let _ = write!(d, " H{:.2} V{:.2}", x(v), y(p));
                prev = p;
            }
            let _ = write!(d, " H{:.2} V{:.2}", x(hi), y(prev));
            let _ = writeln!(s, r#"<path d="{d}" stroke="{colour}" fill="none" stroke-width="1.5"/>"#);
        }
        let ly = pad + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{colour}">{policy}</text>"#, w - pad - 90.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(empirical_cdf(&[3.5]), vec![(3.5, 1.0)]);
        assert_eq!(
            empirical_cdf(&[4.0, 2.0, 1.0, 2.0]),
            vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]
        );
        assert!(empirical_cdf(&[]).is_empty());
    }

    fn cell(policy: PolicyKind, latency: f64, throughput: f64) -> Cell {
        Cell {
            policy,
            lambda: 2.0,
            fidelities: vec![0.9],
            latencies: vec![latency],
            throughputs: vec![throughput],
            bell_pairs: 100,
            successes: 4,
        }
    }

    #[test]
    fn gain_signs() {
        let cells = [
            cell(PolicyKind::SemiSupervisedMedium, 30.0, 0.0021),
            cell(PolicyKind::ShortestPathFixedTwo, 40.0, 0.0020),
        ];
        let g = gains(&cells);
        assert_eq!(g.len(), 1);
        let (l, lat, thr) = g[0];
        assert_eq!(l, 2.0);
        assert!((lat.unwrap() - 0.25).abs() < 1e-12);
        assert!((thr.unwrap() - 0.05).abs() < 1e-9);
        assert!(gains(&cells[..1]).is_empty());
        assert_eq!(cells[0].utilization(), Some(25.0));
    }

    #[test]
    fn svg_is_well_formed() {
        let a = cell(PolicyKind::Fifo, 20.0, 0.002);
        let svg = render_svg(Metric::Latency, 2.0, &[&a]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("fifo"));
    }
}
