//! CSV and JSON files. Every CSV starts with `#` comment lines carrying the
//! resolved run configuration; readers skip them.

use std::io::{Read, Write};

use serde::Serialize;

use crate::bench::MetricRow;
use crate::diverse::KernelState;
use crate::error::{Error, Result};
use crate::gp::GpHyper;
use crate::planner::CurveRow;
use crate::types::Dataset;

/// Writes `# config: <json>` followed by any extra comment lines.
pub fn write_header<W: Write>(w: &mut W, config_json: &str, extra: &[String]) -> Result<()> {
    writeln!(w, "# config: {config_json}")?;
    for line in extra {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Reads the `# config:` line of a CSV, if present.
pub fn read_config_header(text: &str) -> Option<&str> {
    text.lines().find_map(|l| l.strip_prefix("# config: "))
}

pub fn write_dataset_csv<W: Write>(mut w: W, ds: &Dataset, config_json: &str) -> Result<()> {
    write_header(&mut w, config_json, &[])?;
    let mut cw = csv::Writer::from_writer(w);
    let mut head: Vec<String> = (0..ds.dim_theta()).map(|i| format!("θ_{i}")).collect();
    head.extend((0..ds.dim_context()).map(|i| format!("α_{i}")));
    head.push("y".into());
    cw.write_record(&head)?;
    for (row, y) in ds.inputs().iter().zip(ds.outputs()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        cw.write_record(&rec)?;
    }
    cw.flush()?;
    Ok(())
}

fn column_kind(name: &str) -> Option<char> {
    if name.starts_with("θ_") || name.starts_with("theta_") {
        Some('t')
    } else if name.starts_with("α_") || name.starts_with("alpha_") {
        Some('a')
    } else if name == "y" {
        Some('y')
    } else {
        None
    }
}

/// Reads a dataset CSV; column names decide the split between action and
/// context dimensions.
pub fn read_dataset_csv<R: Read>(r: R, noise_sd: f64) -> Result<Dataset> {
    let mut cr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let head = cr.headers()?.clone();
    let kinds: Vec<Option<char>> = head.iter().map(column_kind).collect();
    if kinds.iter().any(|k| k.is_none()) || kinds.last() != Some(&Some('y')) {
        return Err(Error::InvalidArgument(format!("unexpected dataset columns: {:?}", head)));
    }
    let dt = kinds.iter().filter(|k| **k == Some('t')).count();
    let da = kinds.iter().filter(|k| **k == Some('a')).count();
    let mut ds = Dataset::new(dt, da, noise_sd)?;
    for rec in cr.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {v:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        ds.push(&vals[..dt], &vals[dt..dt + da], vals[dt + da])?;
    }
    Ok(ds)
}

pub fn model_to_json(hyper: &GpHyper) -> String {
    serde_json::to_string_pretty(hyper).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<GpHyper> {
    let h: GpHyper = serde_json::from_str(text)?;
    GpHyper::new(h.kernel.clone(), h.noise_sd)
}

pub fn kernel_to_json(k: &KernelState) -> String {
    serde_json::to_string_pretty(k).expect("kernel serializes")
}

pub fn kernel_from_json(text: &str) -> Result<KernelState> {
    let k: KernelState = serde_json::from_str(text)?;
    k.validate()?;
    Ok(k)
}

fn write_rows<W: Write, T: Serialize>(mut w: W, rows: &[T], config_json: &str, extra: &[String]) -> Result<()> {
    write_header(&mut w, config_json, extra)?;
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}

/// Columns `oracle,sampler,metric,mean,sd,failures`.
pub fn write_metrics_csv<W: Write>(w: W, rows: &[MetricRow], config_json: &str) -> Result<()> {
    if rows.is_empty() {
        let mut w = w;
        write_header(&mut w, config_json, &[])?;
        writeln!(w, "oracle,sampler,metric,mean,sd,failures")?;
        return Ok(());
    }
    write_rows(w, rows, config_json, &[])
}

pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<MetricRow>> {
    let mut cr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    Ok(cr.deserialize().collect::<std::result::Result<Vec<MetricRow>, _>>()?)
}

/// Columns `episode,mean_J,ci_lo,ci_hi`.
pub fn write_curve_csv<W: Write>(mut w: W, rows: &[CurveRow], config_json: &str, extra: &[String]) -> Result<()> {
    write_header(&mut w, config_json, extra)?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["episode", "mean_J", "ci_lo", "ci_hi"])?;
    for r in rows {
        cw.write_record(&[r.episode.to_string(), r.mean_j.to_string(), r.ci_lo.to_string(), r.ci_hi.to_string()])?;
    }
    cw.flush()?;
    Ok(())
}

/// One drawn sample with its model summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub theta: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// `mu - beta * sigma`.
    pub margin: f64,
    /// Running diversity, present in diverse mode.
    pub diversity: Option<f64>,
}

pub fn write_samples_csv<W: Write>(mut w: W, rows: &[SampleRow], dim: usize, config_json: &str, extra: &[String]) -> Result<()> {
    write_header(&mut w, config_json, extra)?;
    let mut cw = csv::Writer::from_writer(w);
    let with_d = rows.iter().any(|r| r.diversity.is_some());
    let mut head: Vec<String> = (0..dim).map(|i| format!("θ_{i}")).collect();
    head.extend(["mu".into(), "sigma".into(), "margin".into()]);
    if with_d {
        head.push("D".into());
    }
    cw.write_record(&head)?;
    for r in rows {
        let mut rec: Vec<String> = r.theta.iter().map(|v| v.to_string()).collect();
        rec.extend([r.mean.to_string(), r.sd.to_string(), r.margin.to_string()]);
        if with_d {
            rec.push(r.diversity.map_or(String::new(), |d| d.to_string()));
        }
        cw.write_record(&rec)?;
    }
    cw.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let mut ds = Dataset::new(2, 1, 0.1).unwrap();
        ds.push(&[0.1, 0.25], &[3.0], -1.5).unwrap();
        ds.push(&[1.0 / 3.0, 0.5], &[2.0], 0.125).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds, "{\"seed\":1}").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# config: {\"seed\":1}\nθ_0,θ_1,α_0,y\n"));
        assert_eq!(read_config_header(&text), Some("{\"seed\":1}"));
        let back = read_dataset_csv(&buf[..], 0.1).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn bad_dataset_columns() {
        assert!(read_dataset_csv("a,b\n1,2\n".as_bytes(), 0.1).is_err());
        assert!(read_dataset_csv("θ_0,y\n1,zz\n".as_bytes(), 0.1).is_err());
    }

    #[test]
    fn model_json_errors_are_explicit() {
        assert!(model_from_json("{\"l\":[1.0],").is_err());
        assert!(model_from_json("{\"l\":[1.0],\"signal_variance\":-1,\"noise_sd\":0.1}").is_err());
        let h = model_from_json("{\"l\":[1.0],\"signal_variance\":1,\"noise_sd\":0.1}").unwrap();
        assert_eq!(model_from_json(&model_to_json(&h)).unwrap(), h);
    }

    #[test]
    fn metrics_round_trip() {
        let rows = vec![MetricRow {
            oracle: "pour".into(),
            sampler: "adaptive".into(),
            metric: "fp_percent".into(),
            mean: 2.5,
            sd: 1.0,
            failures: 0,
        }];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows, "{}").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("oracle,sampler,metric,mean,sd,failures\n"));
        assert_eq!(read_metrics_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn curve_header() {
        let rows = vec![CurveRow {
            episode: 1,
            mean_j: 0.3,
            ci_lo: 0.2,
            ci_hi: 0.4,
        }];
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows, "{}", &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("episode,mean_J,ci_lo,ci_hi\n1,0.3,0.2,0.4\n"));
    }
}
