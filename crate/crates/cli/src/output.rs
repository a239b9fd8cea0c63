//! Tabular outputs. Numbers are written with 17 significant digits, which
//! round-trips every `f64` exactly.

use oscmeas::engine::{DetectionCurve, Method};

pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("ASCII output")
}

/// Wide table: `L`, then one column per method. All curves must share
/// the same grid.
pub fn density_table(curves: &[(Method, DetectionCurve)]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["L".to_string()];
    header.extend(curves.iter().map(|(m, _)| m.as_str().to_string()));
    writer.write_record(&header).expect("in-memory write");
    if let Some((_, first)) = curves.first() {
        for (row, &l) in first.lengths.iter().enumerate() {
            let mut record = vec![format_number(l)];
            record.extend(curves.iter().map(|(_, c)| format_number(c.densities[row])));
            writer.write_record(&record).expect("in-memory write");
        }
    }
    finish(writer)
}

/// Long table `(L, method, value)`, one row per curve point.
pub fn emit_plot_data(curves: &[(Method, DetectionCurve)]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["L", "method", "value"]).expect("in-memory write");
    for (method, curve) in curves {
        for (l, v) in curve.lengths.iter().zip(&curve.densities) {
            writer
                .write_record([format_number(*l), method.as_str().to_string(), format_number(*v)])
                .expect("in-memory write");
        }
    }
    finish(writer)
}

/// Inverse of [`emit_plot_data`].
pub fn parse_plot_data(text: &str) -> Result<Vec<(f64, Method, f64)>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() != 3 {
            return Err(format!("row {k}: expected 3 fields"));
        }
        let l = record[0].parse::<f64>().map_err(|e| format!("row {k}: {e}"))?;
        let method = Method::parse(&record[1]).ok_or_else(|| format!("row {k}: unknown method {}", &record[1]))?;
        let v = record[2].parse::<f64>().map_err(|e| format!("row {k}: {e}"))?;
        rows.push((l, method, v));
    }
    Ok(rows)
}
