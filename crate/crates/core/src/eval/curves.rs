use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::io::write_atomic;
use crate::training::MetricsRow;

pub const CURVE_HEADER: &str = "instances,train_ce_bits,dev_ce_bits";

/// Parses a metrics log, skipping the header and any malformed rows.
/// Returns the rows and the number skipped.
pub fn parse_metrics_log(text: &str) -> (Vec<MetricsRow>, usize) {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with("update,") {
            continue;
        }
        match MetricsRow::from_csv(line) {
            Ok(r) => rows.push(r),
            Err(_) => {
                log::warn!("metrics line {}: skipping malformed row", i + 1);
                skipped += 1;
            }
        }
    }
    (rows, skipped)
}

/// X-axis scaling for training instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstanceUnit {
    Raw,
    Millions,
}

impl InstanceUnit {
    fn apply(self, n: u64) -> f64 {
        match self {
            InstanceUnit::Raw => n as f64,
            InstanceUnit::Millions => n as f64 / 1e6,
        }
    }
}

pub fn curve_csv(rows: &[MetricsRow], unit: InstanceUnit) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for r in rows {
        let dev = r.dev_ce_bits.map_or(String::new(), |d| format!("{d:.6}"));
        out.push_str(&format!("{},{:.6},{dev}\n", unit.apply(r.instances), r.train_ce_bits));
    }
    out
}

/// Plot series keyed by run id.
pub fn curves_json(runs: &[(String, Vec<MetricsRow>)], unit: InstanceUnit) -> Value {
    let mut map = Map::new();
    for (id, rows) in runs {
        map.insert(
            id.clone(),
            json!({
                "instances": rows.iter().map(|r| unit.apply(r.instances)).collect::<Vec<_>>(),
                "train_ce_bits": rows.iter().map(|r| r.train_ce_bits).collect::<Vec<_>>(),
                "dev_ce_bits": rows.iter().map(|r| r.dev_ce_bits).collect::<Vec<_>>(),
            }),
        );
    }
    Value::Object(map)
}

/// Writes `<run>.csv` per run plus a combined `curves.json` into `out_dir`.
pub fn emit_curves(
    runs: &[(String, Vec<MetricsRow>)],
    unit: InstanceUnit,
    out_dir: &Path,
) -> Result<()> {
    for (id, rows) in runs {
        write_atomic(&out_dir.join(format!("{id}.csv")), curve_csv(rows, unit).as_bytes())?;
    }
    let json = serde_json::to_vec_pretty(&curves_json(runs, unit))?;
    write_atomic(&out_dir.join("curves.json"), &json)
}
