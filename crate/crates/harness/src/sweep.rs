//! Parameter sweeps over dotted paths into the scenario tree.
//!
//! A path such as `scene.tags.*.fm_ppm_offset` walks tables by key, arrays
//! by index and expands `*` over every element of an array or table. Only
//! values that already exist can be swept.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{invalid, Result};
use crate::metrics::MetricsReport;
use crate::run::{run_scenario, write_run};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<Value>,
}

fn walk<'a>(node: &'a mut Value, segs: &[&str], out: &mut Vec<&'a mut Value>) -> std::result::Result<(), String> {
    let Some((head, rest)) = segs.split_first() else {
        out.push(node);
        return Ok(());
    };
    if *head == "*" {
        match node {
            Value::Table(t) => {
                for (_, v) in t.iter_mut() {
                    walk(v, rest, out)?;
                }
            }
            Value::Array(a) => {
                for v in a.iter_mut() {
                    walk(v, rest, out)?;
                }
            }
            _ => return Err("`*` needs an array or table".into()),
        }
        return Ok(());
    }
    match node {
        Value::Table(t) => match t.get_mut(*head) {
            Some(v) => walk(v, rest, out)?,
            None => return Err(format!("no field `{head}`")),
        },
        Value::Array(a) => {
            let i: usize = head.parse().map_err(|_| format!("`{head}` is not an array index"))?;
            let len = a.len();
            let v = a
                .get_mut(i)
                .ok_or_else(|| format!("index {i} out of range ({len} elements)"))?;
            walk(v, rest, out)?;
        }
        _ => return Err(format!("cannot descend into a scalar at `{head}`")),
    }
    Ok(())
}

fn segments(path: &str) -> std::result::Result<Vec<&str>, String> {
    let segs: Vec<&str> = path.split('.').collect();
    if segs.iter().any(|s| s.is_empty()) {
        return Err(format!("malformed path `{path}`"));
    }
    Ok(segs)
}

/// Number of existing leaves `path` selects in `tree`.
pub fn resolve_path(tree: &Value, path: &str) -> std::result::Result<usize, String> {
    let mut copy = tree.clone();
    let mut hits = Vec::new();
    walk(&mut copy, &segments(path)?, &mut hits)?;
    Ok(hits.len())
}

/// Replaces every leaf selected by `path` with `value`; returns the count.
pub fn set_path(tree: &mut Value, path: &str, value: &Value) -> std::result::Result<usize, String> {
    let mut hits = Vec::new();
    walk(tree, &segments(path)?, &mut hits)?;
    let n = hits.len();
    for h in hits {
        *h = coerce(h, value);
    }
    Ok(n)
}

/// Keeps float fields floats when a sweep lists integers.
fn coerce(old: &Value, new: &Value) -> Value {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(*i as f64),
        _ => new.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, Value)>,
}

/// Cartesian product of the scenario's sweep axes, first axis slowest.
pub fn expand(base: &Scenario) -> Result<Vec<(SweepPoint, Scenario)>> {
    let axes = &base.plan.sweep;
    let mut plain = base.clone();
    plain.plan.sweep.clear();
    let tree = Value::try_from(&plain)?;

    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut picks = vec![0; axes.len()];
        for (k, a) in axes.iter().enumerate().rev() {
            picks[k] = rem % a.values.len();
            rem /= a.values.len();
        }
        let mut t = tree.clone();
        let mut assignments = Vec::new();
        for (k, (axis, &pick)) in axes.iter().zip(&picks).enumerate() {
            let v = &axis.values[pick];
            set_path(&mut t, &axis.path, v).map_err(|m| invalid(format!("plan.sweep[{k}].path"), m))?;
            assignments.push((axis.path.clone(), v.clone()));
        }
        let sc: Scenario = t
            .try_into()
            .map_err(|e: toml::de::Error| invalid(format!("sweep point {index}"), e.to_string()))?;
        sc.validate()
            .map_err(|e| invalid(format!("sweep point {index}"), e.to_string()))?;
        out.push((SweepPoint { index, assignments }, sc));
    }
    Ok(out)
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs every sweep point into `out_dir/point_NNN/` and writes a
/// `sweep.csv` summary.
pub fn run_sweep(base: &Scenario, out_dir: &Path) -> Result<Vec<(SweepPoint, MetricsReport)>> {
    fs::create_dir_all(out_dir)?;
    let mut results = Vec::new();
    for (point, sc) in expand(base)? {
        let run = run_scenario(&sc)?;
        write_run(&out_dir.join(format!("point_{:03}", point.index)), &sc, &run)?;
        results.push((point, run.metrics));
    }

    let mut w = csv::Writer::from_path(out_dir.join("sweep.csv"))?;
    let mut header = vec!["point".to_string()];
    header.extend(base.plan.sweep.iter().map(|a| a.path.clone()));
    header.extend(
        [
            "expected",
            "detected",
            "detection_rate",
            "median_error_m",
            "p90_error_m",
            "max_error_m",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for (point, m) in &results {
        let mut row = vec![point.index.to_string()];
        row.extend(point.assignments.iter().map(|(_, v)| value_text(v)));
        let stat = |f: fn(&crate::metrics::ErrorStats) -> f64| {
            m.range_error.as_ref().map(|s| f(s).to_string()).unwrap_or_default()
        };
        row.push(m.expected.to_string());
        row.push(m.detected.to_string());
        row.push(m.detection_rate.to_string());
        row.push(stat(|s| s.median_m));
        row.push(stat(|s| s.p90_m));
        row.push(stat(|s| s.max_m));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> Value {
        toml::from_str(
            r#"
a = 1.5
[b]
c = [{ x = 1.0 }, { x = 2.0 }]
d = { e = 3, f = 4 }
"#,
        )
        .unwrap()
    }

    #[test]
    fn wildcards_and_indices() {
        let mut t = tree();
        assert_eq!(resolve_path(&t, "b.c.*.x").unwrap(), 2);
        assert_eq!(resolve_path(&t, "b.d.*").unwrap(), 2);
        assert_eq!(set_path(&mut t, "b.c.1.x", &Value::Integer(7)).unwrap(), 1);
        assert_eq!(t["b"]["c"][1]["x"], Value::Float(7.0));
        assert_eq!(t["b"]["c"][0]["x"], Value::Float(1.0));
    }

    #[test]
    fn unknown_paths_are_errors() {
        let t = tree();
        assert!(resolve_path(&t, "b.zz").is_err());
        assert!(resolve_path(&t, "b.c.9.x").is_err());
        assert!(resolve_path(&t, "a.x").is_err());
        assert!(resolve_path(&t, "b..c").is_err());
    }
}
