//! Report records: one canonical JSON line, plus a derived table view.

use serde_json::{Map, Value};

/// Compact JSON with lexicographically sorted keys and a trailing newline.
pub fn canonical(report: &Value) -> String {
    let mut s = serde_json::to_string(report).expect("report serializes");
    s.push('\n');
    s
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Array(_) => "none".into(),
        other => other.to_string(),
    }
}

fn is_scalar(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.is_empty(),
        Value::Object(o) => o.is_empty(),
        _ => true,
    }
}

fn table(rows: &[Vec<String>], header: Option<&[String]>, indent: usize, out: &mut String) {
    let ncols = rows
        .iter()
        .map(Vec::len)
        .chain(header.map(<[String]>::len))
        .max()
        .unwrap_or(0);
    let mut width = vec![0usize; ncols];
    for r in rows.iter().map(Vec::as_slice).chain(header) {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let mut line = |r: &[String]| {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:>w$}", w = width[i]))
            .collect();
        out.push_str(&" ".repeat(indent));
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    };
    if let Some(h) = header {
        line(h);
        let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
        line(&rule);
    }
    for r in rows {
        line(r);
    }
}

fn render(map: &Map<String, Value>, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    let key_width = map
        .iter()
        .filter(|(_, v)| is_scalar(v))
        .map(|(k, _)| k.len())
        .max()
        .unwrap_or(0);
    for (k, v) in map.iter().filter(|(_, v)| is_scalar(v)) {
        out.push_str(&format!("{pad}{k:<key_width$}  {}\n", scalar(v)));
    }
    for (k, v) in map.iter().filter(|(_, v)| !is_scalar(v)) {
        out.push_str(&format!("{pad}{k}:\n"));
        match v {
            Value::Object(m) => render(m, indent + 2, out),
            Value::Array(items) if items.iter().all(is_scalar) => {
                let row: Vec<String> = items.iter().map(scalar).collect();
                table(&[row], None, indent + 2, out);
            }
            Value::Array(items) if items.iter().all(|x| x.is_array()) => {
                let rows: Vec<Vec<String>> = items
                    .iter()
                    .map(|r| r.as_array().unwrap().iter().map(render_cell).collect())
                    .collect();
                table(&rows, None, indent + 2, out);
            }
            Value::Array(items) if items.iter().all(|x| x.is_object()) => {
                let mut header: Vec<String> = Vec::new();
                for it in items {
                    for key in it.as_object().unwrap().keys() {
                        if !header.contains(key) {
                            header.push(key.clone());
                        }
                    }
                }
                let rows: Vec<Vec<String>> = items
                    .iter()
                    .map(|it| {
                        let o = it.as_object().unwrap();
                        header
                            .iter()
                            .map(|h| o.get(h).map_or("-".into(), render_cell))
                            .collect()
                    })
                    .collect();
                table(&rows, Some(&header), indent + 2, out);
            }
            Value::Array(items) => {
                for it in items {
                    out.push_str(&format!("{pad}  {}\n", render_cell(it)));
                }
            }
            _ => unreachable!(),
        }
    }
}

fn render_cell(v: &Value) -> String {
    match v {
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(render_cell).collect();
            format!("[{}]", parts.join(" "))
        }
        other if is_scalar(other) => scalar(other),
        other => other.to_string(),
    }
}

/// Human-readable tables derived from a canonical report.
pub fn pretty(report: &Value) -> String {
    let mut out = String::new();
    match report {
        Value::Object(m) => render(m, 0, &mut out),
        other => {
            out.push_str(&render_cell(other));
            out.push('\n');
        }
    }
    out
}
