//! Output formatting: every float in fixed scientific notation with 12
//! significant digits.

use serde_json::Value;

pub fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Compact JSON with floats written via [`sci`]. Non-finite floats (which
/// serde_json already maps to null) stay null.
pub fn json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&sci(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_get_twelve_digits() {
        assert_eq!(sci(0.1), "1.00000000000e-1");
        assert_eq!(sci(-2.5e7), "-2.50000000000e7");
        let v = json!({"a": 1.5, "n": 3, "s": "x", "l": [0.25, null]});
        let text = json(&v);
        assert_eq!(text, r#"{"a":1.50000000000e0,"l":[2.50000000000e-1,null],"n":3,"s":"x"}"#);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"], 1.5);
    }
}
