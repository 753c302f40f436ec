//! Canonical minified JSON: object keys in lexicographic order, no
//! insignificant whitespace. Used for message bodies and for every exported
//! document (events, ledgers, reports, registry snapshots).

use serde::Serialize;
use serde_json::Value;

/// Renders `value` canonically regardless of the map ordering it was built with.
pub fn to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

/// Serializes any `Serialize` value canonically.
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    Ok(to_string(&serde_json::to_value(value)?))
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(key, out);
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
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
        Value::String(s) => write_string(s, out),
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn write_string(s: &str, out: &mut String) {
    // serde_json's string escaping is already canonical (minimal escapes).
    out.push_str(&Value::String(s.to_string()).to_string());
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorts_nested_keys() {
        let v = json!({"b": 1, "a": {"y": [ {"d": 1, "c": 2} ], "x": null}});
        assert_eq!(to_string(&v), r#"{"a":{"x":null,"y":[{"c":2,"d":1}]},"b":1}"#);
    }

    #[test]
    fn escapes_strings() {
        assert_eq!(to_string(&json!({"k": "a\"\n"})), r#"{"k":"a\"\n"}"#);
    }
}
