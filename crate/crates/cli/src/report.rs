//! JSON emission with a fixed number format.

use std::io::Write;
use std::str::FromStr;

use serde_json::{Number, Value};

/// Rewrites every non-integer number with 17 significant digits.
/// Non-finite values become `null`.
pub fn numbers(value: Value) -> Value {
    match value {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => match n.as_f64() {
            Some(x) if x.is_finite() => {
                Value::Number(Number::from_str(&prodsv::export::sig17(x)).expect("formatted float is valid JSON"))
            }
            _ => Value::Null,
        },
        Value::Array(items) => Value::Array(items.into_iter().map(numbers).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, numbers(v))).collect()),
        other => other,
    }
}

pub fn write_json<W: Write>(out: &mut W, value: &Value) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_get_seventeen_digits() {
        let v = numbers(json!({ "a": 0.1, "b": [3, 2.5], "c": f64::NAN, "d": "x" }));
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"a":1.0000000000000001e-1,"b":[3,2.5000000000000000e+0],"c":null,"d":"x"}"#);
    }
}
