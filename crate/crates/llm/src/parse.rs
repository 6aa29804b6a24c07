//! Structured-reply extraction.
//!
//! Models rarely answer with bare JSON: they wrap it in prose, markdown
//! fences, or nest it under a scenario key such as `"review"`. This module
//! finds the first balanced `{...}` block that parses as a JSON object,
//! optionally descends one level into a single wrapper object, and checks
//! the expected keys and their types.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Strings; bare numbers are accepted and stringified.
    Str,
    /// Integers; integral floats and numeric strings are accepted.
    Int,
    /// Any number; numeric strings are accepted.
    Float,
    /// Raw JSON value, no checking.
    Any,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Str(String),
    Int(i64),
    Float(f64),
    Json(Value),
}

impl FieldValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            FieldValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            FieldValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Float(v) => Some(*v),
            FieldValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    /// Plain-text rendering used when a field is copied into graph text.
    pub fn to_text(&self) -> String {
        match self {
            FieldValue::Str(s) => s.clone(),
            FieldValue::Int(v) => v.to_string(),
            FieldValue::Float(v) => v.to_string(),
            FieldValue::Json(v) => v.to_string(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            FieldValue::Str(s) => Value::String(s.clone()),
            FieldValue::Int(v) => Value::from(*v),
            FieldValue::Float(v) => Value::from(*v),
            FieldValue::Json(v) => v.clone(),
        }
    }
}

pub type FieldMap = BTreeMap<String, FieldValue>;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub fields: FieldMap,
    /// The whole object the fields were read from (after unwrapping).
    pub object: Map<String, Value>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("reply contains no balanced JSON object")]
    NoObject,
    #[error("reply object is missing key `{0}`")]
    MissingKey(String),
    #[error("key `{key}` has the wrong type: expected {expected}, found {found}")]
    TypeMismatch { key: String, expected: &'static str, found: String },
}

/// Byte ranges of top-level balanced `{...}` blocks, string-literal aware.
fn balanced_blocks(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_str = false;
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_str = true,
            b'{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push((start, i + 1));
                }
            }
            _ => {}
        }
    }
    out
}

/// Every JSON object found in `reply`, in order of appearance.
///
/// A balanced block that fails to parse (e.g. a schema sketch with unquoted
/// keys) is skipped and scanning continues inside it, so an object nested in
/// a non-JSON wrapper is still found.
pub fn json_objects(reply: &str) -> Vec<Map<String, Value>> {
    let mut found = Vec::new();
    let mut offset = 0usize;
    while offset < reply.len() {
        let rest = &reply[offset..];
        let blocks = balanced_blocks(rest);
        let Some(&(s, e)) = blocks.first() else { break };
        match serde_json::from_str::<Value>(&rest[s..e]) {
            Ok(Value::Object(map)) => {
                found.push(map);
                offset += e;
            }
            _ => offset += s + 1,
        }
    }
    found
}

fn type_name(v: &Value) -> String {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
    .to_string()
}

fn coerce(key: &str, value: &Value, kind: FieldKind) -> Result<FieldValue, ParseError> {
    let mismatch =
        |expected: &'static str| ParseError::TypeMismatch { key: key.to_string(), expected, found: type_name(value) };
    match kind {
        FieldKind::Any => Ok(FieldValue::Json(value.clone())),
        FieldKind::Str => match value {
            Value::String(s) => Ok(FieldValue::Str(s.clone())),
            Value::Number(n) => Ok(FieldValue::Str(n.to_string())),
            _ => Err(mismatch("string")),
        },
        FieldKind::Int => match value {
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(FieldValue::Int(i))
                } else {
                    match n.as_f64() {
                        Some(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => Ok(FieldValue::Int(f as i64)),
                        _ => Err(mismatch("integer")),
                    }
                }
            }
            Value::String(s) => s.trim().parse::<i64>().map(FieldValue::Int).map_err(|_| mismatch("integer")),
            _ => Err(mismatch("integer")),
        },
        FieldKind::Float => match value {
            Value::Number(n) => n.as_f64().map(FieldValue::Float).ok_or_else(|| mismatch("number")),
            Value::String(s) => s.trim().parse::<f64>().map(FieldValue::Float).map_err(|_| mismatch("number")),
            _ => Err(mismatch("number")),
        },
    }
}

/// Pick the object holding the expected keys: the top level if it has all of
/// them, otherwise a lone nested object (`{"review": {...}}` style).
fn unwrap_target(top: Map<String, Value>, expected: &[(&str, FieldKind)]) -> Map<String, Value> {
    if expected.iter().all(|(k, _)| top.contains_key(*k)) {
        return top;
    }
    let nested: Vec<&Map<String, Value>> = top.values().filter_map(Value::as_object).collect();
    if nested.len() == 1 {
        return nested[0].clone();
    }
    top
}

/// Extract the first JSON object from `reply` and validate `expected` keys.
pub fn parse_agent_json(reply: &str, expected: &[(&str, FieldKind)]) -> Result<ParsedReply, ParseError> {
    let mut objects = json_objects(reply).into_iter();
    let first = objects.next().ok_or(ParseError::NoObject)?;
    let mut warnings = Vec::new();
    let extra = objects.count();
    if extra > 0 {
        let msg = format!("reply contains {} additional JSON object(s); using the first", extra);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let object = unwrap_target(first, expected);
    let mut fields = FieldMap::new();
    for (key, kind) in expected {
        let value = object.get(*key).ok_or_else(|| ParseError::MissingKey(key.to_string()))?;
        fields.insert(key.to_string(), coerce(key, value, *kind)?);
    }
    Ok(ParsedReply { fields, object, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ACTION: &[(&str, FieldKind)] =
        &[("item_id", FieldKind::Str), ("timestamp", FieldKind::Str), ("rating", FieldKind::Int)];

    #[test]
    fn clean_reply() {
        let r = parse_agent_json(r#"{"item_id":"P1","timestamp":"2020-01-02","rating":4}"#, ACTION).unwrap();
        assert_eq!(r.fields["item_id"], FieldValue::Str("P1".into()));
        assert_eq!(r.fields["rating"], FieldValue::Int(4));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn prose_wrapped_and_nested() {
        // recorded reply style: chatty preamble, fenced block, scenario wrapper key
        let reply = "Sure! Here is my review:\n```json\n{\n  \"review\": {\n    \"item_id\": \"P00417\",\n    \"timestamp\": \"2021-03-04\",\n    \"rating\": \"5\",\n    \"review_text\": \"Love it {really}\"\n  }\n}\n```\nHope this helps!";
        let r = parse_agent_json(reply, ACTION).unwrap();
        assert_eq!(r.fields["item_id"].as_str(), Some("P00417"));
        assert_eq!(r.fields["rating"].as_i64(), Some(5));
        assert_eq!(r.object["review_text"], "Love it {really}");
    }

    #[test]
    fn two_objects_first_wins_with_warning() {
        let reply = r#"{"item_id":"A","timestamp":"1","rating":1} and also {"item_id":"B","timestamp":"2","rating":2}"#;
        let r = parse_agent_json(reply, ACTION).unwrap();
        assert_eq!(r.fields["item_id"].as_str(), Some("A"));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn schema_sketch_is_skipped() {
        let reply = r#"{ item_id: (str, "id") } then {"item_id":"X","timestamp":"t","rating":3}"#;
        let r = parse_agent_json(reply, ACTION).unwrap();
        assert_eq!(r.fields["item_id"].as_str(), Some("X"));
    }

    #[test]
    fn errors_name_the_problem() {
        assert_eq!(parse_agent_json("no json here", ACTION), Err(ParseError::NoObject));
        assert_eq!(parse_agent_json("{\"a\": 1", ACTION), Err(ParseError::NoObject));
        assert_eq!(
            parse_agent_json(r#"{"item_id":"A","rating":1}"#, ACTION),
            Err(ParseError::MissingKey("timestamp".into()))
        );
        assert!(matches!(
            parse_agent_json(r#"{"item_id":"A","timestamp":"t","rating":"high"}"#, ACTION),
            Err(ParseError::TypeMismatch { ref key, .. }) if key == "rating"
        ));
        assert!(matches!(
            parse_agent_json(r#"{"item_id":["A"],"timestamp":"t","rating":1}"#, ACTION),
            Err(ParseError::TypeMismatch { ref key, .. }) if key == "item_id"
        ));
    }

    #[test]
    fn braces_inside_strings_do_not_unbalance() {
        let reply = r#"{"item_id":"}{","timestamp":"\"}","rating":2}"#;
        let r = parse_agent_json(reply, ACTION).unwrap();
        assert_eq!(r.fields["item_id"].as_str(), Some("}{"));
        assert_eq!(r.fields["timestamp"].as_str(), Some("\"}"));
    }

    fn field_strategy() -> impl Strategy<Value = (FieldKind, FieldValue)> {
        prop_oneof![
            any::<String>().prop_map(|s| (FieldKind::Str, FieldValue::Str(s))),
            any::<i64>().prop_map(|i| (FieldKind::Int, FieldValue::Int(i))),
            (-1.0e12f64..1.0e12).prop_map(|f| (FieldKind::Float, FieldValue::Float(f))),
        ]
    }

    proptest! {
        #[test]
        fn rendered_action_round_trips(
            fields in proptest::collection::btree_map("[a-z_]{1,12}", field_strategy(), 1..6),
            prefix in "[A-Za-z !.,]{0,40}",
            wrap in any::<bool>(),
        ) {
            prop_assume!(!fields.contains_key("interact"));
            let obj: Map<String, Value> = fields.iter().map(|(k, (_, v))| (k.clone(), v.to_json())).collect();
            let body = if wrap {
                serde_json::json!({ "interact": Value::Object(obj) }).to_string()
            } else {
                Value::Object(obj).to_string()
            };
            let reply = format!("{prefix}{body}");
            let expected: Vec<(&str, FieldKind)> = fields.iter().map(|(k, (kind, _))| (k.as_str(), *kind)).collect();
            let parsed = parse_agent_json(&reply, &expected).unwrap();
            for (k, (_, v)) in &fields {
                prop_assert_eq!(&parsed.fields[k], v);
            }
        }
    }
}
