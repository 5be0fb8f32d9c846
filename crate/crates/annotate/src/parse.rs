//! Extraction of the JSON dictionary from a model response.
//!
//! Responses often wrap the dictionary in code fences or prose, and sometimes
//! echo the `//` / `#` comments and trailing commas of the requested format;
//! those are tolerated.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use thiserror::Error;

pub const KNOWN_PARAMETERS: [&str; 5] = ["E", "nu", "sigma_y", "phi", "rho"];

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseError {
    #[error("no dictionary found in response: {excerpt:?}")]
    NoDictionary { excerpt: String },
    #[error("malformed dictionary ({message}): {excerpt:?}")]
    Malformed { message: String, excerpt: String },
    #[error("part `{part}` has no CID")]
    MissingCid { part: String },
    #[error("part `{part}`: {message}")]
    BadPart { part: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartProposal {
    pub part: String,
    pub cid: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedProposal {
    pub parts: Vec<PartProposal>,
    pub warnings: Vec<String>,
}

impl ParsedProposal {
    pub fn part(&self, name: &str) -> Option<&PartProposal> {
        self.parts.iter().find(|p| p.part == name)
    }
}

fn excerpt(text: &str) -> String {
    const MAX: usize = 120;
    let t = text.trim();
    match t.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &t[..i]),
        None => t.to_string(),
    }
}

/// Byte range of the first balanced `{...}` block, skipping braces in strings.
pub fn outermost_braces(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let (mut depth, mut in_str, mut escaped) = (0usize, false, false);
    for (i, c) in text[start..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Drops `//` and `#` line comments and trailing commas outside strings.
fn relax(block: &str) -> String {
    let mut out = String::with_capacity(block.len());
    let mut chars = block.chars().peekable();
    let (mut in_str, mut escaped) = (false, false);
    while let Some(c) = chars.next() {
        if in_str {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                out.push(c);
            }
            '#' => skip_line(&mut chars),
            '/' if chars.peek() == Some(&'/') => skip_line(&mut chars),
            _ => out.push(c),
        }
    }
    // trailing commas
    let mut cleaned = String::with_capacity(out.len());
    let bytes: Vec<char> = out.chars().collect();
    let mut in_str = false;
    let mut escaped = false;
    for (i, &c) in bytes.iter().enumerate() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ',' {
            let next = bytes[i + 1..].iter().find(|ch| !ch.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        cleaned.push(c);
    }
    cleaned
}

fn skip_line(chars: &mut std::iter::Peekable<std::str::Chars>) {
    while let Some(&c) = chars.peek() {
        if c == '\n' {
            break;
        }
        chars.next();
    }
}

/// The response's dictionary as an ordered JSON object.
pub fn extract_dictionary(text: &str) -> Result<Map<String, Value>, ParseError> {
    let block = outermost_braces(text).ok_or_else(|| ParseError::NoDictionary {
        excerpt: excerpt(text),
    })?;
    let value: Value = serde_json::from_str(block)
        .or_else(|_| serde_json::from_str(&relax(block)))
        .map_err(|e| ParseError::Malformed {
            message: e.to_string(),
            excerpt: excerpt(block),
        })?;
    match value {
        Value::Object(map) => Ok(map),
        _ => unreachable!("a brace-delimited block parses to an object"),
    }
}

fn number(v: &Value) -> Option<(f64, bool)> {
    match v {
        Value::Number(n) => n.as_f64().map(|x| (x, false)),
        Value::String(s) => s.trim().parse::<f64>().ok().map(|x| (x, true)),
        _ => None,
    }
}

/// Parses `{part: {"CID": "Mx", "E": .., "nu": .., ...}, ...}`.
pub fn parse_parameter_response(text: &str) -> Result<ParsedProposal, ParseError> {
    let map = extract_dictionary(text)?;
    let mut out = ParsedProposal::default();
    for (part, entry) in map {
        let Value::Object(fields) = entry else {
            return Err(ParseError::BadPart {
                part,
                message: "expected a dictionary of parameters".into(),
            });
        };
        let mut cid = None;
        let mut params = BTreeMap::new();
        for (key, v) in fields {
            if key == "CID" {
                match v {
                    Value::String(s) => cid = Some(s.trim().to_string()),
                    other => {
                        return Err(ParseError::BadPart {
                            part,
                            message: format!("CID must be a string, got {other}"),
                        })
                    }
                }
            } else if KNOWN_PARAMETERS.contains(&key.as_str()) {
                if v.is_null() {
                    out.warnings
                        .push(format!("part `{part}`: `{key}` is null and was ignored"));
                    continue;
                }
                let (x, quoted) = number(&v).ok_or_else(|| ParseError::BadPart {
                    part: part.clone(),
                    message: format!("`{key}` is not a number: {v}"),
                })?;
                if quoted {
                    out.warnings
                        .push(format!("part `{part}`: `{key}` was given as a string"));
                }
                params.insert(key, x);
            } else {
                out.warnings
                    .push(format!("part `{part}`: unknown key `{key}` ignored"));
            }
        }
        let cid = cid.ok_or_else(|| ParseError::MissingCid { part: part.clone() })?;
        out.parts.push(PartProposal { part, cid, params });
    }
    Ok(out)
}

/// Parses `{part: "fine material", ...}`.
pub fn parse_fine_material_response(text: &str) -> Result<Vec<(String, String)>, ParseError> {
    extract_dictionary(text)?
        .into_iter()
        .map(|(part, v)| match v {
            Value::String(s) => Ok((part, s.trim().to_string())),
            other => Err(ParseError::BadPart {
                part,
                message: format!("expected a material name, got {other}"),
            }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEAT: &str =
        r#"{"seat": {"CID": "M1", "E": 5e6, "nu": 0.4, "sigma_y": 1e5, "rho": 300}}"#;

    #[test]
    fn direct_instance() {
        let p = parse_parameter_response(SEAT).unwrap();
        assert_eq!(p.parts.len(), 1);
        let seat = &p.parts[0];
        assert_eq!(seat.cid, "M1");
        assert_eq!(seat.params["E"], 5e6);
        assert_eq!(seat.params["sigma_y"], 1e5);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn fenced_and_prose_wrapped() {
        let fenced = format!("Here you go:\n```json\n{SEAT}\n```\nHope this helps.");
        assert_eq!(
            parse_parameter_response(&fenced),
            parse_parameter_response(SEAT)
        );
    }

    #[test]
    fn prose_only_is_an_error() {
        assert!(matches!(
            parse_parameter_response("I think the seat is made of foam."),
            Err(ParseError::NoDictionary { .. })
        ));
    }

    #[test]
    fn echoed_comments_and_trailing_commas() {
        let text = r#"{
"seat": {
    "CID": "M1",  // Combination ID
    "E": 2.5e6,
    "nu": 0.3,
    "sigma_y": 4e4, # yield
    "rho": 250,
},
}"#;
        let p = parse_parameter_response(text).unwrap();
        assert_eq!(p.parts[0].params["rho"], 250.0);
    }

    #[test]
    fn missing_cid_and_unknown_keys() {
        assert_eq!(
            parse_parameter_response(r#"{"leg": {"E": 1e9, "nu": 0.3}}"#),
            Err(ParseError::MissingCid { part: "leg".into() })
        );
        let p = parse_parameter_response(r#"{"leg": {"CID": "M1", "E": "1e9", "color": "red"}}"#)
            .unwrap();
        assert_eq!(p.parts[0].params["E"], 1e9);
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn braces_inside_strings() {
        let text = r#"note {"a": {"CID": "M0", "E": 1e5, "x": "}{"}} tail"#;
        assert_eq!(parse_parameter_response(text).unwrap().parts[0].part, "a");
    }

    #[test]
    fn part_order_is_kept() {
        let p = parse_parameter_response(r#"{"z": {"CID": "M0"}, "a": {"CID": "M0"}}"#).unwrap();
        let names: Vec<_> = p.parts.iter().map(|p| p.part.as_str()).collect();
        assert_eq!(names, ["z", "a"]);
    }

    #[test]
    fn fine_material_answers() {
        let r = parse_fine_material_response(
            "```\n{\n  \"seat\": \"wool\",\n  \"back\": \"linen\"\n}\n```",
        )
        .unwrap();
        assert_eq!(
            r,
            vec![
                ("seat".into(), "wool".into()),
                ("back".into(), "linen".into())
            ]
        );
    }
}
