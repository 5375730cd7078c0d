//! Strict parsers for the structured outputs the extraction, reflection and
//! controller prompts ask for.
//!
//! Models wrap JSON in code fences or prose, so JSON payloads are located by
//! taking the first balanced `{...}` or `[...]` span that parses. Anything
//! that cannot be read comes back as [`Error::Parse`] with the raw text.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Entity, Tier};
use crate::util::word_count;

pub const SKILL_KIND: &str = "RELATION DISCOVERY";

/// Result of parsing an entity-extraction response.
#[derive(Debug, Clone, PartialEq)]
pub enum EntityResponse {
    Entities(Vec<Entity>),
    /// The model reported the text carries no meaningful content.
    NoContent,
}

/// One relation as returned by a relation-extraction pass, before filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationRecord {
    pub description: String,
    pub nodes: Vec<String>,
    pub tier: Option<Tier>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Unstable,
    Missed,
}

impl Origin {
    /// Maximum combined trigger + action length in words.
    pub fn word_budget(self) -> usize {
        match self {
            Origin::Unstable => 50,
            Origin::Missed => 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsightProposal {
    pub skill_kind: String,
    pub trigger: String,
    pub action: String,
    pub origin: Origin,
    /// Index of the gold edge this proposal was distilled from.
    pub source_relation: Option<usize>,
}

impl InsightProposal {
    /// Canonical `<Insight>` block, as fed to the library controller.
    pub fn render(&self) -> String {
        format!(
            "<Insight>\nSKILL: {}\nTRIGGER: {}\nACTION: {}\n</Insight>",
            self.skill_kind, self.trigger, self.action
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InsightParse {
    pub proposals: Vec<InsightProposal>,
    /// One entry per rejected block.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "operation", rename_all = "UPPERCASE")]
pub enum LibraryOp {
    Add {
        trigger: String,
        action: String,
    },
    Merge {
        trigger: String,
        action: String,
        #[serde(rename = "merge with ids")]
        merge_with_ids: Vec<String>,
    },
    Skip {
        reason: String,
    },
    Delete {
        #[serde(rename = "target id")]
        target_id: String,
        reason: String,
    },
}

/// Locate the first balanced JSON value in `raw` that parses.
pub fn extract_json(raw: &str) -> Result<Value> {
    let mut first_err = None;
    for (start, c) in raw.char_indices() {
        if c != '{' && c != '[' {
            continue;
        }
        let Some(end) = balanced_end(&raw[start..]) else {
            continue;
        };
        match serde_json::from_str::<Value>(&raw[start..start + end]) {
            Ok(v) => return Ok(v),
            Err(e) => {
                first_err.get_or_insert(e.to_string());
            }
        }
    }
    Err(Error::parse(
        "json payload",
        first_err.unwrap_or_else(|| "no JSON object or array found".into()),
        raw,
    ))
}

/// Byte length of the balanced bracket span starting at `s[0]`.
fn balanced_end(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
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
            '{' | '[' => depth += 1,
            '}' | ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + c.len_utf8());
                }
            }
            _ => {}
        }
    }
    None
}

/// The entity prompt's sentinel for meaningless input: `{State: False}`.
pub fn is_no_content_sentinel(raw: &str) -> bool {
    let squeezed: String = strip_fences(raw)
        .chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '{' | '}' | '"' | '\''))
        .collect();
    squeezed.eq_ignore_ascii_case("state:false")
}

fn strip_fences(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

fn str_field(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter()
        .find_map(|k| obj.get(*k))
        .and_then(|v| match v {
            Value::String(s) => Some(s.trim().to_string()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
}

pub fn parse_entities(raw: &str) -> Result<EntityResponse> {
    if is_no_content_sentinel(raw) {
        return Ok(EntityResponse::NoContent);
    }
    let value = extract_json(raw)?;
    let nodes = value
        .get("nodes")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse("entity response", "expected an object with a \"nodes\" array", raw))?;
    let mut out = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        let Some(obj) = node.as_object() else {
            return Err(Error::parse("entity response", format!("node #{i} is not an object"), raw));
        };
        let name = str_field(obj, &["name"]).unwrap_or_default();
        if name.is_empty() {
            log::warn!("entity response: node #{i} has no name, ignored");
            continue;
        }
        let entity_type = str_field(obj, &["type", "entity_type"]).unwrap_or_default();
        let description = str_field(obj, &["description"]).unwrap_or_default();
        out.push(Entity::new(&name, &entity_type, &description));
    }
    Ok(EntityResponse::Entities(out))
}

/// Parse `{"relations":[{"description", "nodes", "type"}]}`.
pub fn parse_relations(raw: &str) -> Result<Vec<RelationRecord>> {
    if is_no_content_sentinel(raw) {
        return Ok(Vec::new());
    }
    let value = extract_json(raw)?;
    let rels = value
        .get("relations")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            Error::parse("relation response", "expected an object with a \"relations\" array", raw)
        })?;
    let mut out = Vec::with_capacity(rels.len());
    for (i, rel) in rels.iter().enumerate() {
        let obj = rel.as_object().ok_or_else(|| {
            Error::parse("relation response", format!("relation #{i} is not an object"), raw)
        })?;
        let description = str_field(obj, &["description", "relation"]).unwrap_or_default();
        if description.is_empty() {
            return Err(Error::parse(
                "relation response",
                format!("relation #{i} has no description"),
                raw,
            ));
        }
        let nodes = obj
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| {
                Error::parse("relation response", format!("relation #{i} has no \"nodes\" array"), raw)
            })?
            .iter()
            .filter_map(Value::as_str)
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let tier = str_field(obj, &["type", "tier"]).and_then(|t| Tier::from_label(&t));
        out.push(RelationRecord {
            description,
            nodes,
            tier,
        });
    }
    Ok(out)
}

/// Every `<Insight>...</Insight>` body in `raw`, plus a flag per block for
/// whether it was closed.
fn insight_blocks(raw: &str) -> Vec<(&str, bool)> {
    const OPEN: &str = "<insight>";
    const CLOSE: &str = "</insight>";
    let lower = raw.to_ascii_lowercase();
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(off) = lower[pos..].find(OPEN) {
        let body_start = pos + off + OPEN.len();
        let next_open = lower[body_start..].find(OPEN).map(|o| body_start + o);
        match lower[body_start..].find(CLOSE).map(|c| body_start + c) {
            Some(close) if next_open.is_none_or(|o| close < o) => {
                out.push((&raw[body_start..close], true));
                pos = close + CLOSE.len();
            }
            _ => {
                let end = next_open.unwrap_or(raw.len());
                out.push((&raw[body_start..end], false));
                pos = end;
            }
        }
    }
    out
}

fn parse_insight_body(body: &str, origin: Origin) -> std::result::Result<InsightProposal, String> {
    #[derive(Clone, Copy)]
    enum Field {
        Trigger,
        Action,
    }
    let mut skill = None::<String>;
    let mut trigger = String::new();
    let mut action = String::new();
    let mut current = None;
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (label, rest) = match line.split_once(':') {
            Some((l, r)) => (l.trim().to_ascii_uppercase(), r.trim()),
            None => (String::new(), line),
        };
        match label.as_str() {
            "SKILL" => {
                skill = Some(rest.to_string());
                current = None;
            }
            "TRIGGER" => {
                trigger = rest.to_string();
                current = Some(Field::Trigger);
            }
            "ACTION" => {
                action = rest.to_string();
                current = Some(Field::Action);
            }
            _ => {
                let target = match current {
                    Some(Field::Trigger) => &mut trigger,
                    Some(Field::Action) => &mut action,
                    None => return Err(format!("unexpected line {line:?}")),
                };
                if !target.is_empty() {
                    target.push(' ');
                }
                target.push_str(line);
            }
        }
    }
    if let Some(kind) = &skill {
        if !kind.eq_ignore_ascii_case(SKILL_KIND) {
            return Err(format!("SKILL must be {SKILL_KIND}, got {kind:?}"));
        }
    }
    if trigger.is_empty() {
        return Err("missing TRIGGER".into());
    }
    if action.is_empty() {
        return Err("missing ACTION".into());
    }
    let words = word_count(&trigger) + word_count(&action);
    if words > origin.word_budget() {
        return Err(format!(
            "trigger + action is {words} words, limit is {}",
            origin.word_budget()
        ));
    }
    Ok(InsightProposal {
        skill_kind: SKILL_KIND.to_string(),
        trigger,
        action,
        origin,
        source_relation: None,
    })
}

pub fn parse_insights(raw: &str, origin: Origin) -> Result<InsightParse> {
    let mut parsed = InsightParse::default();
    for (i, (body, closed)) in insight_blocks(raw).into_iter().enumerate() {
        if !closed {
            parsed.warnings.push(format!("insight block #{i} is not closed"));
            continue;
        }
        match parse_insight_body(body, origin) {
            Ok(p) => parsed.proposals.push(p),
            Err(why) => parsed.warnings.push(format!("insight block #{i}: {why}")),
        }
    }
    for w in &parsed.warnings {
        log::warn!("{w}");
    }
    if parsed.proposals.is_empty() {
        let detail = if parsed.warnings.is_empty() {
            "no <Insight> block found".to_string()
        } else {
            parsed.warnings.join("; ")
        };
        return Err(Error::parse("insight response", detail, raw));
    }
    Ok(parsed)
}

fn normalized_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace(['_', '-'], " ")
}

pub fn parse_library_ops(raw: &str) -> Result<Vec<LibraryOp>> {
    let value = extract_json(raw)?;
    let items = value
        .as_array()
        .ok_or_else(|| Error::parse("library operations", "expected a JSON array", raw))?;
    let mut ops = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let obj = item.as_object().ok_or_else(|| {
            Error::parse("library operations", format!("element #{i} is not an object"), raw)
        })?;
        let fields: serde_json::Map<String, Value> = obj
            .iter()
            .map(|(k, v)| (normalized_key(k), v.clone()))
            .collect();
        let text = |key: &str| -> Result<String> {
            str_field(&fields, &[key]).filter(|s| !s.is_empty()).ok_or_else(|| {
                Error::parse(
                    "library operations",
                    format!("element #{i} is missing {key:?}"),
                    raw,
                )
            })
        };
        let reason = str_field(&fields, &["reason"]).unwrap_or_default();
        let label = str_field(&fields, &["operation", "op"]).ok_or_else(|| {
            Error::parse("library operations", format!("element #{i} has no \"operation\""), raw)
        })?;
        match label.to_ascii_uppercase().as_str() {
            "ADD" => ops.push(LibraryOp::Add {
                trigger: text("trigger")?,
                action: text("action")?,
            }),
            "MERGE" => {
                let ids: Vec<String> = fields
                    .get("merge with ids")
                    .and_then(Value::as_array)
                    .map(|a| {
                        a.iter()
                            .filter_map(Value::as_str)
                            .map(|s| s.trim().to_string())
                            .collect()
                    })
                    .unwrap_or_default();
                if ids.is_empty() {
                    return Err(Error::parse(
                        "library operations",
                        format!("MERGE element #{i} needs a non-empty \"merge with ids\""),
                        raw,
                    ));
                }
                ops.push(LibraryOp::Merge {
                    trigger: text("trigger")?,
                    action: text("action")?,
                    merge_with_ids: ids,
                });
            }
            "SKIP" | "KEEP" => ops.push(LibraryOp::Skip { reason }),
            "DELETE" => ops.push(LibraryOp::Delete {
                target_id: text("target id")?,
                reason,
            }),
            // rewrite of an existing entry: replace it
            "MODIFY" => {
                let target_id = text("target id")?;
                let trigger = text("trigger")?;
                let action = text("action")?;
                ops.push(LibraryOp::Delete {
                    target_id,
                    reason: if reason.is_empty() { "modified".into() } else { reason },
                });
                ops.push(LibraryOp::Add { trigger, action });
            }
            other => {
                return Err(Error::parse(
                    "library operations",
                    format!("unknown operation {other:?} in element #{i}"),
                    raw,
                ))
            }
        }
    }
    Ok(ops)
}

/// Parse a bare `1` / `0` judge verdict.
pub fn parse_verdict(raw: &str) -> Result<bool> {
    let t = strip_fences(raw)
        .trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '.'));
    match t {
        "1" => Ok(true),
        "0" => Ok(false),
        _ => Err(Error::parse("judge verdict", "expected a bare 1 or 0", raw)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_happy_path() {
        let raw = r#"{"nodes":[{"name":"Pong","type":"video game","description":"early arcade game"}]}"#;
        let EntityResponse::Entities(es) = parse_entities(raw).unwrap() else {
            panic!("expected entities")
        };
        assert_eq!(es.len(), 1);
        assert_eq!(es[0].name, "Pong");
        assert_eq!(es[0].entity_type, "video game");
        assert_eq!(es[0].description, "early arcade game");
    }

    #[test]
    fn entity_sentinel() {
        assert_eq!(parse_entities("{State: False}").unwrap(), EntityResponse::NoContent);
        assert_eq!(parse_entities("{{State: False}}").unwrap(), EntityResponse::NoContent);
        assert_eq!(
            parse_entities("```\n{\"State\": \"False\"}\n```").unwrap(),
            EntityResponse::NoContent
        );
    }

    #[test]
    fn entity_malformed() {
        let err = parse_entities(r#"{"nodes": }"#).unwrap_err();
        match err {
            Error::Parse { raw, .. } => assert_eq!(raw, r#"{"nodes": }"#),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tolerates_fences_and_prose() {
        let raw = "Sure! Here [are] the entities:\n```json\n{\"nodes\":[{\"name\":\" Atari  2600 \",\"type\":\"console\",\"description\":\"home console\"}]}\n```\nDone.";
        let EntityResponse::Entities(es) = parse_entities(raw).unwrap() else {
            panic!()
        };
        assert_eq!(es[0].name, "Atari 2600");
    }

    #[test]
    fn entity_render_parse_identity() {
        let src = vec![
            Entity::new("Spacewar!", "video game", "early game with a \"quote\""),
            Entity::new("1962", "date", ""),
        ];
        let nodes: Vec<_> = src
            .iter()
            .map(|e| serde_json::json!({"name": e.name, "type": e.entity_type, "description": e.description}))
            .collect();
        let raw = serde_json::json!({ "nodes": nodes }).to_string();
        assert_eq!(parse_entities(&raw).unwrap(), EntityResponse::Entities(src));
    }

    #[test]
    fn relations_schema() {
        let raw = r#"{"relations":[{"description":"Pong ran on the Atari 2600","nodes":["pong","atari 2600"],"type":"binary"}]}"#;
        let rels = parse_relations(raw).unwrap();
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].tier, Some(Tier::Binary));
        assert_eq!(rels[0].nodes, vec!["pong", "atari 2600"]);
        assert!(parse_relations(r#"{"edges":[]}"#).is_err());
    }

    fn block(trigger: &str, action: &str) -> String {
        format!("<Insight>\nSKILL: RELATION DISCOVERY\nTRIGGER: {trigger}\nACTION: {action}\n</Insight>")
    }

    #[test]
    fn insight_happy_path() {
        let raw = block(
            "reported-attribution frame linking an act to a subject and target",
            "bind subject and target under the attributed act as one relation",
        );
        let parsed = parse_insights(&raw, Origin::Unstable).unwrap();
        assert_eq!(parsed.proposals.len(), 1);
        assert_eq!(parsed.proposals[0].origin, Origin::Unstable);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn insight_without_skill_line_defaults() {
        let raw = "<Insight>\nTRIGGER: a cue\nACTION: an\n  action spanning lines\n</Insight>";
        let p = &parse_insights(raw, Origin::Unstable).unwrap().proposals[0];
        assert_eq!(p.skill_kind, SKILL_KIND);
        assert_eq!(p.action, "an action spanning lines");
    }

    #[test]
    fn insight_over_budget_rejected() {
        let long = vec!["word"; 48].join(" ");
        let raw = block(&long, "three more words");
        assert!(matches!(
            parse_insights(&raw, Origin::Unstable),
            Err(Error::Parse { .. })
        ));
        // 32-word budget for missed
        let raw = block(&vec!["w"; 20].join(" "), &vec!["w"; 13].join(" "));
        assert!(parse_insights(&raw, Origin::Missed).is_err());
        assert!(parse_insights(&raw, Origin::Unstable).is_ok());
    }

    #[test]
    fn one_good_one_malformed_block() {
        let raw = format!(
            "{}\n<Insight>\nTRIGGER: only a trigger\n</Insight>",
            block("cue", "bind them")
        );
        // independent count of opening tags
        assert_eq!(raw.matches("<Insight>").count(), 2);
        let parsed = parse_insights(&raw, Origin::Missed).unwrap();
        assert_eq!(parsed.proposals.len(), 1);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn insight_wrong_skill_kind() {
        let raw = "<Insight>\nSKILL: ENTITY TYPING\nTRIGGER: t\nACTION: a\n</Insight>";
        assert!(parse_insights(raw, Origin::Unstable).is_err());
    }

    #[test]
    fn library_ops_variants() {
        assert_eq!(
            parse_library_ops(r#"[{"operation":"SKIP","reason":"covered"}]"#).unwrap(),
            vec![LibraryOp::Skip { reason: "covered".into() }]
        );
        let ops = parse_library_ops(
            r#"[{"operation":"MERGE","trigger":"t","action":"a","merge with ids":["E0","E1"]}]"#,
        )
        .unwrap();
        assert_eq!(
            ops,
            vec![LibraryOp::Merge {
                trigger: "t".into(),
                action: "a".into(),
                merge_with_ids: vec!["E0".into(), "E1".into()]
            }]
        );
        let ops = parse_library_ops(
            "```json\n[{\"operation\": \"DELETE\", \"target id\": \"E0\", \"reason\": \"misleading\"}, {\"operation\": \"ADD\", \"trigger\": \"t\", \"action\": \"a\"}]\n```",
        )
        .unwrap();
        assert_eq!(ops.len(), 2);
    }

    #[test]
    fn library_ops_unknown_label_named() {
        match parse_library_ops(r#"[{"operation":"RENAME"}]"#).unwrap_err() {
            Error::Parse { detail, .. } => assert!(detail.contains("RENAME")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn library_ops_required_fields() {
        assert!(parse_library_ops(r#"[{"operation":"ADD","trigger":"t"}]"#).is_err());
        assert!(parse_library_ops(r#"[{"operation":"MERGE","trigger":"t","action":"a","merge with ids":[]}]"#).is_err());
        assert!(parse_library_ops(r#"[{"operation":"DELETE"}]"#).is_err());
        assert!(parse_library_ops(r#"{"operation":"SKIP"}"#).is_err());
    }

    #[test]
    fn modify_and_keep_are_rewritten() {
        let ops = parse_library_ops(
            r#"[{"operation":"MODIFY","target_id":"E3","trigger":"t","action":"a"},{"operation":"KEEP"}]"#,
        )
        .unwrap();
        assert_eq!(
            ops,
            vec![
                LibraryOp::Delete { target_id: "E3".into(), reason: "modified".into() },
                LibraryOp::Add { trigger: "t".into(), action: "a".into() },
                LibraryOp::Skip { reason: String::new() },
            ]
        );
    }

    #[test]
    fn library_op_serializes_in_wire_format() {
        let op = LibraryOp::Merge {
            trigger: "t".into(),
            action: "a".into(),
            merge_with_ids: vec!["E0".into()],
        };
        let s = serde_json::to_string(&op).unwrap();
        assert!(s.contains("\"operation\":\"MERGE\""));
        assert_eq!(parse_library_ops(&format!("[{s}]")).unwrap(), vec![op]);
    }

    #[test]
    fn verdicts() {
        assert!(parse_verdict("1").unwrap());
        assert!(!parse_verdict(" 0\n").unwrap());
        assert!(parse_verdict("`1`").unwrap());
        assert!(parse_verdict("yes").is_err());
        assert!(parse_verdict("10").is_err());
    }
}
