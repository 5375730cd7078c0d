//! Prompt templates and placeholder filling.
//!
//! Templates use `{name}` placeholders. Filling is a single left-to-right
//! pass, so braces inside substituted values are never re-expanded, and
//! braces that do not name a known placeholder (JSON examples) pass through.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub entity: String,
    pub relation: String,
    /// Appended to `relation` for each tier pass.
    pub relation_pass: String,
    pub skill_update: String,
    pub reflect_unstable: String,
    pub reflect_missed: String,
    pub judge: String,
    pub fuse: String,
}

const TEMPLATES: [(&str, &[&str]); 8] = [
    ("entity", &["text"]),
    ("relation", &["experiences", "known nodes", "text"]),
    ("relation_pass", &["tier", "tier guidance", "previous relations"]),
    ("skill_update", &["existing experiences", "new experiences"]),
    (
        "reflect_unstable",
        &["text", "nodes", "type", "description", "success reasoning", "success edge"],
    ),
    ("reflect_missed", &["text", "nodes", "type", "description"]),
    ("judge", &["context", "fact"]),
    ("fuse", &["kind", "descriptions"]),
];

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            entity: include_str!("../prompts/entity.txt").into(),
            relation: include_str!("../prompts/relation.txt").into(),
            relation_pass: include_str!("../prompts/relation_pass.txt").into(),
            skill_update: include_str!("../prompts/skill_update.txt").into(),
            reflect_unstable: include_str!("../prompts/reflect_unstable.txt").into(),
            reflect_missed: include_str!("../prompts/reflect_missed.txt").into(),
            judge: include_str!("../prompts/judge.txt").into(),
            fuse: include_str!("../prompts/fuse.txt").into(),
        }
    }
}

/// Config section naming a directory of override templates. A file
/// `<name>.txt` there replaces the built-in template of that name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub dir: Option<std::path::PathBuf>,
}

impl PromptSet {
    pub fn from_config(config: &PromptConfig) -> Result<Self> {
        match &config.dir {
            Some(dir) => Self::with_overrides(dir),
            None => Ok(Self::default()),
        }
    }

    pub fn with_overrides(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut set = Self::default();
        for (name, _) in TEMPLATES {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *set.slot_mut(name) = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        set.validate()?;
        Ok(set)
    }

    fn slot_mut(&mut self, name: &str) -> &mut String {
        match name {
            "entity" => &mut self.entity,
            "relation" => &mut self.relation,
            "relation_pass" => &mut self.relation_pass,
            "skill_update" => &mut self.skill_update,
            "reflect_unstable" => &mut self.reflect_unstable,
            "reflect_missed" => &mut self.reflect_missed,
            "judge" => &mut self.judge,
            "fuse" => &mut self.fuse,
            _ => unreachable!("unknown template {name}"),
        }
    }

    /// Every template must mention each of its placeholders.
    pub fn validate(&self) -> Result<()> {
        let mut copy = self.clone();
        for (name, required) in TEMPLATES {
            let text = copy.slot_mut(name);
            for p in required {
                if !text.contains(&format!("{{{p}}}")) {
                    return Err(Error::Config(format!(
                        "prompt template {name:?} lacks placeholder {{{p}}}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Substitute `{key}` placeholders in one pass.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_complete() {
        PromptSet::default().validate().unwrap();
    }

    #[test]
    fn fill_is_single_pass_and_keeps_json_braces() {
        let t = r#"A {x} B {"k":"{x}"} {unknown}"#;
        let got = fill(t, &[("x", "{x}!")]);
        assert_eq!(got, r#"A {x}! B {"k":"{x}!"} {unknown}"#);
    }

    #[test]
    fn keys_with_spaces() {
        assert_eq!(fill("[{known nodes}]", &[("known nodes", "a, b")]), "[a, b]");
    }

    #[test]
    fn entity_prompt_keeps_sentinel_and_schema() {
        let p = fill(&PromptSet::default().entity, &[("text", "hello")]);
        assert!(p.contains("Text: hello"));
        assert!(p.contains("{State: False}"));
        assert!(p.contains(r#"{"nodes":[{"name":"","type":"","description":""}]}"#));
    }

    #[test]
    fn overrides_replace_and_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("judge.txt"), "{context} => {fact}?").unwrap();
        let set = PromptSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.judge, "{context} => {fact}?");
        assert_eq!(set.entity, PromptSet::default().entity);

        std::fs::write(dir.path().join("entity.txt"), "no placeholder").unwrap();
        assert!(matches!(
            PromptSet::with_overrides(dir.path()),
            Err(Error::Config(_))
        ));
    }
}
