//! The skill library: trigger/action pairs distilled from reflection,
//! edited by controller operations and injected into extraction prompts.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{cosine, Gateway, LibraryOp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    pub id: String,
    pub trigger: String,
    pub action: String,
    pub created_round: u32,
    /// Ids of the skills this one was merged from.
    #[serde(default)]
    pub lineage: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillLibrary {
    round: u32,
    skills: Vec<Skill>,
    /// Next numeric id suffix. Kept so ids of deleted skills are never
    /// handed out again; derived from existing ids when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    next_id: Option<u64>,
}

fn id_number(id: &str) -> Option<u64> {
    id.strip_prefix('E')?.parse().ok()
}

impl SkillLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Skill> {
        self.skills.iter().find(|s| s.id == id)
    }

    fn next_number(&self) -> u64 {
        self.next_id.unwrap_or_else(|| {
            self.skills
                .iter()
                .flat_map(|s| std::iter::once(&s.id).chain(&s.lineage))
                .filter_map(|id| id_number(id))
                .max()
                .map_or(0, |n| n + 1)
        })
    }

    fn push(&mut self, trigger: &str, action: &str, lineage: Vec<String>) {
        let n = self.next_number();
        self.skills.push(Skill {
            id: format!("E{n}"),
            trigger: trigger.trim().to_string(),
            action: action.trim().to_string(),
            created_round: self.round + 1,
            lineage,
        });
        self.next_id = Some(n + 1);
    }

    /// Apply `ops` in order without touching the round counter. On error
    /// `self` is left untouched.
    pub(crate) fn apply_in_place(&mut self, ops: &[LibraryOp]) -> Result<()> {
        let mut next = self.clone();
        for op in ops {
            match op {
                LibraryOp::Add { trigger, action } => {
                    require_text(trigger, action)?;
                    next.push(trigger, action, Vec::new());
                }
                LibraryOp::Merge {
                    trigger,
                    action,
                    merge_with_ids,
                } => {
                    require_text(trigger, action)?;
                    if merge_with_ids.is_empty() {
                        return Err(Error::InvalidInput("MERGE lists no ids".into()));
                    }
                    let mut seen = BTreeSet::new();
                    let ids: Vec<String> = merge_with_ids
                        .iter()
                        .filter(|id| seen.insert(id.as_str()))
                        .cloned()
                        .collect();
                    for id in &ids {
                        next.ensure_exists(id)?;
                    }
                    next.skills.retain(|s| !ids.contains(&s.id));
                    next.push(trigger, action, ids);
                }
                LibraryOp::Skip { .. } => {}
                LibraryOp::Delete { target_id, .. } => {
                    next.ensure_exists(target_id)?;
                    next.skills.retain(|s| &s.id != target_id);
                }
            }
        }
        *self = next;
        Ok(())
    }

    fn ensure_exists(&self, id: &str) -> Result<()> {
        if self.get(id).is_some() {
            Ok(())
        } else {
            Err(Error::UnknownSkill { id: id.to_string() })
        }
    }

    pub(crate) fn bump_round(&mut self) {
        self.round += 1;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("library serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lib: SkillLibrary = serde_json::from_str(text)
            .map_err(|e| Error::parse("skill library", e.to_string(), text))?;
        let mut ids = BTreeSet::new();
        for s in &lib.skills {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::parse("skill library", format!("duplicate id {}", s.id), text));
            }
            if s.trigger.trim().is_empty() || s.action.trim().is_empty() {
                return Err(Error::parse(
                    "skill library",
                    format!("skill {} has an empty trigger or action", s.id),
                    text,
                ));
            }
        }
        Ok(lib)
    }

    /// A missing file reads as the empty library.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Ok(Self::new());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Write to a sibling temp file, then rename over `path`.
    pub fn save_atomic(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        std::fs::write(&tmp, self.to_json()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

fn require_text(trigger: &str, action: &str) -> Result<()> {
    if trigger.trim().is_empty() || action.trim().is_empty() {
        return Err(Error::InvalidInput("skill trigger and action must be non-empty".into()));
    }
    Ok(())
}

/// Apply controller operations in order, all or nothing, and count one
/// round.
pub fn apply_library_ops(library: &SkillLibrary, ops: &[LibraryOp]) -> Result<SkillLibrary> {
    let mut next = library.clone();
    next.apply_in_place(ops)?;
    next.bump_round();
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub skills: Vec<Skill>,
    pub warning: Option<String>,
}

/// Up to `k` skills whose triggers are closest to `context`. Libraries of
/// at most `k` skills pass through whole, in id order.
pub fn select_skills(
    library: &SkillLibrary,
    context: &str,
    k: usize,
    gateway: &Gateway,
) -> Result<Selection> {
    if k == 0 {
        return Err(Error::InvalidInput("skill selection needs k >= 1".into()));
    }
    if library.len() <= k {
        return Ok(Selection {
            skills: library.skills.clone(),
            warning: None,
        });
    }
    let mut texts: Vec<String> = library.skills.iter().map(|s| s.trigger.clone()).collect();
    texts.push(context.to_string());
    match gateway.embed(&texts) {
        Ok(vectors) => {
            let (ctx, triggers) = vectors.split_last().expect("context vector present");
            let mut ranked: Vec<(usize, f64)> = triggers
                .iter()
                .enumerate()
                .map(|(i, v)| (i, cosine(v, ctx)))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            Ok(Selection {
                skills: ranked
                    .iter()
                    .take(k)
                    .map(|(i, _)| library.skills[*i].clone())
                    .collect(),
                warning: None,
            })
        }
        Err(e) => {
            let warning = format!("skill retrieval fell back to id order: {e}");
            log::warn!("{warning}");
            Ok(Selection {
                skills: library.skills.iter().take(k).cloned().collect(),
                warning: Some(warning),
            })
        }
    }
}

/// Numbered Trigger/Action block for the Experiences slot.
pub fn render_skill_block(skills: &[Skill]) -> String {
    if skills.is_empty() {
        return "(no experiences yet)".to_string();
    }
    skills
        .iter()
        .enumerate()
        .map(|(i, s)| format!("S{}:\n  Trigger: {}\n  Action: {}", i + 1, s.trigger, s.action))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The current pool as the controller sees it, keyed by skill id.
pub fn render_pool(library: &SkillLibrary) -> String {
    if library.is_empty() {
        return "(empty)".to_string();
    }
    library
        .skills
        .iter()
        .map(|s| format!("{}:\n  TRIGGER: {}\n  ACTION: {}", s.id, s.trigger, s.action))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LibraryDiff {
    pub added: Vec<Skill>,
    pub removed: Vec<Skill>,
    /// `(before, after)` pairs sharing an id.
    pub changed: Vec<(Skill, Skill)>,
}

impl LibraryDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

pub fn diff_libraries(before: &SkillLibrary, after: &SkillLibrary) -> LibraryDiff {
    let mut diff = LibraryDiff::default();
    for s in &before.skills {
        match after.get(&s.id) {
            None => diff.removed.push(s.clone()),
            Some(t) if t != s => diff.changed.push((s.clone(), t.clone())),
            Some(_) => {}
        }
    }
    diff.added = after
        .skills
        .iter()
        .filter(|s| before.get(&s.id).is_none())
        .cloned()
        .collect();
    diff
}
