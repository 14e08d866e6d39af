//! Question/answer templates and the template-pack file format.
//!
//! A pack is a plain text file of blocks:
//!
//! ```text
//! # comment
//! @template column_from_values cfv-1
//! @question
//! Which column of {table} holds these values: {values}?
//! @answer
//! {column}
//! @end
//! ```
//!
//! An optional `@input` section may sit between question and answer. Body
//! lines are literal; a line starting with `@@` stands for a line starting
//! with `@`. Placeholders are `{name}`; `{{` and `}}` are literal braces.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use thiserror::Error;

use super::{Objective, TaskKind, TaskRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown task kind `{kind}`")]
    UnknownTaskKind { line: usize, kind: String },
    #[error("duplicate template id `{0}`")]
    DuplicateId(String),
    #[error("template `{template_id}` uses `{{{name}}}`, which the {kind} fill context does not provide")]
    UnknownPlaceholder {
        template_id: String,
        kind: TaskKind,
        name: String,
    },
    #[error("template pack has no template for {0}")]
    MissingKind(TaskKind),
    #[error("no value for placeholder `{{{0}}}`")]
    MissingPlaceholder(String),
    #[error("cannot read template pack {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Fills = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Lit(String),
    Hole(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Compiled {
    text: String,
    segments: Vec<Segment>,
}

impl Compiled {
    fn new(text: &str) -> Result<Self, String> {
        Ok(Compiled {
            text: text.to_string(),
            segments: split_placeholders(text)?,
        })
    }

    fn holes(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Hole(h) => Some(h.as_str()),
            Segment::Lit(_) => None,
        })
    }

    fn render(&self, fills: &Fills) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len());
        for seg in &self.segments {
            match seg {
                Segment::Lit(s) => out.push_str(s),
                Segment::Hole(h) => out.push_str(
                    fills
                        .get(h)
                        .ok_or_else(|| TemplateError::MissingPlaceholder(h.clone()))?,
                ),
            }
        }
        Ok(out)
    }
}

fn split_placeholders(text: &str) -> Result<Vec<Segment>, String> {
    let mut segs = Vec::new();
    let mut lit = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                lit.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                lit.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) if c.is_ascii_alphanumeric() || c == '_' => name.push(c),
                        Some(c) => return Err(format!("invalid character `{c}` in placeholder")),
                        None => return Err("unterminated placeholder".into()),
                    }
                }
                if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
                    return Err(format!("invalid placeholder name `{{{name}}}`"));
                }
                if !lit.is_empty() {
                    segs.push(Segment::Lit(std::mem::take(&mut lit)));
                }
                segs.push(Segment::Hole(name));
            }
            '}' => return Err("unmatched `}` (write `}}` for a literal brace)".into()),
            c => lit.push(c),
        }
    }
    if !lit.is_empty() {
        segs.push(Segment::Lit(lit));
    }
    Ok(segs)
}

/// A question template, an optional input template and an answer template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTemplate {
    task_kind: TaskKind,
    template_id: String,
    question: Compiled,
    input: Compiled,
    answer: Compiled,
}

impl TaskTemplate {
    pub fn new(
        task_kind: TaskKind,
        template_id: &str,
        question_text: &str,
        input_text: &str,
        answer_text: &str,
    ) -> Result<Self, TemplateError> {
        let compile = |t: &str| {
            Compiled::new(t).map_err(|message| TemplateError::Syntax {
                line: 0,
                message: format!("template `{template_id}`: {message}"),
            })
        };
        Ok(TaskTemplate {
            task_kind,
            template_id: template_id.to_string(),
            question: compile(question_text)?,
            input: compile(input_text)?,
            answer: compile(answer_text)?,
        })
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn template_id(&self) -> &str {
        &self.template_id
    }

    pub fn question_text(&self) -> &str {
        &self.question.text
    }

    pub fn input_text(&self) -> &str {
        &self.input.text
    }

    pub fn answer_text(&self) -> &str {
        &self.answer.text
    }

    /// Every placeholder name used anywhere in the template.
    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.question
            .holes()
            .chain(self.input.holes())
            .chain(self.answer.holes())
            .collect()
    }

    pub fn render_answer(&self, fills: &Fills) -> Result<String, TemplateError> {
        self.answer.render(fills)
    }

    /// Checks all placeholders against the fill context of the task kind.
    pub fn check_fill_names(&self) -> Result<(), TemplateError> {
        let allowed = self.task_kind.fill_names();
        match self.placeholders().into_iter().find(|p| !allowed.contains(p)) {
            Some(name) => Err(TemplateError::UnknownPlaceholder {
                template_id: self.template_id.clone(),
                kind: self.task_kind,
                name: name.to_string(),
            }),
            None => Ok(()),
        }
    }
}

/// Substitutes `fills` into the three template bodies.
pub fn render_record(
    tpl: &TaskTemplate,
    fills: &Fills,
    db_id: &str,
) -> Result<TaskRecord, TemplateError> {
    Ok(TaskRecord {
        instruction: tpl.question.render(fills)?,
        input: tpl.input.render(fills)?,
        output: tpl.answer.render(fills)?,
        task_kind: tpl.task_kind,
        objective: tpl.task_kind.objective(),
        db_id: db_id.to_string(),
        template_id: tpl.template_id.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePack {
    templates: Vec<TaskTemplate>,
}

const DEFAULT_PACK: &str = include_str!("../../templates/default.tpl");

#[derive(PartialEq)]
enum Section {
    Question,
    Input,
    Answer,
}

impl TemplatePack {
    /// The pack shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_PACK).expect("built-in template pack is valid")
    }

    pub fn builtin_source() -> &'static str {
        DEFAULT_PACK
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn from_templates(templates: Vec<TaskTemplate>) -> Result<Self, TemplateError> {
        let mut seen = HashSet::new();
        for t in &templates {
            if !seen.insert(t.template_id.clone()) {
                return Err(TemplateError::DuplicateId(t.template_id.clone()));
            }
            t.check_fill_names()?;
        }
        Ok(TemplatePack { templates })
    }

    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        struct Open {
            kind: TaskKind,
            id: String,
            line: usize,
            section: Option<Section>,
            question: Vec<String>,
            input: Vec<String>,
            answer: Vec<String>,
        }
        let syntax = |line: usize, message: &str| TemplateError::Syntax {
            line,
            message: message.to_string(),
        };
        let body = |lines: &[String]| -> String {
            let start = lines.iter().position(|l| !l.trim().is_empty());
            let end = lines.iter().rposition(|l| !l.trim().is_empty());
            match (start, end) {
                (Some(s), Some(e)) => lines[s..=e].join("\n"),
                _ => String::new(),
            }
        };

        let mut templates = Vec::new();
        let mut open: Option<Open> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            let Some(cur) = open.as_mut() else {
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                let mut words = t.split_whitespace();
                if words.next() != Some("@template") {
                    return Err(syntax(line_no, "expected `@template <task_kind> <id>`"));
                }
                let (Some(kind), Some(id), None) = (words.next(), words.next(), words.next())
                else {
                    return Err(syntax(line_no, "expected `@template <task_kind> <id>`"));
                };
                let kind = kind
                    .parse::<TaskKind>()
                    .map_err(|_| TemplateError::UnknownTaskKind {
                        line: line_no,
                        kind: kind.to_string(),
                    })?;
                open = Some(Open {
                    kind,
                    id: id.to_string(),
                    line: line_no,
                    section: None,
                    question: Vec::new(),
                    input: Vec::new(),
                    answer: Vec::new(),
                });
                continue;
            };

            if let Some(rest) = line.strip_prefix("@@") {
                let lit = format!("@{rest}");
                match cur.section {
                    Some(Section::Question) => cur.question.push(lit),
                    Some(Section::Input) => cur.input.push(lit),
                    Some(Section::Answer) => cur.answer.push(lit),
                    None => return Err(syntax(line_no, "text before `@question`")),
                }
                continue;
            }
            match line.trim() {
                "@question" if cur.section.is_none() => cur.section = Some(Section::Question),
                "@input" if cur.section == Some(Section::Question) => {
                    cur.section = Some(Section::Input)
                }
                "@answer"
                    if matches!(cur.section, Some(Section::Question) | Some(Section::Input)) =>
                {
                    cur.section = Some(Section::Answer)
                }
                "@end" if cur.section == Some(Section::Answer) => {
                    let cur = open.take().unwrap();
                    let question = body(&cur.question);
                    let answer = body(&cur.answer);
                    if question.is_empty() || answer.is_empty() {
                        return Err(syntax(cur.line, "question and answer must be non-empty"));
                    }
                    let tpl = TaskTemplate::new(cur.kind, &cur.id, &question, &body(&cur.input), &answer)
                        .map_err(|e| match e {
                            TemplateError::Syntax { message, .. } => syntax(cur.line, &message),
                            other => other,
                        })?;
                    templates.push(tpl);
                }
                t if t.starts_with('@') => {
                    return Err(syntax(line_no, &format!("unexpected directive `{t}`")));
                }
                _ => match cur.section {
                    Some(Section::Question) => cur.question.push(line.to_string()),
                    Some(Section::Input) => cur.input.push(line.to_string()),
                    Some(Section::Answer) => cur.answer.push(line.to_string()),
                    None if line.trim().is_empty() => {}
                    None => return Err(syntax(line_no, "text before `@question`")),
                },
            }
        }
        if let Some(cur) = open {
            return Err(syntax(cur.line, "template not closed with `@end`"));
        }
        Self::from_templates(templates)
    }

    pub fn templates(&self) -> &[TaskTemplate] {
        &self.templates
    }

    pub fn get(&self, template_id: &str) -> Option<&TaskTemplate> {
        self.templates.iter().find(|t| t.template_id == template_id)
    }

    pub fn for_kind(&self, kind: TaskKind) -> Vec<&TaskTemplate> {
        self.templates.iter().filter(|t| t.task_kind == kind).collect()
    }

    /// The `n`-th template of `kind`, cycling.
    pub fn pick(&self, kind: TaskKind, n: usize) -> Result<&TaskTemplate, TemplateError> {
        let of_kind = self.for_kind(kind);
        if of_kind.is_empty() {
            return Err(TemplateError::MissingKind(kind));
        }
        Ok(of_kind[n % of_kind.len()])
    }

    /// Errors unless every kind has at least one template.
    pub fn require_kinds(&self, kinds: impl IntoIterator<Item = TaskKind>) -> Result<(), TemplateError> {
        for k in kinds {
            if !self.templates.iter().any(|t| t.task_kind == k) {
                return Err(TemplateError::MissingKind(k));
            }
        }
        Ok(())
    }

    pub fn objectives(&self) -> BTreeSet<Objective> {
        self.templates.iter().map(|t| t.task_kind.objective()).collect()
    }
}
