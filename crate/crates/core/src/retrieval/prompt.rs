use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TEMPLATE: &str = "You are answering a programming question.\nExample question:\n{{EXAMPLE_Q}}\nExample answer:\n{{EXAMPLE_A}}\nQuestion:\n{{QUESTION}}\nAnswer:\n";

const EXAMPLE_Q: &str = "{{EXAMPLE_Q}}";
const EXAMPLE_A: &str = "{{EXAMPLE_A}}";
const QUESTION: &str = "{{QUESTION}}";

/// A prompt template split around its placeholders.
///
/// The exemplar block runs from the label line just above `{{EXAMPLE_Q}}`
/// (when that placeholder sits alone on its line) through the end of the
/// `{{EXAMPLE_A}}` line. It is dropped when no exemplar is given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub text: String,
    head: String,
    example_open: String,
    example_mid: String,
    example_close: String,
    before_question: String,
    tail: String,
}

fn find_once(text: &str, needle: &str) -> Result<usize> {
    let mut it = text.match_indices(needle);
    match (it.next(), it.next()) {
        (Some((i, _)), None) => Ok(i),
        (None, _) => Err(Error::Config(format!("template is missing {needle}"))),
        _ => Err(Error::Config(format!("template repeats {needle}"))),
    }
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let q = find_once(&text, EXAMPLE_Q)?;
        let a = find_once(&text, EXAMPLE_A)?;
        let x = find_once(&text, QUESTION)?;
        if !(q < a && a < x) {
            return Err(Error::Config(
                "template placeholders must appear as example question, example answer, question".into(),
            ));
        }
        let q_line = text[..q].rfind('\n').map_or(0, |i| i + 1);
        let alone = q == q_line && text[q + EXAMPLE_Q.len()..].starts_with('\n');
        let start = if alone && q_line > 0 {
            text[..q_line - 1].rfind('\n').map_or(0, |i| i + 1)
        } else {
            q_line
        };
        let a_end = a + EXAMPLE_A.len();
        let end = text[a_end..x].find('\n').map_or(x, |i| a_end + i + 1);
        Ok(Self {
            id: id.into(),
            head: text[..start].to_string(),
            example_open: text[start..q].to_string(),
            example_mid: text[q + EXAMPLE_Q.len()..a].to_string(),
            example_close: text[a_end..end].to_string(),
            before_question: text[end..x].to_string(),
            tail: text[x + QUESTION.len()..].to_string(),
            text,
        })
    }

    pub fn default_template() -> Self {
        Self::new("default", DEFAULT_TEMPLATE).expect("default template is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("template {}: {e}", path.display())))?;
        let id = path
            .file_stem()
            .map_or_else(|| "custom".to_string(), |s| s.to_string_lossy().into_owned());
        Self::new(id, text)
    }

    fn prefix(&self, exemplar: Option<(&str, &str)>) -> String {
        let mut out = self.head.clone();
        if let Some((sq, sa)) = exemplar {
            out.push_str(&self.example_open);
            out.push_str(sq);
            out.push_str(&self.example_mid);
            out.push_str(sa);
            out.push_str(&self.example_close);
        }
        out.push_str(&self.before_question);
        out
    }

    /// Single-pass substitution: placeholder-like text inside the inputs is
    /// never expanded.
    pub fn render(&self, question: &str, exemplar: Option<(&str, &str)>) -> String {
        let mut out = self.prefix(exemplar);
        out.push_str(question);
        out.push_str(&self.tail);
        out
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::default_template()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub question: String,
    pub exemplar: Option<(String, String)>,
    pub prompt: String,
}

pub fn assemble_prompt(template: &PromptTemplate, question: &str, exemplar: Option<(&str, &str)>) -> PromptBundle {
    PromptBundle {
        template_id: template.id.clone(),
        question: question.to_string(),
        exemplar: exemplar.map(|(q, a)| (q.to_string(), a.to_string())),
        prompt: template.render(question, exemplar),
    }
}

/// Extracts the question from a rendered prompt, given the exemplar used.
pub fn recover_question(template: &PromptTemplate, rendered: &str, exemplar: Option<(&str, &str)>) -> Option<String> {
    let prefix = template.prefix(exemplar);
    rendered
        .strip_prefix(prefix.as_str())?
        .strip_suffix(template.tail.as_str())
        .map(str::to_string)
}
