//! A tiny text template engine.
//!
//! * `{name}` substitutes a binding.
//! * `{#each list}...{/each}` repeats its body once per list item; inside the
//!   body, item keys shadow outer bindings. Blocks do not nest.
//! * `{{` and `}}` produce literal braces.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("no binding for placeholder `{0}`")]
    MissingBinding(String),
    #[error("`{0}` is not a list")]
    NotAList(String),
    #[error("malformed placeholder at byte {0}")]
    Malformed(usize),
    #[error("`{{#each {0}}}` is never closed")]
    UnclosedBlock(String),
    #[error("`{{/each}}` without an open block at byte {0}")]
    UnexpectedEnd(usize),
    #[error("nested `{{#each}}` at byte {0}")]
    NestedBlock(usize),
}

pub type Item = BTreeMap<String, String>;

/// Values for a template: plain strings plus lists of items for loops.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    pub scalars: BTreeMap<String, String>,
    pub lists: BTreeMap<String, Vec<Item>>,
}

impl Bindings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.scalars.insert(key.to_string(), value.into());
        self
    }

    pub fn list(&mut self, key: &str, items: Vec<Item>) -> &mut Self {
        self.lists.insert(key.to_string(), items);
        self
    }
}

/// Builds a list item from `(key, value)` pairs.
pub fn item<const N: usize>(pairs: [(&str, String); N]) -> Item {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Segment {
    Text(String),
    Var(String),
    Each { list: String, body: Vec<Segment> },
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits a template into segments, checking block structure.
pub(crate) fn parse(template: &str) -> Result<Vec<Segment>, TemplateError> {
    let mut top: Vec<Segment> = Vec::new();
    let mut open: Option<(String, Vec<Segment>)> = None;
    let mut text = String::new();
    let bytes = template.as_bytes();
    let mut i = 0;
    let flush = |text: &mut String, out: &mut Vec<Segment>| {
        if !text.is_empty() {
            out.push(Segment::Text(std::mem::take(text)));
        }
    };
    while i < bytes.len() {
        let rest = &template[i..];
        if rest.starts_with("{{") {
            text.push('{');
            i += 2;
        } else if rest.starts_with("}}") {
            text.push('}');
            i += 2;
        } else if rest.starts_with('}') {
            return Err(TemplateError::Malformed(i));
        } else if rest.starts_with('{') {
            let close = rest.find('}').ok_or(TemplateError::Malformed(i))?;
            let inner = &rest[1..close];
            if let Some(list) = inner.strip_prefix("#each ") {
                let list = list.trim();
                if !is_name(list) {
                    return Err(TemplateError::Malformed(i));
                }
                if open.is_some() {
                    return Err(TemplateError::NestedBlock(i));
                }
                flush(&mut text, &mut top);
                open = Some((list.to_string(), Vec::new()));
                i += close + 1;
                continue;
            }
            let out = match &mut open {
                Some((_, body)) => body,
                None => &mut top,
            };
            if inner == "/each" {
                flush(&mut text, out);
                let Some((list, body)) = open.take() else {
                    return Err(TemplateError::UnexpectedEnd(i));
                };
                top.push(Segment::Each { list, body });
            } else if is_name(inner) {
                flush(&mut text, out);
                out.push(Segment::Var(inner.to_string()));
            } else {
                return Err(TemplateError::Malformed(i));
            }
            i += close + 1;
        } else {
            let ch = rest.chars().next().expect("non-empty");
            text.push(ch);
            i += ch.len_utf8();
        }
    }
    if let Some((list, _)) = open {
        return Err(TemplateError::UnclosedBlock(list));
    }
    flush(&mut text, &mut top);
    Ok(top)
}

/// Placeholder and list names a template uses.
pub(crate) fn names(segments: &[Segment]) -> (Vec<&str>, Vec<&str>) {
    let mut vars = Vec::new();
    let mut lists = Vec::new();
    for s in segments {
        match s {
            Segment::Text(_) => {}
            Segment::Var(v) => vars.push(v.as_str()),
            Segment::Each { list, body } => {
                lists.push(list.as_str());
                vars.extend(names(body).0);
            }
        }
    }
    (vars, lists)
}

pub fn render_template(template: &str, bindings: &Bindings) -> Result<String, TemplateError> {
    let segments = parse(template)?;
    let mut out = String::new();
    for s in &segments {
        match s {
            Segment::Text(t) => out.push_str(t),
            Segment::Var(v) => out.push_str(lookup(v, None, bindings)?),
            Segment::Each { list, body } => {
                let items = bindings.lists.get(list).ok_or_else(|| {
                    if bindings.scalars.contains_key(list) {
                        TemplateError::NotAList(list.clone())
                    } else {
                        TemplateError::MissingBinding(list.clone())
                    }
                })?;
                for it in items {
                    for b in body {
                        match b {
                            Segment::Text(t) => out.push_str(t),
                            Segment::Var(v) => out.push_str(lookup(v, Some(it), bindings)?),
                            Segment::Each { .. } => unreachable!("parse rejects nesting"),
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn lookup<'a>(name: &str, item: Option<&'a Item>, b: &'a Bindings) -> Result<&'a str, TemplateError> {
    item.and_then(|i| i.get(name))
        .or_else(|| b.scalars.get(name))
        .map(String::as_str)
        .ok_or_else(|| TemplateError::MissingBinding(name.to_string()))
}
