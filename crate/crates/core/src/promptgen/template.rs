//! Template parsing.
//!
//! Grammar: `$$NAME$$` placeholders (`NAME` is `[A-Z_]+`), `{{ var }}` and
//! `{{ var | filter }}` / `{{ var | filter(["a", "b"]) }}` expressions;
//! everything else is literal. Every segment keeps its source text, so the
//! template reconstructs exactly.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("template error at line {line}, column {column}: {reason}")]
pub struct ParseError {
    /// Byte offset into the source.
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

impl ParseError {
    pub(crate) fn at(source: &str, offset: usize, reason: impl Into<String>) -> Self {
        let before = &source[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Self {
            offset,
            line,
            column,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterCall {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Placeholder {
        name: String,
        raw: String,
    },
    Expression {
        variable: String,
        filter: Option<FilterCall>,
        raw: String,
        /// Byte offset of the expression in the source.
        offset: usize,
    },
}

impl Segment {
    pub fn raw(&self) -> &str {
        match self {
            Segment::Literal(text) => text,
            Segment::Placeholder { raw, .. } | Segment::Expression { raw, .. } => raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub source: String,
    pub segments: Vec<Segment>,
}

impl Template {
    /// Concatenated source text of all segments; equals `source`.
    pub fn reconstruct(&self) -> String {
        self.segments.iter().map(Segment::raw).collect()
    }

    /// Filter calls with their source offsets.
    pub fn filter_calls(&self) -> impl Iterator<Item = (&FilterCall, usize)> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Expression {
                filter: Some(f),
                offset,
                ..
            } => Some((f, *offset)),
            _ => None,
        })
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reconstruct())
    }
}

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\$\$([A-Z_]+)\$\$").expect("valid regex"));
static EXPRESSION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?s)^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\|\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*)?$",
    )
    .expect("valid regex")
});

/// Parses `["a", 'b']` (or nothing) into strings.
fn parse_args(text: &str) -> Result<Vec<String>, String> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or("filter arguments must be a bracketed list of quoted strings")?;
    let mut out = Vec::new();
    let mut chars = inner.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let Some(quote) = chars.next() else {
            break;
        };
        if quote != '"' && quote != '\'' {
            return Err(format!("expected a quoted string, found `{quote}`"));
        }
        let mut s = String::new();
        loop {
            match chars.next() {
                None => return Err("unterminated string argument".into()),
                Some('\\') => s.push(chars.next().ok_or("dangling escape")?),
                Some(c) if c == quote => break,
                Some(c) => s.push(c),
            }
        }
        out.push(s);
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next() {
            None => break,
            Some(',') => continue,
            Some(c) => return Err(format!("expected `,` between arguments, found `{c}`")),
        }
    }
    Ok(out)
}

pub fn parse_template(text: &str) -> Result<Template, ParseError> {
    let mut segments = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    let flush = |segments: &mut Vec<Segment>, from: usize, to: usize| {
        if to > from {
            segments.push(Segment::Literal(text[from..to].to_string()));
        }
    };
    while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with("$$") {
            if let Some(m) = PLACEHOLDER.captures(rest) {
                flush(&mut segments, literal_start, i);
                let raw = m[0].to_string();
                segments.push(Segment::Placeholder {
                    name: m[1].to_string(),
                    raw: raw.clone(),
                });
                i += raw.len();
                literal_start = i;
                continue;
            }
        } else if rest.starts_with("{{") {
            let end = rest
                .find("}}")
                .ok_or_else(|| ParseError::at(text, i, "unclosed `{{`"))?;
            let inner = &rest[2..end];
            let m = EXPRESSION.captures(inner).ok_or_else(|| {
                ParseError::at(text, i, format!("malformed expression `{{{{{inner}}}}}`"))
            })?;
            let filter = match m.get(2) {
                Some(name) => Some(FilterCall {
                    name: name.as_str().to_string(),
                    args: parse_args(m.get(3).map_or("", |a| a.as_str()))
                        .map_err(|why| ParseError::at(text, i, why))?,
                }),
                None => None,
            };
            flush(&mut segments, literal_start, i);
            segments.push(Segment::Expression {
                variable: m[1].to_string(),
                filter,
                raw: rest[..end + 2].to_string(),
                offset: i,
            });
            i += end + 2;
            literal_start = i;
            continue;
        }
        i += rest.chars().next().map_or(1, char::len_utf8);
    }
    flush(&mut segments, literal_start, text.len());
    Ok(Template {
        source: text.to_string(),
        segments,
    })
}
