//! Prompt rendering: templates with `$$NAME$$` placeholders and
//! `{{ var | filter(args) }}` expressions, evaluated against a belief
//! state in some node of the tree.

mod filters;
mod template;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use filters::DEFAULT_BLOCK_TYPES;
pub use template::{parse_template, FilterCall, ParseError, Segment, Template};

use crate::belief::BeliefState;
use crate::nest::{SimNode, SimTree};
use crate::timeline::{BranchId, BranchRef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("cannot resolve `{reference}`: {reason}")]
    UnresolvedBranch { reference: String, reason: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown filter `{0}`")]
    UnknownFilter(String),
    #[error("filter `{filter}` needs a branch reference, but `{variable}` is text")]
    NotABranch { variable: String, filter: String },
    #[error("filter `{filter}`: {reason}")]
    BadArguments { filter: String, reason: String },
}

/// What a filter sees: one agent's belief inside one node and branch.
pub struct FilterView<'a> {
    pub node: &'a SimNode,
    pub branch: &'a BranchId,
    pub belief: &'a BeliefState,
}

type BuiltinFilter = fn(&FilterView, &[String]) -> Result<String, RenderError>;

pub type FilterFn =
    Arc<dyn Fn(&FilterView, &[String]) -> Result<String, RenderError> + Send + Sync>;

/// Named filters. Starts with the built-ins; names are unique.
#[derive(Clone)]
pub struct FilterRegistry {
    filters: BTreeMap<String, FilterFn>,
}

impl std::fmt::Debug for FilterRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.filters.keys()).finish()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("a filter named `{0}` is already registered")]
pub struct DuplicateFilter(pub String);

impl Default for FilterRegistry {
    fn default() -> Self {
        let mut r = Self {
            filters: BTreeMap::new(),
        };
        let builtins: [(&str, BuiltinFilter); 8] = [
            ("thought", filters::thought),
            ("chat_log", filters::chat_log),
            ("position", filters::position),
            ("chests", filters::chests),
            ("inventory", filters::inventory),
            ("other_players", filters::other_players),
            ("blocks", filters::blocks),
            ("events_and_visibilities", filters::events_and_visibilities),
        ];
        for (name, f) in builtins {
            r.filters.insert(name.to_string(), Arc::new(f));
        }
        r
    }
}

impl FilterRegistry {
    pub fn register(&mut self, name: &str, f: FilterFn) -> Result<(), DuplicateFilter> {
        if self.filters.contains_key(name) {
            return Err(DuplicateFilter(name.to_string()));
        }
        self.filters.insert(name.to_string(), f);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.filters.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&FilterFn> {
        self.filters.get(name)
    }

    /// Rejects templates that use unregistered filters.
    pub fn check(&self, t: &Template) -> Result<(), ParseError> {
        for (call, offset) in t.filter_calls() {
            if !self.filters.contains_key(&call.name) {
                return Err(ParseError::at(
                    &t.source,
                    offset,
                    format!("unknown filter `{}`", call.name),
                ));
            }
        }
        Ok(())
    }

    /// Parses and checks in one go.
    pub fn compile(&self, text: &str) -> Result<Template, ParseError> {
        let t = parse_template(text)?;
        self.check(&t)?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Text(String),
    Branch(BranchRef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub bindings: BTreeMap<String, Binding>,
    pub placeholders: BTreeMap<String, String>,
}

pub const PLACEHOLDER_DEFAULTS: [(&str, &str); 2] = [
    ("LAST_CODE", "No code was executed"),
    ("LAST_ERROR", "No error"),
];

impl Default for PromptContext {
    fn default() -> Self {
        Self {
            bindings: BTreeMap::new(),
            placeholders: PLACEHOLDER_DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl PromptContext {
    /// Binds `branch` and `task`, the two variables the stock template uses.
    pub fn for_branch(branch: BranchRef, task: &str) -> Self {
        let mut ctx = Self::default();
        ctx.bindings
            .insert("branch".into(), Binding::Branch(branch));
        ctx.bindings
            .insert("task".into(), Binding::Text(task.into()));
        ctx
    }

    pub fn set_placeholder(&mut self, name: &str, value: &str) {
        self.placeholders.insert(name.into(), value.into());
    }
}

fn resolve<'a>(tree: &'a SimTree, r: &'a BranchRef) -> Result<FilterView<'a>, RenderError> {
    let fail = |reason: String| RenderError::UnresolvedBranch {
        reference: r.to_string(),
        reason,
    };
    let node = tree
        .node(&r.path)
        .ok_or_else(|| fail(format!("no simulator at {}", r.path)))?;
    let situation = node
        .situation_of(r.branch.as_str())
        .ok_or_else(|| fail(format!("no branch `{}`", r.branch)))?;
    let owner = r
        .owner()
        .ok_or_else(|| fail("the root needs an explicit `@agent` owner".into()))?;
    let belief = situation
        .beliefs
        .get(owner)
        .ok_or_else(|| fail(format!("no agent `{owner}` in that simulator")))?;
    Ok(FilterView {
        node,
        branch: &r.branch,
        belief,
    })
}

/// Checks that every branch binding resolves, without rendering.
pub fn resolve_bindings(ctx: &PromptContext, tree: &SimTree) -> Result<(), RenderError> {
    for b in ctx.bindings.values() {
        if let Binding::Branch(r) = b {
            resolve(tree, r)?;
        }
    }
    Ok(())
}

pub fn render(
    t: &Template,
    ctx: &PromptContext,
    tree: &SimTree,
    registry: &FilterRegistry,
) -> Result<String, RenderError> {
    let mut out = String::with_capacity(t.source.len() * 2);
    for seg in &t.segments {
        match seg {
            Segment::Literal(text) => out.push_str(text),
            Segment::Placeholder { name, .. } => out.push_str(
                ctx.placeholders
                    .get(name)
                    .ok_or_else(|| RenderError::UnboundVariable(format!("$${name}$$")))?,
            ),
            Segment::Expression {
                variable, filter, ..
            } => {
                let binding = ctx
                    .bindings
                    .get(variable)
                    .ok_or_else(|| RenderError::UnboundVariable(variable.clone()))?;
                match (binding, filter) {
                    (Binding::Text(text), None) => out.push_str(text),
                    (Binding::Branch(r), None) => out.push_str(&r.to_string()),
                    (Binding::Text(_), Some(call)) => {
                        return Err(RenderError::NotABranch {
                            variable: variable.clone(),
                            filter: call.name.clone(),
                        })
                    }
                    (Binding::Branch(r), Some(call)) => {
                        let f = registry
                            .get(&call.name)
                            .ok_or_else(|| RenderError::UnknownFilter(call.name.clone()))?;
                        out.push_str(&f(&resolve(tree, r)?, &call.args)?);
                    }
                }
            }
        }
    }
    Ok(out)
}
