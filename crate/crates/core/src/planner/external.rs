//! HTTP planner adapter.
//!
//! Request: `POST {"prompt": ..., "task": ...}`. Response:
//! `{"actions": [{"kind": ..., "args": {...}}], "rationale": ...}`. An
//! action may name its `actor`; if it does, it must be the requesting agent.

use std::time::Duration;

use serde_json::{json, Value};

use super::{situation, Plan, PlanError, PlanRequest, Planner};
use crate::actions::Action;
use crate::nest::SimTree;
use crate::world::AgentId;

#[derive(Debug, Clone)]
pub struct ExternalPlanner {
    pub endpoint: String,
    pub timeout: Duration,
}

impl ExternalPlanner {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
        }
    }

    fn call(&self, req: &PlanRequest) -> Result<String, PlanError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let body = json!({"prompt": req.prompt, "task": req.task}).to_string();
        let mut resp = agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(body.as_str())
            .map_err(|e| PlanError::ServiceUnreachable(format!("{}: {e}", self.endpoint)))?;
        resp.body_mut()
            .read_to_string()
            .map_err(|e| PlanError::MalformedPlan(format!("unreadable response body: {e}")))
    }
}

/// Validates a service response into a plan for `actor`.
pub fn parse_plan_response(text: &str, actor: &AgentId) -> Result<Plan, PlanError> {
    let bad = |why: String| PlanError::MalformedPlan(why);
    let v: Value = serde_json::from_str(text).map_err(|e| bad(format!("not JSON: {e}")))?;
    let list = v
        .get("actions")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `actions` list".into()))?;
    let mut actions = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let mut obj = item
            .as_object()
            .cloned()
            .ok_or_else(|| bad(format!("action {i} is not an object")))?;
        match obj.get("actor") {
            None => {
                obj.insert("actor".into(), json!(actor));
            }
            Some(Value::String(a)) if a == actor.as_str() => {}
            Some(other) => {
                return Err(bad(format!(
                    "action {i} is for {other}, but the plan is for `{actor}`"
                )))
            }
        }
        if !obj.contains_key("args") {
            obj.insert("args".into(), json!({}));
        }
        let action: Action = serde_json::from_value(Value::Object(obj))
            .map_err(|e| bad(format!("action {i}: {e}")))?;
        action
            .validate()
            .map_err(|e| bad(format!("action {i}: {e}")))?;
        actions.push(action);
    }
    let rationale = match v.get("rationale") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(bad("`rationale` must be text".into())),
    };
    Ok(Plan { actions, rationale })
}

impl Planner for ExternalPlanner {
    fn plan(&self, tree: &SimTree, req: &PlanRequest) -> Result<Plan, PlanError> {
        situation(tree, req)?;
        let text = self.call(req)?;
        let plan = parse_plan_response(&text, &req.agent)?;
        debug_assert!(plan.actions.iter().all(|a| a.actor == req.agent));
        Ok(plan)
    }
}
