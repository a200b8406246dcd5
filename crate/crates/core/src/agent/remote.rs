use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::backend::{BackendAdapter, BackendError, BackendRequest, Message, Reply, Speaker, ToolCall};

pub const ENV_URL: &str = "RANORCH_LLM_URL";
pub const ENV_MODEL: &str = "RANORCH_LLM_MODEL";
pub const ENV_API_KEY: &str = "RANORCH_LLM_API_KEY";

/// Chat-completions endpoint with function calling.
pub struct RemoteBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    temperature: f64,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self { url: url.into(), model: model.into(), api_key, agent, temperature: 0.0 }
    }

    /// Reads the endpoint, model and key from the environment.
    pub fn from_env(timeout: Duration) -> Result<Self, BackendError> {
        let url = std::env::var(ENV_URL).map_err(|_| BackendError::Unavailable(format!("{ENV_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into());
        Ok(Self::new(url, model, std::env::var(ENV_API_KEY).ok(), timeout))
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    fn wire_messages(messages: &[Message]) -> Vec<Value> {
        messages
            .iter()
            .map(|m| {
                // tool traffic is flattened to text so no call ids are needed
                let (role, content) = match m.role {
                    Speaker::System => ("system", m.content.clone()),
                    Speaker::User => ("user", m.content.clone()),
                    Speaker::Tool => ("user", format!("Tool results:\n{}", m.content)),
                    Speaker::Assistant if m.tool_calls.is_empty() => ("assistant", m.content.clone()),
                    Speaker::Assistant => ("assistant", format!("Called tools: {}", serde_json::to_string(&m.tool_calls).unwrap_or_default())),
                };
                json!({ "role": role, "content": content })
            })
            .collect()
    }
}

/// Pulls tool calls (or text) out of a chat-completions response body.
pub fn parse_completion(body: &Value) -> Result<Reply, BackendError> {
    let msg = body.pointer("/choices/0/message").ok_or_else(|| BackendError::Malformed("no choices[0].message".into()))?;
    if let Some(calls) = msg.get("tool_calls").and_then(Value::as_array).filter(|c| !c.is_empty()) {
        let mut out = Vec::with_capacity(calls.len());
        for c in calls {
            let f = c.get("function").ok_or_else(|| BackendError::Malformed("tool call without function".into()))?;
            let name = f.get("name").and_then(Value::as_str).ok_or_else(|| BackendError::Malformed("tool call without name".into()))?;
            // arguments arrive as a JSON string; a bad string becomes an
            // empty call that the tools reject
            let arguments = match f.get("arguments") {
                Some(Value::String(s)) => serde_json::from_str(s).unwrap_or(Value::Null),
                Some(v) => v.clone(),
                None => Value::Null,
            };
            out.push(ToolCall { name: name.to_owned(), arguments });
        }
        return Ok(Reply::ToolCalls(out));
    }
    Ok(Reply::Text(msg.get("content").and_then(Value::as_str).unwrap_or_default().to_owned()))
}

impl BackendAdapter for RemoteBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn complete(&mut self, request: &BackendRequest<'_>) -> Result<(Reply, Duration), BackendError> {
        let body = json!({
            "model": self.model,
            "messages": Self::wire_messages(request.messages),
            "tools": request.tools,
            "tool_choice": "auto",
            "temperature": self.temperature,
        });
        let started = Instant::now();
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = resp.status().as_u16();
        let value: Value = resp.body_mut().read_json().map_err(|e| BackendError::Malformed(e.to_string()))?;
        if status >= 400 {
            return Err(BackendError::Unavailable(format!("HTTP {status}: {value}")));
        }
        Ok((parse_completion(&value)?, started.elapsed()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tool_calls_and_text() {
        let body = json!({"choices": [{"message": {"tool_calls": [
            {"id": "a", "type": "function", "function": {"name": "set_parameter", "arguments": "{\"name\":\"ru\",\"value\":\"foxconn\"}"}},
            {"id": "b", "type": "function", "function": {"name": "validate", "arguments": "{}"}}
        ]}}]});
        let Reply::ToolCalls(calls) = parse_completion(&body).unwrap() else { panic!() };
        assert_eq!(calls[0], ToolCall::set("ru", json!("foxconn")));
        assert_eq!(calls[1].name, "validate");
        let text = json!({"choices": [{"message": {"content": "hello"}}]});
        assert_eq!(parse_completion(&text).unwrap(), Reply::Text("hello".into()));
        assert!(parse_completion(&json!({})).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let mut b = RemoteBackend::new("http://127.0.0.1:9/v1/chat/completions", "m", None, Duration::from_millis(300));
        let tools = json!([]);
        let r = b.complete(&BackendRequest { messages: &[], tools: &tools, last_report: None });
        assert!(matches!(r, Err(BackendError::Unavailable(_))));
    }
}
