//! Chat-completion transport over HTTP.

use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use super::{Backend, GatewayError, PromptRequest, RawCompletion, TransportError};

#[derive(Debug)]
pub struct HttpBackend {
    agent: Agent,
    endpoint: String,
    model: String,
    api_key: String,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key: String, timeout_ms: u64) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
        }
    }

    pub fn request_body(model: &str, req: &PromptRequest) -> Value {
        let mut messages = Vec::new();
        if !req.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": req.system_text}));
        }
        messages.push(json!({"role": "user", "content": req.user_text}));
        json!({
            "model": model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        })
    }

    pub fn parse_response(body: &str) -> Result<RawCompletion, GatewayError> {
        let v: Value = serde_json::from_str(body)
            .map_err(|e| GatewayError::ProtocolError(format!("response is not JSON: {e}")))?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| {
                GatewayError::ProtocolError("missing choices[0].message.content".into())
            })?;
        let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64);
        Ok(RawCompletion {
            text: text.to_string(),
            prompt_tokens: usage("prompt_tokens"),
            completion_tokens: usage("completion_tokens"),
            rule: None,
        })
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn send(&self, req: &PromptRequest) -> Result<RawCompletion, TransportError> {
        let body = Self::request_body(&self.model, req);
        let resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Err(TransportError::Retryable(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        match status {
            200..=299 => Self::parse_response(&text).map_err(TransportError::Fatal),
            429 | 500..=599 => Err(TransportError::Retryable(format!("HTTP {status}"))),
            401 | 403 => Err(TransportError::Fatal(GatewayError::ProtocolError(format!(
                "HTTP {status}: authorization rejected"
            )))),
            _ => Err(TransportError::Fatal(GatewayError::ProtocolError(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            )))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let req = PromptRequest::new("be brief", "hello", 0.0, 64, "distill").unwrap();
        let body = HttpBackend::request_body("m1", &req);
        assert_eq!(
            body,
            json!({
                "model": "m1",
                "messages": [{"role": "system", "content": "be brief"}, {"role": "user", "content": "hello"}],
                "temperature": 0.0,
                "max_tokens": 64
            })
        );
    }

    #[test]
    fn response_parsing() {
        let ok = HttpBackend::parse_response(
            r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#,
        )
        .unwrap();
        assert_eq!(ok.text, "hi");
        assert_eq!((ok.prompt_tokens, ok.completion_tokens), (Some(3), Some(1)));
        assert!(matches!(
            HttpBackend::parse_response(r#"{"choices":[]}"#),
            Err(GatewayError::ProtocolError(_))
        ));
        assert!(matches!(
            HttpBackend::parse_response("<html>"),
            Err(GatewayError::ProtocolError(_))
        ));
    }
}
