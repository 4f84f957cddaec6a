//! Chat-completions backend with a forced tool call.

use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{Backend, BackendKind, ChatRequest, ChatResponse, RepairError, TokenUsage, TOOL_NAME};

pub const API_KEY_ENV: &str = "DRIVE_REPAIR_API_KEY";

/// Rasterizes an SVG document to PNG bytes.
pub fn png_from_svg(svg: &str) -> Result<Vec<u8>, RepairError> {
    let mut opt = resvg::usvg::Options::default();
    opt.fontdb_mut().load_system_fonts();
    let tree = resvg::usvg::Tree::from_str(svg, &opt)
        .map_err(|e| RepairError::Backend(format!("svg parse: {e}")))?;
    let size = tree.size().to_int_size();
    let mut pixmap = resvg::tiny_skia::Pixmap::new(size.width(), size.height())
        .ok_or_else(|| RepairError::Backend("empty image".into()))?;
    resvg::render(&tree, resvg::tiny_skia::Transform::default(), &mut pixmap.as_mut());
    pixmap
        .encode_png()
        .map_err(|e| RepairError::Backend(format!("png encode: {e}")))
}

pub struct LiveBackend {
    client: reqwest::blocking::Client,
    api_key: String,
}

impl LiveBackend {
    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env() -> Result<Self, RepairError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| RepairError::Config(format!("{API_KEY_ENV} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(180))
            .build()
            .map_err(|e| RepairError::Backend(e.to_string()))?;
        Ok(LiveBackend { client, api_key })
    }

    /// Request body in chat-completions form.
    pub fn request_body(req: &ChatRequest<'_>) -> Result<Value, RepairError> {
        let mut content = Vec::new();
        for svg in &req.bundle.images {
            let png = png_from_svg(svg)?;
            let b64 = base64::engine::general_purpose::STANDARD.encode(png);
            content.push(json!({
                "type": "image_url",
                "image_url": { "url": format!("data:image/png;base64,{b64}") },
            }));
        }
        content.push(json!({ "type": "text", "text": req.bundle.text() }));
        let mut messages = vec![json!({ "role": "user", "content": content })];
        for c in req.corrections {
            messages.push(json!({
                "role": "assistant",
                "content": null,
                "tool_calls": [{
                    "id": c.call_id,
                    "type": "function",
                    "function": { "name": TOOL_NAME, "arguments": c.arguments },
                }],
            }));
            messages.push(json!({
                "role": "tool",
                "tool_call_id": c.call_id,
                "content": c.message(),
            }));
        }
        Ok(json!({
            "model": req.config.model,
            "temperature": req.config.temperature,
            "seed": req.seed,
            "messages": messages,
            "tools": [{
                "type": "function",
                "function": {
                    "name": TOOL_NAME,
                    "description": "Submit a program of driving-strategy rules that prevents the violation shown.",
                    "parameters": req.tool_schema,
                },
            }],
            "tool_choice": { "type": "function", "function": { "name": TOOL_NAME } },
        }))
    }

    /// Extracts the tool call and usage from a chat-completions response body.
    pub fn parse_response(body: &Value) -> Result<ChatResponse, RepairError> {
        let call = body
            .pointer("/choices/0/message/tool_calls/0")
            .ok_or_else(|| RepairError::Backend("response has no tool call".into()))?;
        let arguments = call
            .pointer("/function/arguments")
            .and_then(Value::as_str)
            .ok_or_else(|| RepairError::Backend("tool call has no arguments".into()))?
            .to_string();
        let call_id = call
            .get("id")
            .and_then(Value::as_str)
            .unwrap_or("call_0")
            .to_string();
        let tokens = |k: &str| body.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0);
        Ok(ChatResponse {
            call_id,
            arguments,
            usage: TokenUsage {
                input: tokens("prompt_tokens"),
                output: tokens("completion_tokens"),
            },
        })
    }
}

impl Backend for LiveBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn complete(&self, req: &ChatRequest<'_>) -> Result<ChatResponse, RepairError> {
        let body = LiveBackend::request_body(req)?;
        let resp = self
            .client
            .post(&req.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| RepairError::Backend(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| RepairError::Backend(e.to_string()))?;
        if !status.is_success() {
            return Err(RepairError::Backend(format!("HTTP {status}: {text}")));
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| RepairError::Backend(e.to_string()))?;
        LiveBackend::parse_response(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tool_call_response() {
        let body = json!({
            "choices": [{"message": {"tool_calls": [{"id": "call_7", "type": "function",
                "function": {"name": TOOL_NAME, "arguments": "{\"rules\":[]}"}}]}}],
            "usage": {"prompt_tokens": 7352, "completion_tokens": 179},
        });
        let r = LiveBackend::parse_response(&body).unwrap();
        assert_eq!(r.call_id, "call_7");
        assert_eq!(r.arguments, "{\"rules\":[]}");
        assert_eq!(r.usage, TokenUsage { input: 7352, output: 179 });
        assert!(LiveBackend::parse_response(&json!({"choices": []})).is_err());
    }

    #[test]
    fn rasterizes_svg() {
        let svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"4\" height=\"3\"><rect width=\"4\" height=\"3\" fill=\"#ff0000\"/></svg>";
        let png = png_from_svg(svg).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }
}
