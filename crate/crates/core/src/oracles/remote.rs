//! HTTP client for oracles hosted behind the `/classify` wire protocol.
//!
//! `POST /classify` with `{"sample": [...], "shape": [h, w, c]}` answers
//! `{"label": k}` with status 200, or status 400 on a shape mismatch.
//! `GET /health` answers `{"status": "ok", "shape": [h, w, c], "classes": K}`.
//! Full reference: `docs/protocol.md`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ureq::Agent;

use super::{check_input, Oracle};
use crate::domain::{Sample, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub sample: Vec<f64>,
    pub shape: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub shape: [usize; 3],
    pub classes: usize,
}

/// Oracle backed by a remote server. One agent (and its keep-alive
/// connection) per instance; build one instance per attack run.
pub struct RemoteOracle {
    agent: Agent,
    endpoint: String,
    shape: Shape,
    num_classes: usize,
}

impl std::fmt::Debug for RemoteOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteOracle")
            .field("endpoint", &self.endpoint)
            .field("shape", &self.shape)
            .field("num_classes", &self.num_classes)
            .finish()
    }
}

fn make_agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

impl RemoteOracle {
    pub fn new(endpoint: &str, timeout: Duration, shape: Shape, num_classes: usize) -> Self {
        Self {
            agent: make_agent(timeout),
            endpoint: endpoint.trim_end_matches('/').to_string(),
            shape,
            num_classes,
        }
    }

    /// Learns shape and class count from `GET /health`.
    pub fn discover(endpoint: &str, timeout: Duration) -> Result<Self> {
        let agent = make_agent(timeout);
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let mut resp = agent
            .get(format!("{endpoint}/health"))
            .call()
            .map_err(|e| Error::Transport(e.to_string()))?;
        if resp.status() != 200 {
            return Err(Error::ProtocolViolation(format!(
                "health check returned status {}",
                resp.status()
            )));
        }
        let health: HealthResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::ProtocolViolation(format!("bad health body: {e}")))?;
        if health.classes == 0 {
            return Err(Error::ProtocolViolation("server declares zero classes".into()));
        }
        let [h, w, c] = health.shape;
        Ok(Self {
            agent,
            endpoint,
            shape: Shape::new(h, w, c),
            num_classes: health.classes,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Oracle for RemoteOracle {
    fn classify(&self, x: &Sample) -> Result<usize> {
        check_input(self.shape, x)?;
        let s = x.shape();
        let body = ClassifyRequest {
            sample: x.values().to_vec(),
            shape: [s.height, s.width, s.channels],
        };
        let mut resp = self
            .agent
            .post(format!("{}/classify", self.endpoint))
            .send_json(&body)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(e.to_string()))?;
        if status != 200 {
            return Err(Error::ProtocolViolation(format!(
                "classify returned status {status}: {text}"
            )));
        }
        parse_label(&text, self.num_classes)
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_shape(&self) -> Shape {
        self.shape
    }
}

fn parse_label(text: &str, num_classes: usize) -> Result<usize> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::ProtocolViolation(format!("response is not JSON: {e}")))?;
    let label = value
        .get("label")
        .ok_or_else(|| Error::ProtocolViolation("response has no label".into()))?
        .as_u64()
        .ok_or_else(|| Error::ProtocolViolation(format!("label is not a class index: {value}")))?;
    let label = usize::try_from(label)
        .ok()
        .filter(|&l| l < num_classes)
        .ok_or_else(|| {
            Error::ProtocolViolation(format!("label {label} out of range for {num_classes} classes"))
        })?;
    Ok(label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_parsing() {
        assert_eq!(parse_label(r#"{"label": 3}"#, 10).unwrap(), 3);
        for bad in [r#"{"label": -1}"#, r#"{"label": 1.5}"#, r#"{"lbl": 1}"#, "{", r#"{"label": 10}"#] {
            assert!(
                matches!(parse_label(bad, 10), Err(Error::ProtocolViolation(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn request_wire_format() {
        let req = ClassifyRequest {
            sample: vec![0.5, 0.25],
            shape: [1, 2, 1],
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"sample":[0.5,0.25],"shape":[1,2,1]}"#
        );
    }

    #[test]
    fn refused_connection_is_transport_error() {
        // port 9 on localhost is almost never served
        let oracle = RemoteOracle::new("http://127.0.0.1:9", Duration::from_millis(500), Shape::new(1, 1, 1), 2);
        let x = Sample::filled(Shape::new(1, 1, 1), 0.0).unwrap();
        assert!(matches!(oracle.classify(&x), Err(Error::Transport(_))));
    }
}
