//! Remote decision oracle over HTTP.
//!
//! Each query POSTs a JSON body to the configured URL:
//!
//! ```json
//! {"shape": [h, w, c], "values": [0.1, 0.9, ...]}
//! ```
//!
//! and expects `{"label": <integer>}` back. Values are f32 precision. With
//! [`HttpOracleConfig::base64_values`] the body instead carries
//! `"values_b64"`, the little-endian f32 bytes base64-encoded, which keeps
//! large points compact. Connection-level failures are retried; malformed
//! responses are protocol errors and fail immediately.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::oracle::{check_shape, DecisionOracle, OracleError};
use crate::point::{Domain, Label, Point};

#[derive(Clone, Debug)]
pub struct HttpOracleConfig {
    pub timeout: Duration,
    /// Extra attempts after a transport failure (total tries = retries + 1).
    pub retries: u32,
    /// Send values as base64-packed little-endian f32 bytes.
    pub base64_values: bool,
}

impl Default for HttpOracleConfig {
    fn default() -> Self {
        HttpOracleConfig {
            timeout: Duration::from_secs(10),
            retries: 2,
            base64_values: false,
        }
    }
}

#[derive(Serialize)]
struct PlainRequest<'a> {
    shape: [usize; 3],
    values: &'a [f32],
}

#[derive(Serialize)]
struct PackedRequest {
    shape: [usize; 3],
    values_b64: String,
}

#[derive(Deserialize)]
struct LabelResponse {
    label: i64,
}

/// Client for the JSON label protocol above.
pub struct HttpOracle {
    url: String,
    domain: Domain,
    config: HttpOracleConfig,
    client: reqwest::blocking::Client,
}

impl HttpOracle {
    pub fn new(url: String, domain: Domain, config: HttpOracleConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .expect("http client builds");
        HttpOracle {
            url,
            domain,
            config,
            client,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn body(&self, point: &Point) -> String {
        let shape = [
            point.shape.height,
            point.shape.width,
            point.shape.channels,
        ];
        let values: Vec<f32> = point.values.iter().map(|&v| v as f32).collect();
        if self.config.base64_values {
            let mut bytes = Vec::with_capacity(values.len() * 4);
            for v in &values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let req = PackedRequest {
                shape,
                values_b64: BASE64.encode(bytes),
            };
            serde_json::to_string(&req).expect("request serializes")
        } else {
            let req = PlainRequest {
                shape,
                values: &values,
            };
            serde_json::to_string(&req).expect("request serializes")
        }
    }

    fn attempt(&self, body: &str) -> Result<Label, OracleError> {
        let response = self
            .client
            .post(&self.url)
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(OracleError::Protocol(format!(
                "server returned {status}: {}",
                text.chars().take(200).collect::<String>()
            )));
        }
        let parsed: LabelResponse = serde_json::from_str(&text).map_err(|e| {
            OracleError::Protocol(format!(
                "bad response body ({e}): {}",
                text.chars().take(200).collect::<String>()
            ))
        })?;
        Ok(Label(parsed.label))
    }
}

impl DecisionOracle for HttpOracle {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn classify(&self, point: &Point) -> Result<Label, OracleError> {
        check_shape(self.domain.shape, point)?;
        let body = self.body(point);
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            match self.attempt(&body) {
                Ok(label) => return Ok(label),
                Err(OracleError::Transport(msg)) => last = msg,
                Err(other) => return Err(other),
            }
        }
        Err(OracleError::RetriesExhausted { attempts, last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Shape;

    #[test]
    fn plain_body_carries_shape_and_values() {
        let domain = Domain::unit(Shape::new(1, 2, 1));
        let oracle = HttpOracle::new(
            "http://127.0.0.1:1/label".into(),
            domain,
            HttpOracleConfig::default(),
        );
        let body = oracle.body(&Point::new(Shape::new(1, 2, 1), vec![0.25, 1.0]));
        let parsed: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(parsed["shape"], serde_json::json!([1, 2, 1]));
        assert_eq!(parsed["values"], serde_json::json!([0.25, 1.0]));
    }

    #[test]
    fn base64_body_packs_le_f32() {
        let domain = Domain::unit(Shape::new(1, 2, 1));
        let oracle = HttpOracle::new(
            "http://127.0.0.1:1/label".into(),
            domain,
            HttpOracleConfig {
                base64_values: true,
                ..HttpOracleConfig::default()
            },
        );
        let body = oracle.body(&Point::new(Shape::new(1, 2, 1), vec![1.0, -2.0]));
        let parsed: serde_json::Value = serde_json::from_str(&body).unwrap();
        let packed = parsed["values_b64"].as_str().unwrap();
        let bytes = BASE64.decode(packed).unwrap();
        assert_eq!(bytes.len(), 8);
        assert_eq!(f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]), 1.0);
        assert_eq!(f32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]), -2.0);
    }

    #[test]
    fn unreachable_server_exhausts_retries() {
        let domain = Domain::unit(Shape::flat(2));
        let oracle = HttpOracle::new(
            // Port 1 is never listening.
            "http://127.0.0.1:1/label".into(),
            domain,
            HttpOracleConfig {
                retries: 1,
                timeout: Duration::from_millis(200),
                ..HttpOracleConfig::default()
            },
        );
        match oracle.classify(&Point::flat(vec![0.1, 0.2])) {
            Err(OracleError::RetriesExhausted { attempts, .. }) => assert_eq!(attempts, 2),
            other => panic!("expected RetriesExhausted, got {other:?}"),
        }
    }
}
