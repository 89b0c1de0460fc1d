//! Blocking HTTP client for the `/v1` adapter protocol.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::adapter::{
    Adapter, AdapterEndpoint, GenerateRequest, HealthResponse, ParaphraseRequest, SynthError,
    TextResponse, TranslateRequest,
};

/// Counting semaphore bounding in-flight requests to one endpoint.
struct InFlight {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            available: Mutex::new(limit.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

enum Failure {
    /// Connection problems, timeouts and 5xx responses.
    Retryable(String),
    Fatal(String),
}

pub struct HttpAdapter {
    endpoint: AdapterEndpoint,
    agent: ureq::Agent,
    in_flight: InFlight,
    backoff_base: Duration,
}

impl HttpAdapter {
    pub fn new(endpoint: AdapterEndpoint) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .http_status_as_error(false)
            .build();
        Self {
            in_flight: InFlight::new(endpoint.max_in_flight),
            agent: ureq::Agent::new_with_config(config),
            backoff_base: Duration::from_millis(200),
            endpoint,
        }
    }

    /// Override the first retry delay (doubled on every further retry).
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    fn url(&self, path: &str) -> String {
        format!("{}/v1/{path}", self.endpoint.base_url.trim_end_matches('/'))
    }

    fn transport(&self, message: String) -> SynthError {
        SynthError::Transport {
            endpoint: self.endpoint.id.clone(),
            leg: None,
            message,
        }
    }

    fn attempt<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: Option<&Req>,
    ) -> Result<Resp, Failure> {
        let url = self.url(path);
        let response = match body {
            Some(body) => self.agent.post(&url).send_json(body),
            None => self.agent.get(&url).call(),
        };
        let mut response = response.map_err(|e| Failure::Retryable(format!("{url}: {e}")))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Retryable(format!("{url}: reading body: {e}")))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| Failure::Fatal(format!("{url}: schema-invalid response body: {e}"))),
            500..=599 => Err(Failure::Retryable(format!("{url}: HTTP {status}: {text}"))),
            _ => Err(Failure::Fatal(format!("{url}: HTTP {status}: {text}"))),
        }
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: Option<&Req>,
    ) -> Result<Resp, SynthError> {
        let _permit = self.in_flight.acquire();
        let mut delay = self.backoff_base;
        let mut attempt = 0;
        loop {
            match self.attempt(path, body) {
                Ok(resp) => return Ok(resp),
                Err(Failure::Fatal(msg)) => return Err(self.transport(msg)),
                Err(Failure::Retryable(msg)) => {
                    if attempt >= self.endpoint.max_retries {
                        return Err(self.transport(msg));
                    }
                    log::debug!("retrying {} after {delay:?}: {msg}", self.endpoint.id);
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }
}

impl Adapter for HttpAdapter {
    fn generate(&self, request: &GenerateRequest) -> Result<TextResponse, SynthError> {
        self.call("generate", Some(request))
    }

    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<TextResponse, SynthError> {
        self.call("paraphrase", Some(request))
    }

    fn translate(&self, request: &TranslateRequest) -> Result<TextResponse, SynthError> {
        self.call("translate", Some(request))
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        let health: HealthResponse = self.call::<(), _>("health", None)?;
        if health.status != "ok" {
            return Err(self.transport(format!("health status {:?}", health.status)));
        }
        Ok(health)
    }

    fn unsupported(&self, operation: &'static str) -> SynthError {
        SynthError::Unsupported {
            endpoint: self.endpoint.id.clone(),
            operation,
        }
    }
}
