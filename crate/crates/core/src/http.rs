//! JSON-over-HTTP transport shared by the chat gateway and the scorer
//! services, with capped exponential backoff and an in-flight limit.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

impl HttpReply {
    pub fn ok(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: body.into(),
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    fn is_retryable(&self) -> bool {
        self.status == 429 || (500..600).contains(&self.status)
    }
}

/// A connection-level failure (no HTTP status was received).
#[derive(Debug, Clone, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpReply, TransportError>;
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("request to {url} failed after {attempts} attempts: {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("request to {url} returned status {status}: {body}")]
    Status { url: String, status: u16, body: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, including the first one.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay after the failed attempt with 0-based number `attempt`.
    pub fn delay_for(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX);
        self.base_delay
            .checked_mul(factor)
            .unwrap_or(self.max_delay)
            .min(self.max_delay)
    }

    /// POSTs `body`, retrying connection failures, 429 and 5xx replies.
    pub fn post(
        &self,
        transport: &dyn Transport,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpReply, HttpError> {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            let last = attempt + 1 == attempts;
            match transport.post_json(url, headers, body) {
                Ok(reply) if reply.is_success() => return Ok(reply),
                Ok(reply) if reply.is_retryable() && !last => {
                    log::warn!("{url}: status {}, retrying", reply.status);
                }
                Ok(reply) => {
                    return Err(HttpError::Status {
                        url: url.to_string(),
                        status: reply.status,
                        body: reply.body,
                    })
                }
                Err(e) if last => {
                    return Err(HttpError::Transport {
                        url: url.to_string(),
                        attempts,
                        message: e.0,
                    })
                }
                Err(e) => log::warn!("{url}: {e}, retrying"),
            }
            std::thread::sleep(self.delay_for(attempt));
            attempt += 1;
        }
    }
}

/// Blocking HTTP transport.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpReply, TransportError> {
        let payload = serde_json::to_vec(body).map_err(|e| TransportError(e.to_string()))?;
        let mut request = self
            .client
            .post(url)
            .header("content-type", "application/json")
            .body(payload);
        for (name, value) in headers {
            request = request.header(name.as_str(), value.as_str());
        }
        let response = request.send().map_err(|e| TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// Refuses every request. Used where no network access is allowed.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn post_json(&self, url: &str, _: &[(String, String)], _: &Value) -> Result<HttpReply, TransportError> {
        Err(TransportError(format!("network access disabled (request to {url})")))
    }
}

/// Counting semaphore capping concurrent requests.
pub struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    owner: &'a Semaphore,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit { owner: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self
            .owner
            .available
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.owner.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;

    struct Scripted {
        replies: Mutex<Vec<Result<HttpReply, TransportError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<HttpReply, TransportError>>) -> Self {
            replies.reverse();
            Self {
                replies: Mutex::new(replies),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, _: &str, _: &[(String, String)], _: &Value) -> Result<HttpReply, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies
                .lock()
                .unwrap()
                .pop()
                .unwrap_or_else(|| Err(TransportError("down".into())))
        }
    }

    fn fast(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    #[test]
    fn backoff_is_exponential_and_capped() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(1000),
        };
        let delays: Vec<u128> = (0..6).map(|a| p.delay_for(a).as_millis()).collect();
        assert_eq!(delays, vec![100, 200, 400, 800, 1000, 1000]);
        assert_eq!(p.delay_for(200), Duration::from_millis(1000));
    }

    #[test]
    fn persistent_failure_uses_every_attempt() {
        let t = Scripted::new(vec![]);
        let err = fast(5).post(&t, "http://x", &[], &Value::Null).unwrap_err();
        assert_eq!(t.calls.load(Ordering::SeqCst), 5);
        assert!(matches!(err, HttpError::Transport { attempts: 5, .. }));
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let t = Scripted::new(vec![
            Ok(HttpReply { status: 503, body: "busy".into() }),
            Ok(HttpReply { status: 429, body: "slow down".into() }),
            Ok(HttpReply::ok("{}")),
        ]);
        let reply = fast(5).post(&t, "http://x", &[], &Value::Null).unwrap();
        assert_eq!(reply.body, "{}");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried_and_keep_body() {
        let t = Scripted::new(vec![Ok(HttpReply {
            status: 400,
            body: "bad model".into(),
        })]);
        let err = fast(5).post(&t, "http://x", &[], &Value::Null).unwrap_err();
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
        match err {
            HttpError::Status { status, body, .. } => {
                assert_eq!(status, 400);
                assert_eq!(body, "bad model");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn last_retryable_status_is_reported() {
        let t = Scripted::new(vec![
            Ok(HttpReply { status: 500, body: "a".into() }),
            Ok(HttpReply { status: 500, body: "b".into() }),
        ]);
        let err = fast(2).post(&t, "http://x", &[], &Value::Null).unwrap_err();
        assert!(matches!(err, HttpError::Status { status: 500, ref body, .. } if body == "b"));
    }

    #[test]
    fn semaphore_caps_concurrency() {
        let sem = Arc::new(Semaphore::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (sem, active, peak) = (sem.clone(), active.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _permit = sem.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    active.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
