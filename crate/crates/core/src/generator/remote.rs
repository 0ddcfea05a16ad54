//! Client for external generators speaking the JSON-in / PNG-out protocol.
//!
//! ```text
//! POST {endpoint}/generate
//! { "latent": [f64...], "class_mix": {"id": f64...} | null,
//!   "width": u32, "height": u32, "truncation": f64 | null }
//! 200 -> image/png body
//! 4xx/5xx -> { "error": string }
//! ```
//!
//! One request per call, no automatic retries. In-flight requests are capped
//! per backend instance (one instance per endpoint).

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendDescriptor, BackendKind, GenerateError, Generator, RenderParams};
use crate::image::Image;
use crate::latent::Gene;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
const MAX_RESPONSE_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub latent: Vec<f64>,
    pub class_mix: Option<BTreeMap<String, f64>>,
    pub width: u32,
    pub height: u32,
    pub truncation: Option<f64>,
}

#[derive(Deserialize)]
struct RemoteErrorBody {
    error: String,
}

pub struct RemoteBackend {
    descriptor: BackendDescriptor,
    url: String,
    agent: ureq::Agent,
    gate: InFlight,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("descriptor", &self.descriptor)
            .field("max_in_flight", &self.gate.max)
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, GenerateError> {
        Self::with_limits(descriptor, DEFAULT_TIMEOUT, DEFAULT_MAX_IN_FLIGHT)
    }

    pub fn with_limits(
        descriptor: BackendDescriptor,
        timeout: Duration,
        max_in_flight: usize,
    ) -> Result<Self, GenerateError> {
        descriptor.validate().map_err(GenerateError::BackendUnavailable)?;
        if descriptor.kind != BackendKind::Remote {
            return Err(GenerateError::BackendUnavailable(format!(
                "{:?} is not a remote backend",
                descriptor.backend_id
            )));
        }
        let endpoint = descriptor.endpoint.as_deref().unwrap_or_default();
        let url = format!("{}/generate", endpoint.trim_end_matches('/'));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            descriptor,
            url,
            agent,
            gate: InFlight::new(max_in_flight.max(1)),
        })
    }

    pub fn request_body(&self, gene: &Gene, params: &RenderParams) -> RemoteRequest {
        let class_mix = (self.descriptor.supports_class_mix && !gene.class_mix.is_empty())
            .then(|| gene.class_mix.iter().map(|(k, v)| (k.to_string(), v)).collect());
        RemoteRequest {
            latent: gene.latent.as_slice().to_vec(),
            class_mix,
            width: params.width,
            height: params.height,
            truncation: params.truncation,
        }
    }

    fn send(&self, body: &RemoteRequest) -> Result<Image, GenerateError> {
        let _permit = self.gate.acquire();
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send_json(body)
            .map_err(transport_error)?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(transport_error)?;
        if !(200..300).contains(&status) {
            let message = serde_json::from_slice::<RemoteErrorBody>(&bytes)
                .map(|b| b.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
            return Err(GenerateError::BackendRejected { status, message });
        }
        Image::decode_png(&bytes).map_err(|e| GenerateError::MalformedResponse(e.to_string()))
    }
}

fn transport_error(e: ureq::Error) -> GenerateError {
    use ureq::Error as E;
    match e {
        E::ConnectionFailed | E::HostNotFound | E::Timeout(_) | E::Io(_) => {
            GenerateError::BackendUnavailable(e.to_string())
        }
        other => GenerateError::MalformedResponse(other.to_string()),
    }
}

impl Generator for RemoteBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn generate(&self, gene: &Gene, params: &RenderParams) -> Result<Image, GenerateError> {
        params.validate()?;
        self.check_gene(gene)?;
        self.send(&self.request_body(gene, params))
    }
}

/// Counting gate bounding concurrent requests.
struct InFlight {
    max: usize,
    count: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(max: usize) -> Self {
        Self {
            max,
            count: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{ClassMixture, LatentVector};

    fn descriptor(class_mix: bool) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: "landscape".into(),
            kind: BackendKind::Remote,
            latent_dim: 2,
            supports_class_mix: class_mix,
            endpoint: Some("http://127.0.0.1:9/".into()),
        }
    }

    #[test]
    fn request_body_shape() {
        let backend = RemoteBackend::new(descriptor(true)).unwrap();
        assert_eq!(backend.url, "http://127.0.0.1:9/generate");
        let gene = Gene::new(
            LatentVector::new(vec![0.5, -1.0]).unwrap(),
            ClassMixture::single("valley"),
        );
        let params = RenderParams::square(64, "landscape").with_truncation(1.5);
        let json = serde_json::to_value(backend.request_body(&gene, &params)).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "latent": [0.5, -1.0],
                "class_mix": {"valley": 1.0},
                "width": 64, "height": 64, "truncation": 1.5
            })
        );
        let plain = RemoteBackend::new(descriptor(false)).unwrap();
        assert!(plain.request_body(&gene, &params).class_mix.is_none());
    }

    #[test]
    fn rejects_non_remote_descriptor() {
        let mut d = descriptor(false);
        d.kind = BackendKind::Procedural;
        assert!(RemoteBackend::new(d).is_err());
        let mut d = descriptor(false);
        d.endpoint = None;
        assert!(RemoteBackend::new(d).is_err());
    }

    #[test]
    fn gate_caps_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;
        let gate = Arc::new(InFlight::new(2));
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (gate, live, peak) = (gate.clone(), live.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = gate.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    live.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        handles.into_iter().for_each(|h| h.join().unwrap());
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
