//! Acceptance suite. Runs every criterion at latent dimension 128 with 64x64
//! images on the procedural backend, prints one PASS/FAIL line each, and
//! exits nonzero if any failed.
//!
//!     cargo test -p geneblend-cli --test acceptance

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower::ServiceExt;

use geneblend_core::latent::{blend, blend_spherical, crossover, mutate, random_latent};
use geneblend_core::rng::Stream;
use geneblend_core::{
    Artifact, BackendRegistry, BlendMode, BlendSpec, ClassMixture, Engine, GalleryStore, Gene, LatentVector, Lineage,
    ListFilter, ProceduralBackend, SourcePool, Tag, PROCEDURAL_BACKEND_ID,
};
use geneblend_service::{router, AppState};

const D: usize = 128;
const SIDE: u32 = 64;
const POOL_SEED: u64 = 20;
const BACKEND_SEED: u64 = 0;

fn engine_with(pool_size: usize) -> Engine {
    let pool = Arc::new(SourcePool::synthetic(pool_size, D, POOL_SEED));
    let backends = BackendRegistry::new().with(Arc::new(ProceduralBackend::new(BACKEND_SEED, D)));
    Engine::new(pool, backends).unwrap().with_image_size(SIDE, SIDE)
}

fn pool_ids(engine: &Engine, n: usize) -> Vec<String> {
    engine.pool().ids().take(n).map(str::to_string).collect()
}

fn unit(v: &LatentVector) -> LatentVector {
    let n = v.norm();
    LatentVector::new(v.as_slice().iter().map(|x| x / n).collect()).unwrap()
}

fn random_weights(s: &mut Stream, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if s.next_f64() < 0.25 { 0.0 } else { s.next_f64() })
            .collect();
        if w.iter().any(|&x| x > 0.0) {
            return w;
        }
    }
}

// ---- criteria ----

fn identity_chain() {
    let engine = engine_with(6);
    let mut session = engine
        .create_session("identity", PROCEDURAL_BACKEND_ID, Some(pool_ids(&engine, 6)), 0)
        .unwrap();
    let backend = ProceduralBackend::new(BACKEND_SEED, D);
    for k in 0..6 {
        let mut w = vec![0.0; 6];
        w[k] = 1.0;
        let preview = engine
            .preview(&mut session, &BlendSpec::new(w, BlendMode::Linear, 1e6))
            .unwrap();
        let gene = engine.pool().get(&session.slots[k].source_id).unwrap().gene();
        let direct = geneblend_core::Generator::generate(
            &backend,
            &gene,
            &geneblend_core::RenderParams::square(SIDE, PROCEDURAL_BACKEND_ID),
        )
        .unwrap()
        .encode_png()
        .unwrap();
        assert_eq!(preview.png, direct, "slot {k}");
        assert_eq!(preview.gene, gene, "slot {k} gene");
    }
}

fn scale_invariance() {
    let engine = engine_with(6);
    let mut session = engine.create_session("scale", PROCEDURAL_BACKEND_ID, None, 1).unwrap();
    let mut s = Stream::new(0x5CA1E);
    for trial in 0..50 {
        let w = random_weights(&mut s, 6);
        let mode = if s.next_bool() {
            BlendMode::Spherical
        } else {
            BlendMode::Linear
        };
        let t = s.next_range(0.5, 3.0);
        let base = engine
            .preview(&mut session, &BlendSpec::new(w.clone(), mode, t))
            .unwrap();
        for lambda in [0.5, 3.0, 10.0] {
            let scaled: Vec<f64> = w.iter().map(|x| x * lambda).collect();
            let r = engine.preview(&mut session, &BlendSpec::new(scaled, mode, t)).unwrap();
            assert_eq!(r.png, base.png, "trial {trial}, lambda {lambda}");
        }
    }
}

fn permutation_equivariance() {
    let mut s = Stream::new(0x9E12);
    for trial in 0..50 {
        let n = 2 + s.next_index(5);
        let genes: Vec<Gene> = (0..n)
            .map(|_| Gene::new(random_latent(s.next_u64(), D), ClassMixture::single("valley")))
            .collect();
        let w = random_weights(&mut s, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, s.next_index(i + 1));
        }
        let pg: Vec<Gene> = perm.iter().map(|&i| genes[i].clone()).collect();
        let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        for mode in [BlendMode::Linear, BlendMode::Spherical] {
            let a = blend(&genes, &geneblend_core::latent::normalize_weights(&w).unwrap(), mode).unwrap();
            let b = blend(&pg, &geneblend_core::latent::normalize_weights(&pw).unwrap(), mode).unwrap();
            for (i, (x, y)) in a.latent.as_slice().iter().zip(b.latent.as_slice()).enumerate() {
                assert!(
                    (x - y).abs() <= 1e-12,
                    "trial {trial} {mode:?} component {i}: {x} vs {y}"
                );
            }
        }
    }
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn determinism_golden() {
    let dir = golden_dir();
    let pngs = std::fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert!(pngs >= 10, "only {pngs} golden PNGs");
    let run = || {
        let o = Command::new(env!("CARGO_BIN_EXE_geneblend"))
            .args(["golden", "check", "--dir", dir.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let lines = String::from_utf8(first).unwrap();
    assert_eq!(lines.lines().count(), pngs);
    assert!(lines.lines().all(|l| l.contains(r#""status":"ok""#)));

    // A fresh in-process render of every sidecar equals the committed bytes.
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "json") {
            let sidecar: geneblend_cli::golden::Sidecar =
                serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
            let fresh = sidecar.render(sidecar.backend_seed).unwrap();
            assert_eq!(
                fresh,
                std::fs::read(path.with_extension("png")).unwrap(),
                "{}",
                path.display()
            );
        }
    }
}

fn continuity() {
    let backend = ProceduralBackend::new(BACKEND_SEED, D);
    let c = backend.lipschitz_bound();
    let mut s = Stream::new(0xC0);
    let mut violations = 0;
    for _ in 0..100 {
        let z = random_latent(s.next_u64(), D);
        let dir = unit(&random_latent(s.next_u64(), D));
        let eps = 0.1 * (1.0 - s.next_f64());
        let z2 = LatentVector::new(
            z.as_slice()
                .iter()
                .zip(dir.as_slice())
                .map(|(a, d)| a + eps * d)
                .collect(),
        )
        .unwrap();
        let dist = geneblend_core::latent::latent_distance(&z, &z2).unwrap();
        assert!(dist <= 0.1 + 1e-12);
        let a = backend.render_values(&z, SIDE, SIDE).unwrap();
        let b = backend.render_values(&z2, SIDE, SIDE).unwrap();
        let max = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if max > c * dist {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

/// Independent replay of the pinned stream for the breeding checks.
struct Replay(u64);

impl Replay {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

fn evolution_operators() {
    let mut s = Stream::new(0xB4EED);
    for trial in 0..200 {
        let a = Gene::unconditional(random_latent(s.next_u64(), D));
        let b = Gene::unconditional(random_latent(s.next_u64(), D));
        let seed = s.next_u64();
        let child = crossover(&a, &b, seed).unwrap();
        let mut coins = Replay(seed);
        for i in 0..D {
            let (x, ya, yb) = (
                child.latent.as_slice()[i],
                a.latent.as_slice()[i],
                b.latent.as_slice()[i],
            );
            assert!(
                x.to_bits() == ya.to_bits() || x.to_bits() == yb.to_bits(),
                "trial {trial} component {i}"
            );
            let expect = if coins.next() >> 63 == 1 { yb } else { ya };
            assert_eq!(x.to_bits(), expect.to_bits(), "trial {trial} component {i}");
        }
        let m = mutate(&a, 0.0, seed).unwrap();
        assert!(m
            .latent
            .as_slice()
            .iter()
            .zip(a.latent.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(m.class_mix, a.class_mix);
    }

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geneblend"))
        .args(["--image-size", "64", "evolve"])
        .arg(fixtures.join("evolve_p4_g3_s11.json"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(out.path().join("lineage.jsonl")).unwrap();
    let oracle = std::fs::read_to_string(fixtures.join("evolve_p4_g3_s11.jsonl")).unwrap();
    let got: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let want: Vec<Value> = oracle.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(got.len(), want.len());

    // The oracle's normals come from the host C library, so genes are matched
    // to 1e-12 and the logged digests against the genes the binary bred.
    let cfg = geneblend_cli::evolve::load_config(&fixtures.join("evolve_p4_g3_s11.json")).unwrap();
    let bred: Vec<Gene> = geneblend_cli::evolve::simulate(&cfg, D)
        .unwrap()
        .into_iter()
        .flatten()
        .map(|(gene, _)| gene)
        .collect();
    assert_eq!(bred.len(), want.len());
    for ((g, w), gene) in got.iter().zip(&want).zip(&bred) {
        for key in ["generation", "index", "parents", "crossover_seed", "mutation_seed"] {
            assert_eq!(g[key], w[key], "{key} at {g}");
        }
        let oracle_latent = w["latent"].as_array().unwrap();
        assert_eq!(oracle_latent.len(), D);
        for (x, y) in gene.latent.as_slice().iter().zip(oracle_latent) {
            assert!(
                (x - y.as_f64().unwrap()).abs() <= 1e-12,
                "generation {} index {}",
                g["generation"],
                g["index"]
            );
        }
        assert_eq!(g["gene_digest"].as_str().unwrap(), gene.digest().to_string());
        assert_eq!(g["image_digest"].as_str().unwrap().len(), 64);
    }
    for (i, rec) in got.iter().filter(|r| r["generation"] == 3).enumerate() {
        let png = std::fs::read(out.path().join(format!("final/{i:03}.png"))).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&png)), rec["image_digest"].as_str().unwrap());
    }
}

fn slerp_correctness() {
    let mut s = Stream::new(0x51E7);
    for trial in 0..100 {
        let a = unit(&random_latent(s.next_u64(), D));
        let b = unit(&random_latent(s.next_u64(), D));
        let t = s.next_f64();
        let ga = Gene::unconditional(a.clone());
        let gb = Gene::unconditional(b.clone());
        let got = blend_spherical(&[ga, gb], &[1.0 - t, t]).unwrap();
        let dot: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
        let theta = dot.clamp(-1.0, 1.0).acos();
        let (ka, kb) = (((1.0 - t) * theta).sin() / theta.sin(), (t * theta).sin() / theta.sin());
        for i in 0..D {
            let want = ka * a.as_slice()[i] + kb * b.as_slice()[i];
            let x = got.latent.as_slice()[i];
            assert!((x - want).abs() <= 1e-9, "trial {trial} component {i}: {x} vs {want}");
        }
    }

    let a = unit(&random_latent(77, D));
    let r = random_latent(78, D);
    let proj: f64 = a.as_slice().iter().zip(r.as_slice()).map(|(x, y)| x * y).sum();
    let b = unit(
        &LatentVector::new(
            r.as_slice()
                .iter()
                .zip(a.as_slice())
                .map(|(y, x)| y - proj * x)
                .collect(),
        )
        .unwrap(),
    );
    let got = blend_spherical(
        &[Gene::unconditional(a.clone()), Gene::unconditional(b.clone())],
        &[0.5, 0.5],
    )
    .unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..D {
        let want = h * (a.as_slice()[i] + b.as_slice()[i]);
        assert!(
            (got.latent.as_slice()[i] - want).abs() <= 1e-12,
            "orthogonal midpoint component {i}"
        );
    }
}

// ---- service-backed criteria ----

struct Api {
    app: axum::Router,
    state: Arc<AppState>,
    _dir: tempfile::TempDir,
}

impl Api {
    fn new(pool_size: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = GalleryStore::open(dir.path().join("store")).unwrap();
        let state = Arc::new(AppState::new(engine_with(pool_size), store, PROCEDURAL_BACKEND_ID).unwrap());
        Self {
            app: router(state.clone()),
            state,
            _dir: dir,
        }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.call(method, uri, body).await;
        (status, serde_json::from_slice(&bytes).unwrap())
    }
}

async fn end_to_end() {
    let api = Api::new(8);
    let (st, session) = api
        .json(
            Method::POST,
            "/sessions",
            Some(json!({"prompt": "the future of life on earth", "seed": 2})),
        )
        .await;
    assert_eq!(st, StatusCode::CREATED);
    let id = session["session_id"].as_str().unwrap();
    let current: Vec<&str> = session["slots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["source_id"].as_str().unwrap())
        .collect();
    let replacement = api
        .state
        .engine()
        .pool()
        .ids()
        .find(|x| !current.contains(x))
        .unwrap()
        .to_string();
    let (st, swapped) = api
        .json(
            Method::PUT,
            &format!("/sessions/{id}/slots/4"),
            Some(json!({"source_id": replacement})),
        )
        .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(swapped["slots"][4]["source_id"], json!(replacement));

    let body = json!({"weights": [0.1, 0.9, 0.0, 0.3, 1.0, 0.0], "mode": "spherical", "truncation": 1.2});
    let (st, preview) = api
        .json(Method::POST, &format!("/sessions/{id}/preview"), Some(body.clone()))
        .await;
    assert_eq!(st, StatusCode::OK);
    let (st, preview_png) = api
        .call(Method::GET, preview["image_url"].as_str().unwrap(), None)
        .await;
    assert_eq!(st, StatusCode::OK);

    let mut save = body;
    save["tag"] = json!("utopia");
    save["consent"] = json!(true);
    let (st, saved) = api
        .json(Method::POST, &format!("/sessions/{id}/artifacts"), Some(save))
        .await;
    assert_eq!(st, StatusCode::CREATED);
    let aid = saved["artifact_id"].as_str().unwrap();
    let (st, got) = api.json(Method::GET, &format!("/gallery/{aid}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(got, saved);
    let (st, gallery_png) = api.call(Method::GET, got["image_url"].as_str().unwrap(), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(gallery_png, preview_png);

    let (record, stored) = api.state.store().get(aid, false).unwrap();
    assert_eq!(stored, preview_png);
    assert_eq!(record.lineage.source_ids[4], replacement);
    assert_eq!(api.state.engine().rerender(&record).unwrap().png, stored);
}

fn ids_in(page: &Value) -> Vec<String> {
    page["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["artifact_id"].as_str().unwrap().to_string())
        .collect()
}

async fn consent_boundary() {
    let api = Api::new(6);
    let mut s = Stream::new(0xC0A5E17);
    let mut sessions = Vec::new();
    for k in 0..3 {
        let (_, v) = api
            .json(
                Method::POST,
                "/sessions",
                Some(json!({"prompt": format!("prompt {k}"), "seed": k})),
            )
            .await;
        sessions.push(v["session_id"].as_str().unwrap().to_string());
    }
    let mut private = Vec::new();
    let mut public = Vec::new();
    for i in 0..24 {
        let sid = &sessions[i % 3];
        let body = json!({"weights": random_weights(&mut s, 6), "mode": "linear", "truncation": 0.5 + i as f64 * 0.1});
        // Every third private save is previewed first, so its image passed
        // through the preview cache.
        if i % 3 == 0 {
            api.json(Method::POST, &format!("/sessions/{sid}/preview"), Some(body.clone()))
                .await;
        }
        let consent = s.next_bool();
        let mut save = body;
        save["tag"] = json!(if s.next_bool() { "utopia" } else { "dystopia" });
        save["consent"] = json!(consent);
        let (st, a) = api
            .json(Method::POST, &format!("/sessions/{sid}/artifacts"), Some(save))
            .await;
        assert_eq!(st, StatusCode::CREATED);
        let entry = (
            a["artifact_id"].as_str().unwrap().to_string(),
            a["image_digest"].as_str().unwrap().to_string(),
        );
        if consent {
            public.push(entry)
        } else {
            private.push(entry)
        }
    }
    assert!(!private.is_empty() && !public.is_empty());
    let private_ids: Vec<&String> = private.iter().map(|(id, _)| id).collect();
    let public_digests: Vec<&String> = public.iter().map(|(_, d)| d).collect();

    // Every artifact through every public single-record endpoint.
    for (id, digest) in &private {
        let (st, body) = api.json(Method::GET, &format!("/gallery/{id}"), None).await;
        assert_eq!(st, StatusCode::NOT_FOUND);
        assert_eq!(body["code"], "ARTIFACT_NOT_FOUND");
        let (_, absent) = api.json(Method::GET, "/gallery/0000000000000000", None).await;
        assert_eq!(body, absent);
        if !public_digests.contains(&digest) {
            assert_eq!(
                api.call(Method::GET, &format!("/images/{digest}"), None).await.0,
                StatusCode::NOT_FOUND
            );
        }
        assert!(matches!(
            api.state.store().get(id, false),
            Err(geneblend_core::StoreError::NotFound)
        ));
    }
    for (id, digest) in &public {
        assert_eq!(
            api.call(Method::GET, &format!("/gallery/{id}"), None).await.0,
            StatusCode::OK
        );
        assert_eq!(
            api.call(Method::GET, &format!("/images/{digest}"), None).await.0,
            StatusCode::OK
        );
    }

    // Every listing: each tag filter, each prompt filter, several page sizes.
    let mut filters = vec![String::new(), "tag=utopia&".into(), "tag=dystopia&".into()];
    filters.extend((0..3).map(|k| format!("prompt=prompt%20{k}&")));
    for f in filters {
        for size in [1, 5, 7, 100] {
            let mut page = 1;
            loop {
                let (st, body) = api
                    .json(Method::GET, &format!("/gallery?{f}page={page}&page_size={size}"), None)
                    .await;
                assert_eq!(st, StatusCode::OK);
                let items = body["items"].as_array().unwrap();
                for item in items {
                    assert_eq!(item["consent"], true);
                    assert!(!private_ids.contains(&&item["artifact_id"].as_str().unwrap().to_string()));
                }
                if items.is_empty() {
                    break;
                }
                page += 1;
            }
        }
    }
    let (_, all) = api.json(Method::GET, "/gallery?page_size=100", None).await;
    assert_eq!(all["total"], public.len());

    // The export bundle is a public surface too.
    let dest = tempfile::tempdir().unwrap();
    let n = api.state.store().export_bundle(dest.path()).unwrap();
    assert_eq!(n, public.len());
    let text = std::fs::read_to_string(dest.path().join("bundle.json")).unwrap();
    assert!(private_ids.iter().all(|id| !text.contains(id.as_str())));
}

async fn pagination() {
    let api = Api::new(6);
    let engine = api.state.engine();
    let ids = pool_ids(engine, 6);
    let mut s = Stream::new(0x9A6E);
    let base = chrono::DateTime::parse_from_rfc3339("2026-03-01T12:00:00Z")
        .unwrap()
        .to_utc();
    let mut consented = Vec::new();
    for i in 0..31 {
        let w = random_weights(&mut s, 6);
        let spec = BlendSpec::new(w.clone(), BlendMode::Linear, 1.0);
        let gene = engine.resolve_gene(&ids, &spec).unwrap();
        let r = engine
            .render(&gene, PROCEDURAL_BACKEND_ID, SIDE, SIDE, Some(1.0))
            .unwrap();
        let consent = i < 25;
        let id = format!("art-{:02}", (i * 7) % 31);
        let artifact = Artifact {
            artifact_id: id.clone(),
            gene,
            tag: if i % 2 == 0 { Tag::Utopia } else { Tag::Dystopia },
            lineage: Lineage {
                source_ids: ids.clone(),
                raw_weights: w,
                mode: BlendMode::Linear,
                truncation: 1.0,
                backend_id: PROCEDURAL_BACKEND_ID.into(),
                width: SIDE,
                height: SIDE,
            },
            prompt: "pages".into(),
            consent,
            // Groups of three share a timestamp to exercise the tie-break.
            created_at: base + chrono::Duration::seconds((i / 3) as i64),
            image_digest: r.image_digest.clone(),
            participant_id: None,
        };
        api.state.store().put(&artifact, &r.png).unwrap();
        if consent {
            consented.push(id);
        }
    }
    assert_eq!(consented.len(), 25);

    let mut seen: Vec<String> = Vec::new();
    let mut sizes = Vec::new();
    for page in 1..=4 {
        let (st, body) = api
            .json(Method::GET, &format!("/gallery?page={page}&page_size=10"), None)
            .await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(body["total"], 25);
        let ids = ids_in(&body);
        sizes.push(ids.len());
        seen.extend(ids);
    }
    assert_eq!(sizes, [10, 10, 5, 0]);
    let mut sorted = seen.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), seen.len(), "duplicates across pages");
    let mut want = consented.clone();
    want.sort();
    assert_eq!(sorted, want);

    // Same order as one big page, which is newest first with ids ascending on ties.
    let (_, one) = api.json(Method::GET, "/gallery?page=1&page_size=100", None).await;
    assert_eq!(ids_in(&one), seen);
    let listed = api
        .state
        .store()
        .list(&ListFilter {
            page_size: 100,
            ..ListFilter::default()
        })
        .unwrap();
    for pair in listed.items.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(a.created_at > b.created_at || (a.created_at == b.created_at && a.artifact_id < b.artifact_id));
    }
}

// ---- runner ----

type Check<'a> = Box<dyn Fn() + 'a>;

fn main() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let criteria: Vec<(&str, Check)> = vec![
        ("identity chain", Box::new(identity_chain)),
        ("scale invariance", Box::new(scale_invariance)),
        ("permutation equivariance", Box::new(permutation_equivariance)),
        ("determinism / golden", Box::new(determinism_golden)),
        ("continuity", Box::new(continuity)),
        ("evolution operators", Box::new(evolution_operators)),
        ("slerp correctness", Box::new(slerp_correctness)),
        ("end-to-end API", Box::new(|| rt.block_on(end_to_end()))),
        ("consent boundary", Box::new(|| rt.block_on(consent_boundary()))),
        ("gallery pagination", Box::new(|| rt.block_on(pagination()))),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let ms = start.elapsed().as_millis();
        match result {
            Ok(()) => println!("PASS  {name:<26} {ms:>6} ms"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL  {name:<26} {ms:>6} ms  {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
