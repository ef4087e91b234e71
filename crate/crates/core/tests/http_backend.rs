//! Wire client against a real socket: a minimal HTTP/1.1 server forwards
//! each request to the in-process backends.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use agentloop::agent::{run_episode, EpisodeConfig};
use agentloop::backends::http::{HttpGenerator, HttpJudge};
use agentloop::backends::loopback::InProcessServer;
use agentloop::backends::replay::{RecordingTransport, ReplayTransport};
use agentloop::backends::transport::{HttpTransport, RetryPolicy, Transport};
use agentloop::backends::{BackendError, ImageStore};
use agentloop::sim::{OracleJudge, ReflectivePolicy, SimConfig, SimGenerator};
use common::sim_queries;
use serde_json::Value;

struct MockServer {
    url: String,
    hits: Arc<AtomicUsize>,
}

/// Serves forever on an ephemeral port. The first `failures` requests get
/// `fail_status`.
fn serve(failures: usize, fail_status: u16) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let backend = InProcessServer::new()
        .with_generator(Arc::new(SimGenerator::new("sim", SimConfig::default())))
        .with_judge(Arc::new(OracleJudge::default()));
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let mut len = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, reply) = if n < failures {
                (fail_status, "{}".to_string())
            } else {
                let request: Value = serde_json::from_slice(&body).unwrap();
                match backend.post(&path, &request) {
                    Ok(v) => (200, v.to_string()),
                    Err(e) => (400, serde_json::json!({ "error": e.to_string() }).to_string()),
                }
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    MockServer { url, hits }
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        attempts: 3,
        initial_backoff: Duration::from_millis(5),
    }
}

fn transport(url: &str) -> Arc<dyn Transport> {
    Arc::new(HttpTransport::new("remote", url, Duration::from_secs(5), fast_retry()).unwrap())
}

fn episodes(t: Arc<dyn Transport>) -> Vec<String> {
    let gen = HttpGenerator::new("gen", t.clone(), serde_json::json!({}));
    let judge = HttpJudge::new("judge", t);
    let store = ImageStore::new();
    sim_queries(4, 3, 8)
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let t = run_episode(q, &ReflectivePolicy::default(), &gen, &judge, &store, &EpisodeConfig::new(3, i as u64))
                .unwrap();
            serde_json::to_string(&t).unwrap()
        })
        .collect()
}

#[test]
fn http_matches_local_backends() {
    let server = serve(0, 200);
    let remote = episodes(transport(&server.url));
    let local = episodes(Arc::new(
        InProcessServer::new()
            .with_generator(Arc::new(SimGenerator::new("sim", SimConfig::default())))
            .with_judge(Arc::new(OracleJudge::default())),
    ));
    assert_eq!(remote, local);
}

#[test]
fn server_errors_are_retried() {
    let server = serve(2, 503);
    let t = transport(&server.url);
    let reply = t.post("/v1/generate", &serde_json::json!({"prompt": "a scene with color=red", "seed": 1}));
    assert!(reply.is_ok(), "{reply:?}");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_server_errors_exhaust_the_retries() {
    let server = serve(usize::MAX, 500);
    let t = transport(&server.url);
    match t.post("/v1/generate", &serde_json::json!({"prompt": "x", "seed": 1})) {
        Err(BackendError::Unavailable { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = serve(usize::MAX, 404);
    let t = transport(&server.url);
    assert!(matches!(
        t.post("/v1/generate", &serde_json::json!({})),
        Err(BackendError::Unavailable { attempts: 1, .. })
    ));
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn recorded_http_session_replays_offline() {
    let server = serve(0, 200);
    let recorder = Arc::new(RecordingTransport::new(transport(&server.url)));
    let live = episodes(recorder.clone());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    recorder.snapshot().save(&path).unwrap();
    let cache = agentloop::backends::replay::ReplayCache::load(&path).unwrap();
    let replayed = episodes(Arc::new(ReplayTransport::new("replay", cache)));
    assert_eq!(live, replayed);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let t = transport(&format!("http://127.0.0.1:{port}"));
    assert!(matches!(
        t.post("/v1/generate", &serde_json::json!({})),
        Err(BackendError::Unavailable { attempts: 3, .. })
    ));
}
