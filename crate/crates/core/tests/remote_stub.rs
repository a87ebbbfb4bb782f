//! Remote backends against a local HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use a2rag_core::cost::CostCounters;
use a2rag_core::oracles::remote::{Prompts, RemoteClient, RemoteEmbedder, RemoteGenerator, RemoteSettings};
use a2rag_core::oracles::{slot, AnswerGenerator, OracleError, TextEmbedder};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    auth: String,
    body: Value,
}

/// Serves `replies` in order, one per connection, and records each request.
fn stub(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let (mut len, mut auth) = (0usize, String::new());
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = v.trim().to_string(),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (base, seen)
}

fn settings(base: &str) -> RemoteSettings {
    let mut s = RemoteSettings::from_lookup(|k| match k {
        "A2RAG_API_BASE" => Some(format!("{base}/v1/")),
        "A2RAG_API_KEY" => Some("sk-test".into()),
        "A2RAG_CHAT_MODEL" => Some("chat-m".into()),
        "A2RAG_EMBED_MODEL" => Some("embed-m".into()),
        _ => None,
    })
    .unwrap();
    s.backoff = Duration::from_millis(1);
    s.timeout = Duration::from_secs(5);
    s
}

fn chat_reply(content: &str) -> String {
    json!({
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 5}
    })
    .to_string()
}

#[test]
fn generator_returns_completion_and_usage() {
    let (base, seen) = stub(vec![(200, chat_reply("  Yara Quinn  "))]);
    let client = Arc::new(RemoteClient::new(settings(&base)));
    let generator = RemoteGenerator::new(client, &Prompts::default());
    let out = generator.generate("Who founded Xeno Labs?", &["Xeno Labs was founded by Yara Quinn."]).unwrap();
    assert_eq!(out.value, "Yara Quinn");
    assert_eq!((out.usage.prompt_tokens, out.usage.completion_tokens), (10, 5));

    let mut cost = CostCounters::default();
    cost.record(slot::GENERATOR, &out.usage);
    assert_eq!((cost.calls(slot::GENERATOR), cost.total_tokens()), (1, 15));

    let req = seen.lock().unwrap()[0].clone();
    assert_eq!(req.path, "/v1/chat/completions");
    assert_eq!(req.auth, "Bearer sk-test");
    assert_eq!(req.body["model"], "chat-m");
    assert_eq!(req.body["temperature"], 0);
    let prompt = req.body["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("Who founded Xeno Labs?") && prompt.contains("founded by Yara Quinn"));
}

#[test]
fn embedder_normalizes_and_caches() {
    let reply = json!({"data": [{"embedding": [3.0, 0.0, -4.0]}], "usage": {"prompt_tokens": 3}}).to_string();
    let (base, seen) = stub(vec![(200, reply)]);
    let e = RemoteEmbedder::new(Arc::new(RemoteClient::new(settings(&base))));
    let out = e.embed("hello").unwrap();
    assert_eq!(out.value, vec![0.6, 0.0, -0.8]);
    assert_eq!((out.usage.prompt_tokens, out.usage.completion_tokens), (3, 0));
    assert_eq!(e.embed("hello").unwrap().value, out.value);
    assert_eq!(seen.lock().unwrap().len(), 1);
    let req = seen.lock().unwrap()[0].clone();
    assert_eq!(req.path, "/v1/embeddings");
    assert_eq!(req.body, json!({"model": "embed-m", "input": "hello"}));
}

#[test]
fn server_errors_are_retried() {
    let (base, seen) = stub(vec![(503, "{}".into()), (500, "{}".into()), (200, chat_reply("ok"))]);
    let client = RemoteClient::new(settings(&base));
    assert_eq!(client.chat("p").unwrap().value, "ok");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn auth_failure_is_not_retried() {
    let (base, seen) = stub(vec![(401, "{}".into()), (200, chat_reply("never"))]);
    let client = RemoteClient::new(settings(&base));
    assert!(matches!(client.chat("p"), Err(OracleError::Auth(401))));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_reply_is_an_error() {
    let (base, _) = stub(vec![(200, json!({"choices": []}).to_string())]);
    let client = RemoteClient::new(settings(&base));
    assert!(matches!(client.chat("p"), Err(OracleError::Malformed(_))));
}
