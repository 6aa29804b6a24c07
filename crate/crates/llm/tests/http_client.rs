//! Wire-level tests of the chat client against a scripted loopback server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use dytag_llm::{ChatConfig, ChatEndpoint, ChatMessage, HttpChatClient, LlmError};
use serde_json::Value;

#[derive(Clone)]
struct Scripted {
    status: u16,
    body: String,
    delay: Duration,
}

impl Scripted {
    fn ok(content: &str) -> Self {
        let body = serde_json::json!({
            "id": "chatcmpl-1",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        })
        .to_string();
        Self { status: 200, body, delay: Duration::ZERO }
    }

    fn status(status: u16, body: &str) -> Self {
        Self { status, body: body.to_string(), delay: Duration::ZERO }
    }
}

struct MockServer {
    url: String,
    requests: Arc<Mutex<Vec<Value>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<Value> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

/// Serves `script` in order, one response per connection; the last entry
/// repeats once the script is exhausted.
fn serve(script: Vec<Scripted>) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&requests);
    thread::spawn(move || {
        let mut i = 0usize;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some(req) = read_request(&mut stream) else { continue };
            log.lock().unwrap().push(req);
            let step = script[i.min(script.len() - 1)].clone();
            i += 1;
            thread::spawn(move || {
                thread::sleep(step.delay);
                let reason = match step.status {
                    200 => "OK",
                    400 => "Bad Request",
                    429 => "Too Many Requests",
                    _ => "Error",
                };
                let resp = format!(
                    "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    step.status,
                    reason,
                    step.body.len(),
                    step.body
                );
                let _ = stream.write_all(resp.as_bytes());
            });
        }
    });
    MockServer { url, requests }
}

fn config(url: &str) -> ChatConfig {
    ChatConfig {
        base_url: url.to_string(),
        model: "mock-model".into(),
        timeout_ms: 5_000,
        max_retries: 3,
        backoff_base_ms: 5,
        backoff_max_ms: 20,
        ..ChatConfig::default()
    }
}

#[test]
fn loopback_reply_equals_mock_body() {
    let server = serve(vec![Scripted::ok("{\"item_id\": \"P1\"}")]);
    let client = HttpChatClient::new(config(&server.url)).unwrap();
    let reply = client.chat(&[ChatMessage::system("sys"), ChatMessage::user("hello")]).unwrap();
    assert_eq!(reply.content, "{\"item_id\": \"P1\"}");
    assert_eq!(reply.retries, 0);

    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 1);
    let req = &reqs[0];
    assert_eq!(req["model"], "mock-model");
    assert_eq!(req["temperature"], 0.8);
    assert_eq!(req["top_p"], 0.9);
    assert_eq!(req["repetition_penalty"], 1.1);
    assert_eq!(req["max_tokens"], 2000);
    assert_eq!(req["messages"][1]["content"], "hello");
}

#[test]
fn two_429s_then_success_counts_two_retries() {
    let server = serve(vec![
        Scripted::status(429, "{\"error\":\"slow down\"}"),
        Scripted::status(429, "{\"error\":\"slow down\"}"),
        Scripted::ok("fine"),
    ]);
    let client = HttpChatClient::new(config(&server.url)).unwrap();
    let reply = client.chat(&[ChatMessage::user("x")]).unwrap();
    assert_eq!(reply.content, "fine");
    assert_eq!(reply.retries, 2);
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn retries_exhausted_surfaces_status_and_body() {
    let server = serve(vec![Scripted::status(503, "overloaded")]);
    let cfg = ChatConfig { max_retries: 1, ..config(&server.url) };
    let client = HttpChatClient::new(cfg).unwrap();
    match client.chat(&[ChatMessage::user("x")]) {
        Err(LlmError::Http { status, body }) => {
            assert_eq!(status, 503);
            assert_eq!(body, "overloaded");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.requests.lock().unwrap().len(), 2);
}

#[test]
fn non_transient_status_is_not_retried() {
    let server = serve(vec![Scripted::status(401, "bad key")]);
    let client = HttpChatClient::new(config(&server.url)).unwrap();
    assert!(matches!(client.chat(&[ChatMessage::user("x")]), Err(LlmError::Http { status: 401, .. })));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn timeout_carries_elapsed_time() {
    let server = serve(vec![Scripted { delay: Duration::from_secs(5), ..Scripted::ok("late") }]);
    let cfg = ChatConfig { timeout_ms: 300, max_retries: 0, ..config(&server.url) };
    let client = HttpChatClient::new(cfg).unwrap();
    match client.chat(&[ChatMessage::user("x")]) {
        Err(LlmError::Timeout { elapsed_ms }) => assert!((250..3_000).contains(&elapsed_ms), "{elapsed_ms}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_choices_is_reported() {
    let server = serve(vec![Scripted::status(200, "{\"choices\": []}")]);
    let client = HttpChatClient::new(config(&server.url)).unwrap();
    assert!(matches!(client.chat(&[ChatMessage::user("x")]), Err(LlmError::EmptyChoices)));
}

#[test]
fn repetition_penalty_dropped_when_rejected() {
    let server = serve(vec![
        Scripted::status(400, "{\"error\": \"Unrecognized request argument supplied: repetition_penalty\"}"),
        Scripted::ok("ok"),
    ]);
    let client = HttpChatClient::new(config(&server.url)).unwrap();
    let reply = client.chat(&[ChatMessage::user("x")]).unwrap();
    assert_eq!(reply.content, "ok");
    assert_eq!(reply.retries, 0);
    let reqs = server.requests.lock().unwrap();
    assert!(reqs[0].get("repetition_penalty").is_some());
    assert!(reqs[1].get("repetition_penalty").is_none());
}

#[test]
fn identical_requests_to_deterministic_mock_agree() {
    let server = serve(vec![Scripted::ok("same")]);
    let client = HttpChatClient::new(config(&server.url)).unwrap();
    let msgs = [ChatMessage::user("q")];
    let a = client.chat(&msgs).unwrap();
    let b = client.chat(&msgs).unwrap();
    assert_eq!(a, b);
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs[0], reqs[1]);
}
