//! The chat-completions client against a local scripted HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use clade::llm::{LlmConfig, LlmGenerator};
use clade_core::dsl::{ActionKind, ProblemKind};
use clade_core::generator::{ExtractError, GenerationContext, GenerationError, Generator};
use clade_core::problems::{gen_kp, Dataset};
use clade_core::{run_search, Rng, SearchConfig, SeedSet};

const KEY: &str = "sk-test-key";

enum Reply {
    Status(u16, String),
    Hang(Duration),
}

fn chat(content: &str) -> Reply {
    Reply::Status(200, serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string())
}

struct Request {
    headers: Vec<String>,
    body: serde_json::Value,
}

/// Serves `script` in order, one connection per reply; the last reply repeats.
fn serve(script: Vec<Reply>) -> (String, Arc<Mutex<Vec<Request>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        let mut i = 0;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line.trim_end().to_owned());
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Request { headers, body: serde_json::from_slice(&body).unwrap_or_default() });
            match &script[i.min(script.len() - 1)] {
                Reply::Status(code, text) => {
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                        text.len()
                    );
                }
                Reply::Hang(d) => thread::sleep(*d),
            }
            i += 1;
        }
    });
    (url, seen)
}

fn cfg(url: String) -> LlmConfig {
    LlmConfig { endpoint: url, timeout_secs: 2.0, max_retries: 2, backoff_secs: 0.01, ..LlmConfig::default() }
}

fn ctx() -> GenerationContext {
    GenerationContext { action: ActionKind::I1, kind: ProblemKind::Kp, target: None, parent_pool: Vec::new() }
}

#[test]
fn successful_reply_is_parsed() {
    let (url, seen) = serve(vec![chat("{Prefer dense items.}\n```dsl\ndiv_p(value, weight)\n```")]);
    let mut g = LlmGenerator::with_key(cfg(url), KEY.into());
    let h = g.generate(&ctx(), &mut Rng::seed_from_u64(0)).unwrap();
    assert_eq!(h.expr.to_string(), "div_p(value, weight)");
    assert_eq!(h.description, "Prefer dense items.");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert!(seen[0].headers.iter().any(|h| h.eq_ignore_ascii_case(&format!("authorization: Bearer {KEY}"))));
    assert_eq!(seen[0].body["model"], "gpt-4o-mini");
    let prompt = seen[0].body["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("select_next_item"));
}

#[test]
fn rate_limit_is_retried() {
    let (url, seen) = serve(vec![Reply::Status(429, "{}".into()), chat("```\nvalue\n```")]);
    let mut g = LlmGenerator::with_key(cfg(url), KEY.into());
    let h = g.generate(&ctx(), &mut Rng::seed_from_u64(0)).unwrap();
    assert_eq!(h.expr.to_string(), "value");
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn persistent_rate_limit_is_reported() {
    let (url, seen) = serve(vec![Reply::Status(429, "{}".into())]);
    let mut g = LlmGenerator::with_key(cfg(url), KEY.into());
    let err = g.generate(&ctx(), &mut Rng::seed_from_u64(0)).unwrap_err();
    assert_eq!(err, GenerationError::RateLimited { attempts: 3 });
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn unparseable_replies_exhaust_retries() {
    let (url, seen) = serve(vec![chat("I would rather write Python.")]);
    let mut g = LlmGenerator::with_key(cfg(url), KEY.into());
    let err = g.generate(&ctx(), &mut Rng::seed_from_u64(0)).unwrap_err();
    assert!(matches!(err, GenerationError::Unusable { attempts: 3, last: ExtractError::NoExpression }), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn server_errors_never_leak_the_key() {
    let (url, _) = serve(vec![Reply::Status(500, format!("bad key {KEY}"))]);
    let mut g = LlmGenerator::with_key(cfg(url), KEY.into());
    let err = g.generate(&ctx(), &mut Rng::seed_from_u64(0)).unwrap_err();
    assert!(!err.to_string().contains(KEY));
}

#[test]
fn hung_server_is_bounded_by_the_deadline() {
    let (url, _) = serve(vec![Reply::Hang(Duration::from_secs(30))]);
    let c = LlmConfig { timeout_secs: 0.3, max_retries: 1, ..cfg(url) };
    let deadline = c.call_deadline();
    let mut g = LlmGenerator::with_key(c, KEY.into());
    let start = Instant::now();
    let err = g.generate(&ctx(), &mut Rng::seed_from_u64(0)).unwrap_err();
    assert!(matches!(err, GenerationError::Transport(_)), "{err:?}");
    assert!(start.elapsed() < deadline + Duration::from_millis(500), "took {:?}", start.elapsed());
}

#[test]
fn search_runs_on_the_http_backend() {
    let (url, seen) = serve(vec![
        chat("{ratio}\n```dsl\ndiv_p(value, weight)\n```"),
        chat("not a heuristic"),
        chat("{value}\n```dsl\nvalue\n```"),
    ]);
    let mut search = SearchConfig::default();
    search.policy.budget = 6;
    search.n_init = 2;
    let mut g = LlmGenerator::with_key(LlmConfig { max_retries: 0, ..cfg(url) }, KEY.into());
    let data = Dataset::Kp(gen_kp(20, 5.0, 3, 0));
    let out = run_search(&search, &data, &mut g, &SeedSet::from_master(0)).unwrap();
    assert_eq!(out.evaluations(), 6);
    assert_eq!(out.trace.rows.iter().filter(|r| r.raw_score.is_none()).count(), 1);
    assert_eq!(seen.lock().unwrap().len(), 6);
}
