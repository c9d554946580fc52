//! Scorer plugin used to exercise the wire protocol.
//!
//! `k2t-stub-scorer <mode>` where mode is one of:
//! `lexical`, `constant:<v>`, `nan`, `bad-arity`, `wrong-id`, `error`,
//! `sleep:<secs>`, `sleep-on:<id>`, `bad-handshake`.

use std::io::{self, BufRead, Write};
use std::thread::sleep;
use std::time::Duration;

use k2t_core::harness::scorer::{SCORER_PROTOCOL, SCORER_VERSION};
use k2t_core::harness::{lexical_overlap_score, AssembledSequence};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Deserialize)]
struct Item {
    label: String,
    knowledge: String,
    question: String,
    candidate: String,
}

#[derive(Deserialize)]
struct Request {
    id: String,
    separator: String,
    items: Vec<Item>,
}

fn respond(mode: &str, req: Request) -> Value {
    let id = req.id.clone();
    let lexical = || -> Vec<Value> {
        req.items
            .iter()
            .map(|it| {
                json!(lexical_overlap_score(&AssembledSequence {
                    label: it.label.clone(),
                    knowledge: it.knowledge.clone(),
                    separator: req.separator.clone(),
                    question: it.question.clone(),
                    candidate: it.candidate.clone(),
                }))
            })
            .collect()
    };
    match mode.split_once(':') {
        Some(("constant", v)) => {
            let v: f64 = v.parse().expect("constant value");
            json!({"id": id, "scores": vec![v; req.items.len()]})
        }
        Some(("sleep", secs)) => {
            sleep(Duration::from_secs_f64(secs.parse().expect("seconds")));
            json!({"id": id, "scores": lexical()})
        }
        Some(("sleep-on", target)) => {
            if id == target {
                sleep(Duration::from_secs(30));
            }
            json!({"id": id, "scores": lexical()})
        }
        _ => match mode {
            "nan" => json!({"id": id, "scores": vec![Value::Null; req.items.len()]}),
            "bad-arity" => {
                let mut s = lexical();
                s.pop();
                json!({"id": id, "scores": s})
            }
            "wrong-id" => json!({"id": format!("{id}-x"), "scores": lexical()}),
            "error" => json!({"id": id, "error": "model unavailable"}),
            _ => json!({"id": id, "scores": lexical()}),
        },
    }
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "lexical".into());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let handshake = if mode == "bad-handshake" {
        json!({"protocol": "something-else", "version": 9})
    } else {
        json!({"protocol": SCORER_PROTOCOL, "version": SCORER_VERSION})
    };
    writeln!(out, "{handshake}")
        .and_then(|_| out.flush())
        .expect("stdout");
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => respond(&mode, req),
            Err(e) => json!({"id": Value::Null, "error": e.to_string()}),
        };
        if writeln!(out, "{response}")
            .and_then(|_| out.flush())
            .is_err()
        {
            break;
        }
    }
}
