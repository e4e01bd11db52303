mod common;

use std::sync::Arc;

use annoproj::Span;
use annoproj_review::server::TOKEN_HEADER;
use annoproj_review::{router, Action, Decision, ReviewService};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{find, Fixture, TARGET_TEXT};

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(TOKEN_HEADER, t);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
    };
    (status, value)
}

fn app_for(fx: &Fixture) -> axum::Router {
    router(Arc::new(ReviewService::open(&fx.config()).unwrap()))
}

fn decision(doc: &str, id: &str, action: Action, span: Option<Span>) -> Value {
    let mut d = Decision::new(doc, id, action, "tester");
    d.span = span;
    serde_json::to_value(d).unwrap()
}

#[tokio::test]
async fn documents_list_pending_counts() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let (status, body) = call(&app, "GET", "/api/documents", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!([
            {"doc_id": "IT1", "language": "it", "file": "case1.json", "pending_mismatches": 1, "pending_missing": 1},
            {"doc_id": "IT2", "language": "it", "file": "case2.xmi", "pending_mismatches": 1, "pending_missing": 1},
        ])
    );
}

#[tokio::test]
async fn document_view_includes_source() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let (status, body) = call(&app, "GET", "/api/documents/IT1", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"], TARGET_TEXT);
    assert_eq!(body["source"]["annotations"][0]["text"], "Platelets");
    assert_eq!(body["source"]["relations"][0]["type"], "PERTAINS_TO");
    let (status, _) = call(&app, "GET", "/api/documents/NOPE", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn queue_filters_by_status() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let (_, all) = call(&app, "GET", "/api/queue", None, None).await;
    assert_eq!(all.as_array().unwrap().len(), 4);
    let (_, missing) = call(&app, "GET", "/api/queue?status=MISSING", None, None).await;
    let missing = missing.as_array().unwrap();
    assert_eq!(missing.len(), 2);
    assert_eq!(missing[0]["id"], "CL1");
    assert_eq!(missing[0]["source"]["annotation"]["text"], "fever");
    assert_eq!(missing[0]["source"]["annotation"]["attributes"]["modality"], "ACTUAL");
    let (_, flagged) = call(&app, "GET", "/api/queue?status=MISMATCH_CANDIDATE", None, None).await;
    assert_eq!(flagged[0]["id"], "EV1");
    assert_eq!(flagged[0]["text"], "piastrine erano");
    assert_eq!(flagged[0]["source"]["relations"][0]["id"], "R1");
    let (status, _) = call(&app, "GET", "/api/queue?status=OK", None, None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn accept_sets_ok_and_keeps_span() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let (status, body) = call(&app, "POST", "/api/decisions", Some(decision("IT1", "EV1", Action::Accept, None)), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["annotation"]["status"], "OK");
    assert_eq!(body["annotation"]["text"], "piastrine erano");
    assert!(body["decision"]["timestamp"].is_string());
    let (_, docs) = call(&app, "GET", "/api/documents", None, None).await;
    assert_eq!(docs[0]["pending_mismatches"], 0);
}

#[tokio::test]
async fn add_copies_source_attributes() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let span = find(TARGET_TEXT, "febbre");
    let (status, body) = call(&app, "POST", "/api/decisions", Some(decision("IT1", "CL1", Action::Add, Some(span))), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let a = &body["annotation"];
    assert_eq!(a["status"], "OK");
    assert_eq!((a["begin"].as_u64(), a["end"].as_u64()), (Some(span.begin as u64), Some(span.end as u64)));
    assert_eq!(a["text"], "febbre");
    assert_eq!(a["attributes"], json!({"polarity": "POS", "modality": "ACTUAL"}));
}

#[tokio::test]
async fn invalid_decisions_are_rejected() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let post = |v: Value| {
        let app = app.clone();
        async move { call(&app, "POST", "/api/decisions", Some(v), None).await.0 }
    };
    assert_eq!(post(decision("IT1", "EV1", Action::Correct, Some(Span::new(30, 20)))).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(decision("IT1", "EV1", Action::Correct, Some(Span::new(0, 999)))).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(decision("IT1", "EV1", Action::Correct, None)).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(decision("IT1", "CL1", Action::Accept, None)).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(decision("IT1", "EV1", Action::Add, Some(Span::new(0, 2)))).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(decision("IT1", "EV9", Action::Accept, None)).await, StatusCode::NOT_FOUND);
    assert_eq!(post(decision("XX", "EV1", Action::Accept, None)).await, StatusCode::NOT_FOUND);
    assert_eq!(post(json!({"doc_id": "IT1"})).await, StatusCode::UNPROCESSABLE_ENTITY);
    // nothing was journaled
    drop(app);
    let (_, replayed) = annoproj_review::Journal::open(&fx.journal()).unwrap();
    assert!(replayed.is_empty());
}

#[tokio::test]
async fn token_guards_mutations() {
    let fx = Fixture::new();
    let mut cfg = fx.config();
    cfg.token = Some("s3cret".into());
    let app = router(Arc::new(ReviewService::open(&cfg).unwrap()));
    let body = decision("IT1", "EV1", Action::Accept, None);
    assert_eq!(call(&app, "POST", "/api/decisions", Some(body.clone()), None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, "POST", "/api/decisions", Some(body.clone()), Some("wrong")).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, "POST", "/api/decisions", Some(body), Some("s3cret")).await.0, StatusCode::OK);
    assert_eq!(call(&app, "GET", "/api/stats", None, None).await.0, StatusCode::OK);
}

#[tokio::test]
async fn restart_replays_decisions() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let span = find(TARGET_TEXT, "piastrine");
    call(&app, "POST", "/api/decisions", Some(decision("IT1", "EV1", Action::Correct, Some(span))), None).await;
    call(&app, "POST", "/api/decisions", Some(decision("IT2", "CL1", Action::Add, Some(find(TARGET_TEXT, "febbre")))), None).await;
    let (_, before) = call(&app, "GET", "/api/documents", None, None).await;
    drop(app);
    let app = app_for(&fx);
    let (_, after) = call(&app, "GET", "/api/documents", None, None).await;
    assert_eq!(before, after);
    let (_, doc) = call(&app, "GET", "/api/documents/IT1", None, None).await;
    let ev = doc["annotations"].as_array().unwrap().iter().find(|a| a["id"] == "EV1").unwrap().clone();
    assert_eq!(ev["text"], "piastrine");
    assert_eq!(ev["status"], "OK");
    let (_, stats) = call(&app, "GET", "/api/stats", None, None).await;
    assert_eq!((stats["checked"].as_u64(), stats["corrected"].as_u64(), stats["created"].as_u64()), (Some(1), Some(1), Some(1)));
}

#[test]
fn malformed_journal_fails_startup_with_line() {
    let fx = Fixture::new();
    let good = serde_json::to_string(&Decision::new("IT1", "EV1", Action::Accept, "r")).unwrap();
    std::fs::create_dir_all(fx.journal().parent().unwrap()).unwrap();
    std::fs::write(fx.journal(), format!("{good}\n{good}\nnot json\n")).unwrap();
    let err = ReviewService::open(&fx.config()).err().unwrap();
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn journal_entry_invalid_for_corpus_fails_startup() {
    let fx = Fixture::new();
    let bad = serde_json::to_string(&Decision::new("IT1", "EV404", Action::Accept, "r")).unwrap();
    std::fs::create_dir_all(fx.journal().parent().unwrap()).unwrap();
    std::fs::write(fx.journal(), format!("{bad}\n")).unwrap();
    let err = ReviewService::open(&fx.config()).err().unwrap();
    assert!(err.to_string().contains("entry 1"), "{err}");
}

#[tokio::test]
async fn export_without_decisions_reserializes_input() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let out = fx.path("out");
    let (status, stats) = call(&app, "POST", "/api/export", Some(json!({"output_dir": out})), None).await;
    assert_eq!(status, StatusCode::OK, "{stats}");
    assert_eq!(stats["checked"], 0);
    assert_eq!(stats["error_rate"], 0.0);
    assert_eq!(stats["total_mismatches"], 2);
    for name in ["case1.json", "case2.xmi"] {
        assert_eq!(std::fs::read(out.join(name)).unwrap(), std::fs::read(fx.corpus().join(name)).unwrap(), "{name}");
    }
    for name in ["revision.json", "revision.txt", "revision.csv"] {
        assert!(out.join("_reports").join(name).is_file());
    }
}

#[tokio::test]
async fn reject_drops_relations_and_reports_them() {
    let fx = Fixture::new();
    let app = app_for(&fx);
    let (status, body) = call(&app, "POST", "/api/decisions", Some(decision("IT1", "EV1", Action::Reject, None)), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["removed"], true);
    let (_, doc) = call(&app, "GET", "/api/documents/IT1", None, None).await;
    assert!(doc["annotations"].as_array().unwrap().iter().all(|a| a["id"] != "EV1"));
    assert!(doc["relations"].as_array().unwrap().is_empty());
    let out = fx.path("out");
    call(&app, "POST", "/api/export", Some(json!({"output_dir": out})), None).await;
    let report: Value = serde_json::from_slice(&std::fs::read(out.join("_reports/revision.json")).unwrap()).unwrap();
    assert_eq!(report["dangling_relations"], json!([{"doc_id": "IT1", "relations": ["R1"]}]));
    assert_eq!(report["total"]["corrected"], 1);
    // a later decision supersedes the rejection
    call(&app, "POST", "/api/decisions", Some(decision("IT1", "EV1", Action::Accept, None)), None).await;
    let (_, doc) = call(&app, "GET", "/api/documents/IT1", None, None).await;
    assert_eq!(doc["relations"].as_array().unwrap().len(), 1);
}
