use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use telekit::api::{router, ApiConfig};
use telekit_core::forge::items::{BenchItem, ItemRecord, McqCategory, McqItem, TdocClassItem, WorkingGroup};
use telekit_core::pipeline::ReviewStore;
use tower::ServiceExt;

fn mcq(q: &str) -> McqItem {
    McqItem {
        question: q.into(),
        options: vec!["PUCCH".into(), "PDSCH".into(), "PBCH".into()],
        answer_index: 1,
        explanation: String::new(),
        category: McqCategory::StandardsSpecifications,
    }
}

fn items() -> Vec<ItemRecord> {
    let mut v: Vec<ItemRecord> = (0..12)
        .map(|i| {
            ItemRecord::new(
                format!("m{i:02}"),
                BenchItem::Mcq(mcq(&format!("Which channel {i}?"))),
                true,
            )
        })
        .collect();
    v.push(ItemRecord::new(
        "flagged",
        BenchItem::Mcq(mcq("What does the proposed scheme improve?")),
        true,
    ));
    v.push(ItemRecord::new(
        "t0",
        BenchItem::Tdoc(TdocClassItem {
            text: "segment".into(),
            label: WorkingGroup::RAN1,
        }),
        false,
    ));
    v
}

fn config(token: Option<&str>) -> ApiConfig {
    ApiConfig {
        token: token.map(str::to_string),
        clock: Arc::new(|| "2024-01-01T00:00:00.000Z".to_string()),
        ..ApiConfig::default()
    }
}

fn app(journal: &Path, cfg: ApiConfig) -> Router {
    let store = ReviewStore::with_items(items(), journal).unwrap();
    router(Arc::new(store), cfg)
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    token: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn ids(v: &Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap().to_string())
        .collect()
}

fn decision(id: &str, verdict: &str) -> Value {
    json!({"item_id": id, "verdict": verdict, "reviewer": "alice"})
}

#[tokio::test]
async fn accept_removes_item_from_queue() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("journal.jsonl"), config(None));

    let (s, q) = call(&app, Method::GET, "/api/queue", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(q.as_array().unwrap().len(), 13);
    let (_, q) = call(&app, Method::GET, "/api/queue?kind=mcq&limit=3", None, None).await;
    assert_eq!(ids(&q), ["m00", "m01", "m02"]);
    let (_, q) = call(&app, Method::GET, "/api/queue?kind=tdoc", None, None).await;
    assert!(q.as_array().unwrap().is_empty());

    let (s, d) = call(
        &app,
        Method::POST,
        "/api/decisions",
        Some(decision("m00", "accept")),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(d["timestamp"], "2024-01-01T00:00:00.000Z");
    let (_, q) = call(&app, Method::GET, "/api/queue?limit=2", None, None).await;
    assert_eq!(ids(&q), ["m01", "m02"]);

    let (s, e) = call(
        &app,
        Method::POST,
        "/api/decisions",
        Some(decision("m00", "reject")),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(e["error"], "already-decided");
}

#[tokio::test]
async fn banned_tokens_are_flagged_in_the_queue() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("journal.jsonl"), config(None));
    let (_, q) = call(&app, Method::GET, "/api/queue", None, None).await;
    let flagged: Vec<&Value> = q
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e.get("banned_tokens").is_some())
        .collect();
    assert_eq!(flagged.len(), 1);
    assert_eq!(flagged[0]["id"], "flagged");
    assert_eq!(flagged[0]["banned_tokens"], json!(["proposed"]));
}

#[tokio::test]
async fn malformed_and_invalid_decisions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let app = app(&journal, config(None));

    let (s, e) = call(
        &app,
        Method::POST,
        "/api/decisions",
        Some(json!({"item_id": "m00"})),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["error"], "malformed-decision");
    let (s, _) = call(
        &app,
        Method::POST,
        "/api/decisions",
        Some(json!({"item_id": "m00", "verdict": "maybe", "reviewer": "a"})),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mut bad = mcq("Which channel?");
    bad.answer_index = 7;
    let mut edit = decision("m00", "edit");
    edit["edited_item"] = serde_json::to_value(BenchItem::Mcq(bad)).unwrap();
    let (s, e) = call(&app, Method::POST, "/api/decisions", Some(edit), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"], "invalid-edit");

    let (s, e) = call(
        &app,
        Method::POST,
        "/api/decisions",
        Some(decision("nope", "accept")),
        None,
    )
    .await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown-item")));
    let (s, e) = call(
        &app,
        Method::POST,
        "/api/decisions",
        Some(decision("t0", "accept")),
        None,
    )
    .await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::CONFLICT, Some("not-reviewable")));

    assert_eq!(std::fs::read_to_string(&journal).unwrap(), "");
    let (_, q) = call(&app, Method::GET, "/api/queue", None, None).await;
    assert_eq!(q.as_array().unwrap().len(), 13);
}

#[tokio::test]
async fn export_and_stats_follow_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("journal.jsonl"), config(None));
    for (id, verdict) in [
        ("m00", "accept"),
        ("m01", "accept"),
        ("m02", "accept"),
        ("m03", "reject"),
    ] {
        let (s, _) = call(&app, Method::POST, "/api/decisions", Some(decision(id, verdict)), None).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    let mut edited = mcq("Which uplink channel carries HARQ-ACK?");
    edited.answer_index = 1;
    let mut edit = decision("m04", "edit");
    edit["edited_item"] = serde_json::to_value(BenchItem::Mcq(edited)).unwrap();
    let (s, _) = call(&app, Method::POST, "/api/decisions", Some(edit), None).await;
    assert_eq!(s, StatusCode::CREATED);

    let (_, x) = call(&app, Method::GET, "/api/export?kind=mcq", None, None).await;
    assert_eq!(ids(&x), ["m00", "m01", "m02", "m04"]);
    assert_eq!(x[3]["question"], "Which uplink channel carries HARQ-ACK?");
    let (_, x) = call(
        &app,
        Method::GET,
        "/api/export?kind=mcq&include_pending=true",
        None,
        None,
    )
    .await;
    assert_eq!(x.as_array().unwrap().len(), 12);
    let (_, x) = call(&app, Method::GET, "/api/export", None, None).await;
    assert_eq!(x.as_array().unwrap().len(), 5, "accepted + edited + the auto tdoc item");
    let (_, x) = call(&app, Method::GET, "/api/export?kind=open-qa", None, None).await;
    assert_eq!(x.as_array().unwrap().len(), 4);

    let (s, st) = call(&app, Method::GET, "/api/stats", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        st,
        json!({"total": 14, "pending": 8, "accepted": 3, "rejected": 1, "edited": 1, "auto": 1})
    );
}

#[tokio::test]
async fn restart_replays_the_journal() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let before = {
        let app = app(&journal, config(None));
        for i in 0..10 {
            let verdict = if i % 3 == 0 { "reject" } else { "accept" };
            let (s, _) = call(
                &app,
                Method::POST,
                "/api/decisions",
                Some(decision(&format!("m{i:02}"), verdict)),
                None,
            )
            .await;
            assert_eq!(s, StatusCode::CREATED);
        }
        let (_, q) = call(&app, Method::GET, "/api/queue", None, None).await;
        let (_, x) = call(&app, Method::GET, "/api/export", None, None).await;
        let (_, st) = call(&app, Method::GET, "/api/stats", None, None).await;
        (q, x, st)
    };
    let app = app(&journal, config(None));
    let (_, q) = call(&app, Method::GET, "/api/queue", None, None).await;
    let (_, x) = call(&app, Method::GET, "/api/export", None, None).await;
    let (_, st) = call(&app, Method::GET, "/api/stats", None, None).await;
    assert_eq!((q, x, st), before);
    assert_eq!(std::fs::read_to_string(&journal).unwrap().lines().count(), 10);
}

#[tokio::test]
async fn bearer_token_guards_the_api_only() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("ui");
    std::fs::create_dir(&assets).unwrap();
    std::fs::write(assets.join("index.html"), "<!doctype html><title>review</title>").unwrap();
    let cfg = ApiConfig {
        static_dir: Some(assets),
        ..config(Some("s3cret"))
    };
    let app = app(&dir.path().join("journal.jsonl"), cfg);

    let (s, e) = call(&app, Method::GET, "/api/stats", None, None).await;
    assert_eq!(
        (s, e["error"].as_str()),
        (StatusCode::UNAUTHORIZED, Some("unauthorized"))
    );
    let (s, _) = call(&app, Method::GET, "/api/stats", None, Some("wrong")).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = call(
        &app,
        Method::POST,
        "/api/decisions",
        Some(decision("m00", "accept")),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, st) = call(&app, Method::GET, "/api/stats", None, Some("s3cret")).await;
    assert_eq!((s, st["accepted"].as_u64()), (StatusCode::OK, Some(0)));

    let (s, page) = call(&app, Method::GET, "/", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(page.as_str().unwrap().contains("<title>review</title>"));
    let (s, _) = call(&app, Method::GET, "/missing.js", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, e) = call(&app, Method::GET, "/api/nope", None, Some("s3cret")).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::NOT_FOUND, Some("not-found")));
}

#[tokio::test]
async fn empty_token_disables_auth() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("journal.jsonl"), config(Some("")));
    let (s, _) = call(&app, Method::GET, "/api/stats", None, None).await;
    assert_eq!(s, StatusCode::OK);
}
