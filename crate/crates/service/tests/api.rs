use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use seqdiag_core::dpi::Dpi;
use seqdiag_core::query::Heuristic;
use seqdiag_core::session::{run_session, Engine, Outcome, ScriptedOracle, SessionConfig};
use seqdiag_service::router;
use seqdiag_service::store::{Store, StoreConfig};

const EXAMPLE: &str = include_str!("../../../data/running-example.json");
const FAULT_FREE: &str = include_str!("../../../data/fault-free.json");

fn app() -> Router {
    router(Arc::new(Store::new(StoreConfig::default())))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn raw_post(app: &Router, uri: &str, body: &str) -> StatusCode {
    let req = Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    app.clone().oneshot(req).await.unwrap().status()
}

fn example() -> Value {
    serde_json::from_str(EXAMPLE).unwrap()
}

async fn create(app: &Router, body: Value) -> Value {
    let (status, state) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{state}");
    state
}

fn ids(v: &Value) -> Vec<Vec<String>> {
    serde_json::from_value(v.clone()).unwrap()
}

#[tokio::test]
async fn first_iteration_shows_four_diagnoses_and_a_query() {
    let app = app();
    let state = create(&app, json!({"dpi": example(), "ld": 5})).await;
    assert_eq!(
        ids(&state["leadingDiagnoses"]),
        vec![
            vec!["ax1", "ax3"],
            vec!["ax1", "ax4"],
            vec!["ax2", "ax3"],
            vec!["ax2", "ax5"]
        ]
    );
    let weights: Vec<f64> = serde_json::from_value(state["weights"].clone()).unwrap();
    assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(state["query"].is_string());
    assert_eq!(state["status"], "awaitingAnswer");
    assert!(state["final"].is_null());
    let details = &state["queryDetails"];
    assert!(!details["dPlus"].as_array().unwrap().is_empty());
    assert!(!details["dMinus"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn scripted_measurements_isolate_the_target() {
    let app = app();
    let body = json!({
        "dpi": example(), "ld": 5, "engine": "dynamichs",
        "script": ["A -> C", "A -> !B", "A -> !C"]
    });
    let state = create(&app, body).await;
    let id = state["sessionId"].as_str().unwrap().to_string();
    assert_eq!(state["query"], "A -> C");
    let mut last = state;
    for outcome in ["negative", "negative", "positive"] {
        let (status, next) = call(
            &app,
            Method::POST,
            &format!("/sessions/{id}/answer"),
            Some(json!({"outcome": outcome})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{next}");
        let before = ids(&last["leadingDiagnoses"]);
        let after = ids(&next["leadingDiagnoses"]);
        assert!(after.len() < before.len() || after != before);
        last = next;
    }
    assert_eq!(last["status"], "final");
    assert_eq!(last["final"], json!(["ax1", "ax4"]));

    let (status, err) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/answer"),
        Some(json!({"outcome": "positive"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(err["error"].is_string());

    let (status, stats) = call(&app, Method::GET, &format!("/sessions/{id}/stats"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stats["measurements"], 3);
    assert_eq!(stats["calls"]["hardCalls"], 6);
    assert_eq!(stats["calls"]["mediumCalls"], 5);
    assert_eq!(stats["calls"]["easyCalls"], 4);
    assert_eq!(stats["tree"]["nodesGenerated"], 19);
}

#[tokio::test]
async fn service_and_replay_oracle_produce_the_same_diagnosis_lists() {
    for engine in [Engine::HsTree, Engine::DynamicHs] {
        for heuristic in Heuristic::ALL {
            let app = app();
            let state = create(
                &app,
                json!({"dpi": example(), "ld": 4, "heuristic": heuristic, "engine": engine}),
            )
            .await;
            let id = state["sessionId"].as_str().unwrap().to_string();
            // answer every query positively until the session ends
            let mut answers = Vec::new();
            let mut state = state;
            while state["status"] == "awaitingAnswer" {
                answers.push(Outcome::Positive);
                let (status, next) = call(
                    &app,
                    Method::POST,
                    &format!("/sessions/{id}/answer"),
                    Some(json!({"outcome": "positive"})),
                )
                .await;
                assert_eq!(status, StatusCode::OK);
                state = next;
            }
            let (_, stats) = call(&app, Method::GET, &format!("/sessions/{id}/stats"), None).await;
            let served: Vec<Value> = stats["history"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| r["leadingDiagnoses"].clone())
                .collect();

            let config = SessionConfig::new(Dpi::from_json(EXAMPLE).unwrap(), 4, heuristic, engine);
            let local = run_session(config, &mut ScriptedOracle::new(answers)).unwrap();
            let replayed: Vec<Value> = local
                .history()
                .iter()
                .map(|r| serde_json::to_value(&r.leading_diagnoses).unwrap())
                .collect();
            assert_eq!(
                serde_json::to_string(&served).unwrap(),
                serde_json::to_string(&replayed).unwrap(),
                "{engine} {heuristic}"
            );
        }
    }
}

#[tokio::test]
async fn counters_never_decrease_between_polls() {
    let app = app();
    let state = create(&app, json!({"dpi": example(), "ld": 5, "heuristic": "spl"})).await;
    let id = state["sessionId"].as_str().unwrap().to_string();
    let (_, fresh) = call(&app, Method::GET, &format!("/sessions/{id}/stats"), None).await;
    assert_eq!(fresh["measurements"], 0);
    let mut previous = fresh["calls"].clone();
    for _ in 0..2 {
        let (_, s) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
        if s["status"] != "awaitingAnswer" {
            break;
        }
        call(
            &app,
            Method::POST,
            &format!("/sessions/{id}/answer"),
            Some(json!({"outcome": "negative"})),
        )
        .await;
        let (_, stats) = call(&app, Method::GET, &format!("/sessions/{id}/stats"), None).await;
        for key in ["hardCalls", "mediumCalls", "easyCalls"] {
            assert!(stats["calls"][key].as_u64() >= previous[key].as_u64());
        }
        previous = stats["calls"].clone();
    }
}

#[tokio::test]
async fn request_errors() {
    let app = app();
    let (status, _) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"dpi": example(), "ld": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let fault_free: Value = serde_json::from_str(FAULT_FREE).unwrap();
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"dpi": fault_free, "ld": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("fault-free"));
    assert_eq!(raw_post(&app, "/sessions", "{not json").await, StatusCode::BAD_REQUEST);
    let bad_formula = json!({"dpi": {"components": [{"id": "c1", "formula": "A ->"}]}, "ld": 2});
    let (status, body) = call(&app, Method::POST, "/sessions", Some(bad_formula)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("c1"));
    let (status, _) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"dpi": example(), "ld": 3, "engine": "quantum"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let state = create(&app, json!({"dpi": example(), "ld": 3})).await;
    let id = state["sessionId"].as_str().unwrap().to_string();
    assert_eq!(
        raw_post(&app, &format!("/sessions/{id}/answer"), r#"{"outcome":"maybe"}"#).await,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn deleted_sessions_are_gone() {
    let app = app();
    let state = create(&app, json!({"dpi": example(), "ld": 3})).await;
    let id = state["sessionId"].as_str().unwrap().to_string();
    let (status, again) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, state);
    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    for uri in [format!("/sessions/{id}"), format!("/sessions/{id}/stats")] {
        assert_eq!(call(&app, Method::GET, &uri, None).await.0, StatusCode::NOT_FOUND);
    }
    assert_eq!(
        call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await.0,
        StatusCode::NOT_FOUND
    );
    let (status, _) = call(
        &app,
        Method::POST,
        "/sessions/nope/answer",
        Some(json!({"outcome": "positive"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_proceed_concurrently() {
    let app = app();
    let mut handles = Vec::new();
    for i in 0..8 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let h = Heuristic::ALL[i % 3];
            let state = create(&app, json!({"dpi": example(), "ld": 2 + i % 4, "heuristic": h})).await;
            let id = state["sessionId"].as_str().unwrap().to_string();
            let mut state = state;
            while state["status"] == "awaitingAnswer" {
                let (_, next) = call(
                    &app,
                    Method::POST,
                    &format!("/sessions/{id}/answer"),
                    Some(json!({"outcome": "negative"})),
                )
                .await;
                state = next;
            }
            state["status"].as_str().unwrap().to_string()
        }));
    }
    for h in handles {
        let status = tokio::time::timeout(Duration::from_secs(30), h).await.unwrap().unwrap();
        assert_ne!(status, "awaitingAnswer");
    }
}
