use std::path::PathBuf;
use std::time::{Duration, Instant};

use alea_core::dataset::{Dataset, EntityId, KnowledgeGraph};
use alea_core::engine::Flag;
use alea_core::synth::{isomorphic_pair, SynthConfig};
use alea_core::{run_campaign, Campaign, CampaignConfig, Strategy};
use alea_service::{router, AppState, LabelOutcome, Phase, Queries, Session, StateSummary};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn toy() -> Dataset {
    isomorphic_pair(&SynthConfig {
        entities: 60,
        bachelor_fraction: 10.0 / 60.0,
        seed: 1,
        ..Default::default()
    })
    .unwrap()
}

fn config(strategy: Strategy) -> CampaignConfig {
    let mut c = CampaignConfig {
        strategy,
        budget: 30,
        batch_size: 10,
        seed: 2,
        ..Default::default()
    };
    c.recognizer.input_dim = 64;
    c.recognizer.output_dim = 32;
    c
}

fn open(cfg: CampaignConfig, dir: Option<PathBuf>, resume: bool) -> Router {
    let data = toy();
    let (kg1, kg2) = (data.kg1.clone(), data.kg2.clone());
    let session = Session::open(data, cfg, dir, resume, 10).unwrap();
    router(AppState::new(session, kg1, kg2))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn state(app: &Router) -> StateSummary {
    serde_json::from_value(call(app, "GET", "/api/state", None).await.1).unwrap()
}

async fn queries(app: &Router) -> Queries {
    serde_json::from_value(call(app, "GET", "/api/queries", None).await.1).unwrap()
}

async fn wait_idle(app: &Router) -> StateSummary {
    let start = Instant::now();
    loop {
        let s = state(app).await;
        if s.phase != Phase::Busy {
            return s;
        }
        assert!(start.elapsed() < Duration::from_secs(300), "engine stayed busy");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

/// The gold answer for a KG1 uri, in wire form.
fn gold(data: &Dataset, uri: &str) -> Value {
    let e = data.kg1.entity(uri).unwrap();
    match data.store.counterpart(e) {
        Some(b) => json!({ "counterpart": data.kg2.uri(b) }),
        None => json!("bachelor"),
    }
}

async fn label(app: &Router, query: &str, outcome: Value) -> (StatusCode, Value) {
    call(app, "POST", "/api/labels", Some(json!({ "query": query, "outcome": outcome }))).await
}

async fn answer_all(app: &Router, data: &Dataset) {
    loop {
        let s = wait_idle(app).await;
        if s.phase == Phase::Finished {
            return;
        }
        assert_eq!(s.phase, Phase::Ready);
        for card in queries(app).await.queries {
            let (status, _) = label(app, &card.entity, gold(data, &card.entity)).await;
            assert_eq!(status, StatusCode::OK);
        }
    }
}

#[tokio::test]
async fn fresh_session_state() {
    let app = open(config(Strategy::Random), None, false);
    let s = state(&app).await;
    assert_eq!(s.phase, Phase::Ready);
    assert_eq!((s.iteration, s.budget, s.remaining, s.spent, s.answered), (0, 30, 30, 0, 0));
    assert_eq!(s.pending, 10);
    assert_eq!(s.strategy, "rand");
    assert!(s.last.is_none());
}

#[tokio::test]
async fn candidates_follow_model_ranking() {
    let cfg = config(Strategy::Uncertainty);
    let app = open(cfg.clone(), None, false);
    let q = queries(&app).await;
    assert_eq!(q.queries.len(), 10);

    // An identical campaign run in-process selects the same batch with the same model.
    let data = toy();
    let mut shadow = Campaign::new(data.clone(), cfg).unwrap();
    let batch = shadow.propose().unwrap().unwrap().entities.clone();
    let cols = shadow.open_columns();
    for (card, e) in q.queries.iter().zip(&batch) {
        assert_eq!(card.entity, data.kg1.uri(*e));
        assert!(card.candidates.len() <= 10);
        let s = shadow.model().score_matrix(&[*e], &cols).unwrap();
        let mut row: Vec<(f64, EntityId)> = s.row(0).iter().copied().zip(s.cols().iter().copied()).collect();
        row.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (i, c) in card.candidates.iter().enumerate() {
            assert_eq!(c.rank, i + 1);
            assert_eq!(c.entity, data.kg2.uri(row[i].1));
            assert_eq!(c.score, row[i].0);
        }
        assert!(!card.context.is_empty());
        assert!(card.answer.is_none());
    }
}

#[tokio::test]
async fn label_errors_and_idempotency() {
    let data = toy();
    let app = open(config(Strategy::Random), None, false);
    let cards = queries(&app).await.queries;
    let matchable: Vec<_> = cards
        .iter()
        .filter(|c| data.store.counterpart(data.kg1.entity(&c.entity).unwrap()).is_some())
        .collect();
    let first = matchable[0];
    let answer = gold(&data, &first.entity);

    let (status, ack) = label(&app, &first.entity, answer.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["status"], "recorded");
    assert_eq!(ack["remaining"], 29);

    let (status, ack) = label(&app, &first.entity, answer.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["status"], "duplicate");
    assert_eq!(ack["remaining"], 29);
    assert_eq!(state(&app).await.remaining, 29);

    let (status, err) = label(&app, &first.entity, json!("bachelor")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "conflicting_label");

    // Second query claims the first one's counterpart.
    let (status, err) = label(&app, &matchable[1].entity, answer).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "one_to_one_violation");

    let (status, err) = label(&app, "kg1/nope", json!("bachelor")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "unknown_entity");

    let (status, err) = label(&app, &first.entity, json!({ "counterpart": "kg2/nope" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "unknown_entity");

    let outside = data
        .kg1
        .entity_ids()
        .map(|e| data.kg1.uri(e).to_string())
        .find(|u| cards.iter().all(|c| &c.entity != u))
        .unwrap();
    let (status, err) = label(&app, &outside, json!("bachelor")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "not_in_batch");

    let (status, err) = call(&app, "POST", "/api/labels", Some(json!({ "query": 3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "bad_request");

    let q = queries(&app).await;
    let shown = q.queries.iter().find(|c| c.entity == first.entity).unwrap();
    assert!(matches!(shown.answer, Some(LabelOutcome::Counterpart(_))));
}

#[tokio::test]
async fn completing_a_batch_advances() {
    let data = toy();
    let app = open(config(Strategy::Random), None, false);
    let cards = queries(&app).await.queries;
    for (i, card) in cards.iter().enumerate() {
        let (status, ack) = label(&app, &card.entity, gold(&data, &card.entity)).await;
        assert_eq!(status, StatusCode::OK);
        let expect = if i + 1 == cards.len() { "iteration_advancing" } else { "recorded" };
        assert_eq!(ack["status"], expect);
    }
    let s = wait_idle(&app).await;
    assert_eq!((s.iteration, s.spent, s.remaining, s.answered), (1, 10, 20, 0));
    assert!(s.last.unwrap().hit_at_1.is_some());
    let next = queries(&app).await.queries;
    assert_eq!(next.len(), 10);
    assert!(next.iter().all(|c| cards.iter().all(|o| o.entity != c.entity)));
}

#[tokio::test]
async fn human_log_equals_simulated_log() {
    for strategy in [Strategy::StructUncertainty, Strategy::ActiveEa] {
        let data = toy();
        let data2 = data.clone();
        let (kg1, kg2) = (data.kg1.clone(), data.kg2.clone());
        let session = Session::open(data.clone(), config(strategy), None, false, 10).unwrap();
        let state_handle = AppState::new(session, kg1, kg2);
        let app = router(state_handle.clone());
        answer_all(&app, &data).await;
        let human = state_handle.session().log().unwrap().without_timing();
        let simulated = run_campaign(data2, config(strategy)).unwrap().without_timing();
        assert_eq!(human.to_jsonl(), simulated.to_jsonl(), "{strategy}");
        assert_eq!(human.records.len(), 3);
    }
}

#[tokio::test]
async fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy();
    let cfg = config(Strategy::StructUncertainty);
    let before;
    let cards_before;
    {
        let app = open(cfg.clone(), Some(dir.path().into()), false);
        let cards = queries(&app).await.queries;
        for card in &cards {
            label(&app, &card.entity, gold(&data, &card.entity)).await;
        }
        wait_idle(&app).await;
        for card in queries(&app).await.queries.iter().take(3) {
            label(&app, &card.entity, gold(&data, &card.entity)).await;
        }
        before = state(&app).await;
        cards_before = queries(&app).await;
    }
    assert_eq!((before.iteration, before.remaining, before.answered), (1, 17, 3));

    let app = open(cfg.clone(), Some(dir.path().into()), true);
    assert_eq!(state(&app).await, before);
    assert_eq!(queries(&app).await, cards_before);

    answer_all(&app, &data).await;
    let resumed = serde_json::from_slice::<alea_core::engine::CampaignSnapshot>(
        &std::fs::read(dir.path().join(alea_service::SNAPSHOT_FILE)).unwrap(),
    )
    .unwrap()
    .log
    .without_timing();
    let straight = run_campaign(toy(), cfg).unwrap().without_timing();
    assert_eq!(resumed.to_jsonl(), straight.to_jsonl());
}

#[tokio::test]
async fn resume_without_snapshot_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Session::open(toy(), config(Strategy::Random), Some(dir.path().into()), true, 10).is_err());
    assert!(Session::open(toy(), config(Strategy::Random), None, true, 10).is_err());
}

#[tokio::test]
async fn forced_advance_commits_partial_batch() {
    let data = toy();
    let app = open(config(Strategy::Random), None, false);
    let cards = queries(&app).await.queries;
    for card in &cards[..2] {
        label(&app, &card.entity, gold(&data, &card.entity)).await;
    }
    let (status, ack) = call(&app, "POST", "/api/admin/advance", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["answered"], 2);
    let s = wait_idle(&app).await;
    assert_eq!((s.iteration, s.spent, s.remaining), (1, 2, 28));
    let next = queries(&app).await.queries;
    assert_eq!(next.len(), 10);
}

#[tokio::test]
async fn forced_advance_is_flagged_in_log() {
    let data = toy();
    let (kg1, kg2) = (data.kg1.clone(), data.kg2.clone());
    let handle = AppState::new(Session::open(data.clone(), config(Strategy::Random), None, false, 10).unwrap(), kg1, kg2);
    let app = router(handle.clone());
    let card = queries(&app).await.queries.remove(0);
    label(&app, &card.entity, gold(&data, &card.entity)).await;
    call(&app, "POST", "/api/admin/advance", None).await;
    wait_idle(&app).await;
    let session = handle.session();
    let record = &session.log().unwrap().records[0];
    assert!(record.flags.contains(&Flag::ForcedAdvance));
    assert_eq!(record.answers.len(), 1);
}

#[tokio::test]
async fn context_and_search() {
    let data = toy();
    let app = open(config(Strategy::Random), None, false);
    let (status, ctx) = call(&app, "GET", "/api/entities/kg1%2Fe0/context", None).await;
    assert_eq!(status, StatusCode::OK);
    let e0 = data.kg1.entity("kg1/e0").unwrap();
    let expected = data.kg1.out_edges(e0).len() + data.kg1.in_edges(e0).len();
    assert_eq!(ctx["context"].as_array().unwrap().len(), expected);
    assert_eq!(ctx["side"], 1);

    let (status, ctx2) = call(&app, "GET", "/api/entities/kg1/e0/context", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctx, ctx2);

    let any2 = data.kg2.uri(EntityId(0)).to_string();
    let (status, _) = call(&app, "GET", &format!("/api/entities/{any2}/context?side=2"), None).await;
    assert_eq!(status, StatusCode::OK);

    let (status, err) = call(&app, "GET", "/api/entities/kg1/zzz/context", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "unknown_entity");
    let (status, _) = call(&app, "GET", "/api/entities/kg1/e0/context?side=3", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, res) = call(&app, "GET", "/api/search?side=2&q=X1&limit=50", None).await;
    assert_eq!(status, StatusCode::OK);
    let hits = res["results"].as_array().unwrap();
    assert!(!hits.is_empty());
    assert!(hits.iter().all(|h| h["entity"].as_str().unwrap().contains("x1") && h["available"] == true));

    // A pending counterpart answer makes the target unavailable.
    let card = queries(&app)
        .await
        .queries
        .into_iter()
        .find(|c| data.store.counterpart(data.kg1.entity(&c.entity).unwrap()).is_some())
        .unwrap();
    let target = data.kg2.uri(data.store.counterpart(data.kg1.entity(&card.entity).unwrap()).unwrap()).to_string();
    label(&app, &card.entity, json!({ "counterpart": target })).await;
    let (_, res) = call(&app, "GET", &format!("/api/search?q={target}"), None).await;
    let hit = res["results"].as_array().unwrap().iter().find(|h| h["entity"] == target.as_str()).unwrap().clone();
    assert_eq!(hit["available"], false);

    let (_, res) = call(&app, "GET", "/api/search?side=1&q=kg1/e1", None).await;
    assert!(res["results"].as_array().unwrap().iter().all(|h| h["available"].is_null()));
}

#[test]
fn isolated_entity_has_empty_context() {
    let kg = KnowledgeGraph::from_parts(vec!["a".into(), "b".into()], vec!["r".into()], vec![]).unwrap();
    assert!(alea_service::neighbourhood(&kg, EntityId(0)).is_empty());
}

#[test]
fn busy_session_rejects_labels() {
    let data = toy();
    let mut session = Session::open(data.clone(), config(Strategy::Random), None, false, 10).unwrap();
    let (campaign, _) = session.begin_advance().unwrap();
    assert_eq!(session.state().phase, Phase::Busy);
    assert!(session.queries().queries.is_empty());
    let err = session.record("kg1/e0", &LabelOutcome::Bachelor).unwrap_err();
    assert_eq!(err.code(), "busy");
    session.finish_advance(campaign, Err(alea_service::ApiError::BadRequest("stop".into())));
    assert_eq!(session.state().phase, Phase::Failed);
}
