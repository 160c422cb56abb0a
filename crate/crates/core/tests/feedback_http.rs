use surf::data::{Segment, SegmentPair};
use surf::envs::EnvKind;
use surf::feedback_api::FeedbackServer;
use surf::runner::{RunStatus, StatusHandle};
use surf::teacher::HumanLabelInbox;
use ureq::Agent;

fn pair(offset: f64) -> SegmentPair {
    let seg = |o: f64| {
        let states: Vec<f64> = (0..5).flat_map(|t| [o + t as f64, -o, 0.0, 0.0]).collect();
        Segment::new(4, 2, states, vec![0.0; 10], vec![0.0; 5], 0, 0).unwrap()
    };
    SegmentPair::new(seg(offset), seg(offset + 1.0)).unwrap()
}

fn client() -> Agent {
    Agent::config_builder().http_status_as_error(false).build().into()
}

fn serve() -> (FeedbackServer, HumanLabelInbox, StatusHandle) {
    let inbox = HumanLabelInbox::new();
    let status = StatusHandle::new(RunStatus { budget: 40, total_steps: 1000, ..RunStatus::default() });
    let server = FeedbackServer::start("127.0.0.1:0", EnvKind::PointMassReach, inbox.clone(), status.clone()).unwrap();
    (server, inbox, status)
}

#[test]
fn empty_queue_is_no_content() {
    let (server, _, _) = serve();
    let resp = client().get(&format!("{}/api/queries/next", server.url())).call().unwrap();
    assert_eq!(resp.status(), 204);
    assert_eq!(resp.headers().get("access-control-allow-origin").unwrap(), "*");
}

#[test]
fn next_query_carries_both_trajectories() {
    let (server, inbox, _) = serve();
    let ids = inbox.issue(vec![pair(0.0), pair(2.0)]);
    let mut resp = client().get(&format!("{}/api/queries/next", server.url())).call().unwrap();
    assert_eq!(resp.status(), 200);
    let body: serde_json::Value = resp.body_mut().read_json().unwrap();
    assert_eq!(body["id"], ids[0]);
    assert_eq!(body["env"], "point_mass_reach");
    assert_eq!(body["segment_length"], 5);
    assert_eq!(body["left"]["points"].as_array().unwrap().len(), 5);
    assert_eq!(body["right"]["points"].as_array().unwrap().len(), 5);
}

#[test]
fn label_errors_map_to_status_codes() {
    let (server, inbox, _) = serve();
    let id = inbox.issue(vec![pair(0.0)])[0];
    let url = format!("{}/api/labels", server.url());
    let agent = client();
    let post = |body: &str| agent.post(&url).content_type("application/json").send(body).unwrap().status().as_u16();
    assert_eq!(post("not json"), 400);
    assert_eq!(post(&format!(r#"{{"id":{id},"choice":"sideways"}}"#)), 400);
    assert_eq!(post(r#"{"id":999,"choice":"left"}"#), 404);
    assert_eq!(post(&format!(r#"{{"id":{id},"choice":"equal"}}"#)), 200);
    assert_eq!(post(&format!(r#"{{"id":{id},"choice":"left"}}"#)), 409);
    assert_eq!(inbox.collect().unwrap().len(), 1);
}

#[test]
fn status_reflects_run_and_queue() {
    let (server, inbox, status) = serve();
    inbox.issue(vec![pair(0.0), pair(1.0), pair(2.0)]);
    status.update(|s| {
        s.step = 250;
        s.labels_used = 10;
    });
    let mut resp = client().get(&format!("{}/api/status", server.url())).call().unwrap();
    let body: serde_json::Value = resp.body_mut().read_json().unwrap();
    assert_eq!(body["step"], 250);
    assert_eq!(body["labels_used"], 10);
    assert_eq!(body["budget"], 40);
    assert_eq!(body["pending_queries"], 3);
}

#[test]
fn preflight_and_wrong_method() {
    let (server, _, _) = serve();
    let agent = client();
    let resp = agent.options(&format!("{}/api/labels", server.url())).call().unwrap();
    assert_eq!(resp.status(), 204);
    assert!(resp.headers().get("access-control-allow-methods").is_some());
    let resp = agent.delete(&format!("{}/api/status", server.url())).call().unwrap();
    assert_eq!(resp.status(), 405);
    let resp = agent.get(&format!("{}/api/nowhere", server.url())).call().unwrap();
    assert_eq!(resp.status(), 404);
}

#[test]
fn shutdown_releases_the_port() {
    let (server, _, _) = serve();
    let addr = server.addr();
    server.shutdown();
    // the acceptor thread lets go of the socket shortly after shutdown
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(5);
    while std::net::TcpListener::bind(addr).is_err() {
        assert!(std::time::Instant::now() < deadline, "port {addr} still bound");
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
}
