mod support;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use scenebench_core::closed_loop::{
    metrics, run_episode, run_suite, Agent, AgentError, AgentSpec, DriveConfig, EpisodeError,
    FixedAgent, Observation, RemoteAgent, RemoteSettings, Termination,
};
use scenebench_core::dynamics::KEEP_STRAIGHT;
use scenebench_core::synth::{synth_scenario, synthetic_suite};

use support::inside_polygon;

/// Minimal HTTP/1.1 server answering every request via `reply(index, body)`
/// with `(status, body)`.
fn serve<F>(reply: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(usize, &str) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/act", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, text) = reply(n, &String::from_utf8_lossy(&body));
            let resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (url, hits)
}

fn obs() -> Observation {
    Observation {
        scenario: "s".into(),
        step: 5,
        image: Some(vec![1, 2, 3]),
        prompt: "p".into(),
        options: Vec::new(),
    }
}

fn settings(retries: u32) -> RemoteSettings {
    RemoteSettings {
        timeout_s: 5.0,
        retries,
    }
}

#[test]
fn remote_agent_sends_protocol_fields() {
    let (url, _) = serve(|_, body| {
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        let ok = v["image"] == "AQID" && v["prompt"] == "p" && v["meta"]["scenario"] == "s" && v["meta"]["step"] == 5;
        (200, serde_json::json!({ "text": if ok { "KEEP_STRAIGHT" } else { "bad" } }).to_string())
    });
    let mut agent = RemoteAgent::new(&url, &settings(0));
    assert_eq!(agent.decide(&obs()).unwrap(), "KEEP_STRAIGHT");
}

#[test]
fn echo_server_drives_straight() {
    let (url, hits) = serve(|_, _| (200, r#"{"text":"KEEP_STRAIGHT"}"#.into()));
    let s = synth_scenario("straight_road", 1).unwrap();
    let mut agent = RemoteAgent::new(&url, &settings(0));
    let r = run_episode(&s, &mut agent, "remote", &DriveConfig::default()).unwrap();
    assert!(r.steps.iter().all(|d| d.parsed.as_deref() == Some(KEEP_STRAIGHT)));
    assert_eq!(hits.load(Ordering::SeqCst), r.steps.len());
}

#[test]
fn server_errors_are_retried() {
    let (url, hits) = serve(|n, _| {
        if n < 2 {
            (503, "{}".into())
        } else {
            (200, r#"{"text":"(B)"}"#.into())
        }
    });
    let mut agent = RemoteAgent::new(&url, &settings(2));
    assert_eq!(agent.decide(&obs()).unwrap(), "(B)");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn missing_text_is_malformed() {
    let (url, _) = serve(|_, _| (200, r#"{"answer":"A"}"#.into()));
    let mut agent = RemoteAgent::new(&url, &settings(3));
    assert!(matches!(agent.decide(&obs()), Err(AgentError::MalformedReply(_))));
}

#[test]
fn dead_endpoint_is_unreachable_and_aborts() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/act");
    let mut agent = RemoteAgent::new(&url, &settings(1));
    assert!(matches!(
        agent.decide(&obs()),
        Err(AgentError::Unreachable { attempts: 2, .. })
    ));
    let suite = synthetic_suite(0);
    let out = run_suite(&suite[..2], &AgentSpec::Remote(url), &settings(0), &DriveConfig::default(), 1, 1);
    assert!(out.iter().all(|o| matches!(o, Err(EpisodeError::Agent { .. }))));
}

#[test]
fn baselines_on_the_suite() {
    let suite = synthetic_suite(0);
    let cfg = DriveConfig::default();
    for spec in [AgentSpec::Straight, AgentSpec::Brake, AgentSpec::Random] {
        let results: Vec<_> = run_suite(&suite, &spec, &settings(0), &cfg, 3, 2)
            .into_iter()
            .map(Result::unwrap)
            .collect();
        for (s, r) in suite.iter().zip(&results) {
            if r.termination == Termination::Horizon {
                assert_eq!(r.steps.len(), s.horizon.div_ceil(5));
            } else {
                let end = *r.driven_traj.last().unwrap();
                assert!(!s.drivable.iter().any(|p| inside_polygon(end, p)));
            }
            let start_speed = s.ego_track().states[0].speed;
            if spec == AgentSpec::Brake && start_speed == 0.0 {
                assert!(r.traveled < 1.0);
            }
        }
        let m = metrics(&results).unwrap();
        for rate in [m.route_completion, m.collision_rate, m.off_road_rate, m.parse_fail_rate] {
            assert!((0.0..=1.0).contains(&rate));
        }
        assert_eq!(m.parse_fail_rate, 0.0);
    }
}

#[test]
fn straight_baseline_follows_the_straight_road() {
    let s = synth_scenario("straight_road", 7).unwrap();
    let mut agent = FixedAgent(KEEP_STRAIGHT.into());
    let r = run_episode(&s, &mut agent, "straight", &DriveConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::Horizon);
    assert!(!r.collided);
    assert!(r.traveled / r.route_len >= 0.9);
}

#[test]
fn random_runs_are_reproducible_across_jobs() {
    let suite = synthetic_suite(0);
    let cfg = DriveConfig::default();
    let run = |jobs| {
        run_suite(&suite, &AgentSpec::Random, &settings(0), &cfg, 42, jobs)
            .into_iter()
            .map(Result::unwrap)
            .collect::<Vec<_>>()
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn observations_are_written_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let s = synth_scenario("cut_in", 2).unwrap();
    let cfg = DriveConfig {
        observation_dir: Some(dir.path().to_path_buf()),
        ..DriveConfig::default()
    };
    let mut agent = FixedAgent("BRAKE".into());
    let r = run_episode(&s, &mut agent, "brake", &cfg).unwrap();
    for d in &r.steps {
        let rel = d.observation.as_ref().unwrap();
        let png = std::fs::read(dir.path().join(rel)).unwrap();
        assert_eq!(&png[1..4], b"PNG");
        // IHDR width and height
        assert_eq!(u32::from_be_bytes(png[16..20].try_into().unwrap()), 1600);
        assert_eq!(u32::from_be_bytes(png[20..24].try_into().unwrap()), 900);
    }
}
