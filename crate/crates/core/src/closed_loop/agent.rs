//! Driving agents: scripted baselines and a remote HTTP client.

use std::str::FromStr;
use std::time::Duration;

use base64::Engine as _;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ActionCatalog, KEEP_STRAIGHT};
use crate::qa::dataset::scenario_seed;

use super::Observation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("AgentUnreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: u32, last: String },
    #[error("MalformedReply: {0}")]
    MalformedReply(String),
}

/// Something that answers driving prompts with free-form text.
pub trait Agent {
    fn decide(&mut self, obs: &Observation) -> Result<String, AgentError>;

    /// Whether the agent looks at the rendered image at all.
    fn wants_image(&self) -> bool {
        true
    }
}

/// Command-line agent selector: `random`, `brake`, `straight` or `remote:URL`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentSpec {
    Random,
    Brake,
    Straight,
    Remote(String),
}

impl FromStr for AgentSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(AgentSpec::Random),
            "brake" => Ok(AgentSpec::Brake),
            "straight" => Ok(AgentSpec::Straight),
            _ => match s.strip_prefix("remote:") {
                Some(url) if !url.is_empty() => Ok(AgentSpec::Remote(url.to_string())),
                _ => Err(format!(
                    "unknown agent `{s}` (expected random, brake, straight or remote:URL)"
                )),
            },
        }
    }
}

impl AgentSpec {
    pub fn name(&self) -> String {
        match self {
            AgentSpec::Random => "random".into(),
            AgentSpec::Brake => "brake".into(),
            AgentSpec::Straight => "straight".into(),
            AgentSpec::Remote(url) => format!("remote:{url}"),
        }
    }

    /// Fresh agent for one episode. Random agents are seeded per scenario so
    /// results do not depend on scheduling.
    pub fn build(
        &self,
        seed: u64,
        scenario_id: &str,
        catalog: &ActionCatalog,
        remote: &RemoteSettings,
    ) -> Box<dyn Agent + Send> {
        match self {
            AgentSpec::Random => Box::new(RandomAgent::new(catalog, scenario_seed(seed, scenario_id))),
            AgentSpec::Brake => Box::new(FixedAgent("BRAKE".into())),
            AgentSpec::Straight => Box::new(FixedAgent(KEEP_STRAIGHT.into())),
            AgentSpec::Remote(url) => Box::new(RemoteAgent::new(url, remote)),
        }
    }
}

/// Always answers with the same action name.
#[derive(Debug, Clone)]
pub struct FixedAgent(pub String);

impl Agent for FixedAgent {
    fn decide(&mut self, _obs: &Observation) -> Result<String, AgentError> {
        Ok(self.0.clone())
    }

    fn wants_image(&self) -> bool {
        false
    }
}

/// Uniform choice over the catalog.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    names: Vec<String>,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(catalog: &ActionCatalog, seed: u64) -> Self {
        Self {
            names: catalog.names().map(String::from).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn decide(&mut self, _obs: &Observation) -> Result<String, AgentError> {
        Ok(self
            .names
            .choose(&mut self.rng)
            .cloned()
            .unwrap_or_else(|| KEEP_STRAIGHT.into()))
    }

    fn wants_image(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteSettings {
    pub timeout_s: f64,
    /// Extra attempts after the first failure.
    pub retries: u32,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        Self {
            timeout_s: 60.0,
            retries: 2,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    image: String,
    prompt: &'a str,
    meta: Meta<'a>,
}

#[derive(Serialize)]
struct Meta<'a> {
    scenario: &'a str,
    step: usize,
}

/// JSON-over-HTTP agent. Cloning shares the connection pool, so one client
/// may serve many episodes concurrently.
#[derive(Debug, Clone)]
pub struct RemoteAgent {
    url: String,
    retries: u32,
    http: ureq::Agent,
}

impl RemoteAgent {
    pub fn new(url: &str, settings: &RemoteSettings) -> Self {
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(settings.timeout_s.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.to_string(),
            retries: settings.retries,
            http,
        }
    }

    fn attempt(&self, body: &Request) -> Result<String, Attempt> {
        let mut resp = self
            .http
            .post(&self.url)
            .send_json(body)
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Attempt::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(AgentError::MalformedReply(format!("HTTP {status}"))));
        }
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(AgentError::MalformedReply(e.to_string())))?;
        match value.get("text").and_then(|t| t.as_str()) {
            Some(t) => Ok(t.to_string()),
            None => Err(Attempt::Fatal(AgentError::MalformedReply(
                "reply has no string field `text`".into(),
            ))),
        }
    }
}

enum Attempt {
    Transient(String),
    Fatal(AgentError),
}

impl Agent for RemoteAgent {
    fn decide(&mut self, obs: &Observation) -> Result<String, AgentError> {
        let body = Request {
            image: base64::engine::general_purpose::STANDARD.encode(obs.image.as_deref().unwrap_or(&[])),
            prompt: &obs.prompt,
            meta: Meta {
                scenario: &obs.scenario,
                step: obs.step,
            },
        };
        let attempts = self.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(e)) => last = e,
            }
        }
        Err(AgentError::Unreachable { attempts, last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs() -> Observation {
        Observation {
            scenario: "s".into(),
            step: 0,
            image: None,
            prompt: String::new(),
            options: Vec::new(),
        }
    }

    #[test]
    fn agent_spec_parses() {
        assert_eq!("brake".parse::<AgentSpec>(), Ok(AgentSpec::Brake));
        assert_eq!(
            "remote:http://h:1/x".parse::<AgentSpec>(),
            Ok(AgentSpec::Remote("http://h:1/x".into()))
        );
        assert!("remote:".parse::<AgentSpec>().is_err());
        assert!("human".parse::<AgentSpec>().is_err());
    }

    #[test]
    fn random_agent_is_reproducible_and_uniform() {
        let catalog = ActionCatalog::default();
        let run = |seed| {
            let mut a = RandomAgent::new(&catalog, seed);
            (0..1000).map(|_| a.decide(&obs()).unwrap()).collect::<Vec<_>>()
        };
        let xs = run(9);
        assert_eq!(xs, run(9));
        let n = 1000.0;
        let p = 1.0 / catalog.len() as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for name in catalog.names() {
            let k = xs.iter().filter(|x| *x == name).count() as f64;
            assert!((k - n * p).abs() <= 5.0 * sigma, "{name}: {k}");
        }
    }

    #[test]
    fn fixed_agents_repeat() {
        let mut a = FixedAgent("BRAKE".into());
        assert!((0..5).all(|_| a.decide(&obs()).unwrap() == "BRAKE"));
    }
}
