//! Aggregate closed-loop metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

use super::{EpisodeResult, Termination};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no episodes to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: usize,
    pub route_completion: f64,
    pub collision_rate: f64,
    pub off_road_rate: f64,
    pub ade: f64,
    pub fde: f64,
    pub parse_fail_rate: f64,
}

/// Extends `driven` to `len` points by repeating its last position.
pub fn pad_trajectory(driven: &[Vec2], len: usize) -> Vec<Vec2> {
    let mut out = driven.to_vec();
    if let Some(&last) = driven.last() {
        out.resize(len.max(driven.len()), last);
    }
    out
}

/// Mean per-step distance to the logged path, after padding.
pub fn ade(driven: &[Vec2], gt: &[Vec2]) -> f64 {
    if gt.is_empty() {
        return 0.0;
    }
    let padded = pad_trajectory(driven, gt.len());
    padded.iter().zip(gt).map(|(a, b)| a.distance(*b)).sum::<f64>() / gt.len() as f64
}

fn completion(e: &EpisodeResult) -> f64 {
    if e.route_len > 0.0 {
        (e.traveled / e.route_len).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

pub fn metrics(results: &[EpisodeResult]) -> Result<MetricsReport, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let decisions: usize = results.iter().map(|e| e.steps.len()).sum();
    let failures: usize = results.iter().map(|e| e.parse_failures()).sum();
    Ok(MetricsReport {
        episodes: results.len(),
        route_completion: mean(&completion),
        collision_rate: mean(&|e| e.collided as u8 as f64),
        off_road_rate: mean(&|e| (e.termination == Termination::OffRoad) as u8 as f64),
        ade: mean(&|e| ade(&e.driven_traj, &e.gt_traj)),
        fde: mean(&|e| {
            e.driven_traj
                .last()
                .map_or(0.0, |p| p.distance(e.destination))
        }),
        parse_fail_rate: if decisions == 0 {
            0.0
        } else {
            failures as f64 / decisions as f64
        },
    })
}

impl MetricsReport {
    pub fn table(&self) -> String {
        let rows = [
            ("route_completion", self.route_completion),
            ("collision_rate", self.collision_rate),
            ("off_road_rate", self.off_road_rate),
            ("ade_m", self.ade),
            ("fde_m", self.fde),
            ("parse_fail_rate", self.parse_fail_rate),
        ];
        let mut out = format!("{:<18} {:>10}\n{:<18} {:>10}\n", "metric", "value", "episodes", self.episodes);
        for (k, v) in rows {
            out.push_str(&format!("{k:<18} {v:>10.4}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn episode(traveled: f64, route_len: f64, collided: bool, term: Termination) -> EpisodeResult {
        EpisodeResult {
            scenario: "s".into(),
            agent: "a".into(),
            steps: Vec::new(),
            termination: term,
            collided,
            first_collision_step: collided.then_some(0),
            traveled,
            route_len,
            destination: v(3.0, 4.0),
            driven_traj: vec![v(0.0, 0.0)],
            gt_traj: vec![v(0.0, 0.0)],
        }
    }

    #[test]
    fn ade_hand_values() {
        let gt = [v(0.0, 0.0), v(1.0, 0.0), v(2.0, 0.0)];
        assert!((ade(&[v(0.0, 0.0), v(1.0, 1.0), v(2.0, 0.0)], &gt) - 1.0 / 3.0).abs() < 1e-12);
        let early = [v(0.0, 0.0), v(1.0, 1.0)];
        assert_eq!(pad_trajectory(&early, 3), vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 1.0)]);
        let want = (0.0 + 1.0 + 2f64.sqrt()) / 3.0;
        assert!((ade(&early, &gt) - want).abs() < 1e-12);
    }

    #[test]
    fn rates_and_completion() {
        let eps = [
            episode(5.0, 10.0, false, Termination::Horizon),
            episode(10.0, 10.0, true, Termination::OffRoad),
        ];
        let m = metrics(&eps).unwrap();
        assert!((m.route_completion - 0.75).abs() < 1e-12);
        assert_eq!((m.collision_rate, m.off_road_rate), (0.5, 0.5));
        assert_eq!(m.fde, 5.0);
        assert_eq!(metrics(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn permutation_invariant() {
        let a = episode(1.0, 4.0, true, Termination::Horizon);
        let b = episode(3.0, 4.0, false, Termination::OffRoad);
        assert_eq!(metrics(&[a.clone(), b.clone()]), metrics(&[b, a]));
    }
}
