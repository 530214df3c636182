//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use scenebench_core::geometry::{OrientedRect, Vec2};

pub fn random_box<R: Rng>(rng: &mut R) -> [Vec2; 4] {
    let c = Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    let th: f64 = rng.random_range(-PI..PI);
    let half = Vec2::new(rng.random_range(0.2..3.0), rng.random_range(0.2..2.0));
    OrientedRect::new(c, Vec2::new(th.cos(), th.sin()), half).corners()
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec2 {
    let th: f64 = rng.random_range(-PI..PI);
    Vec2::new(th.cos(), th.sin())
}

/// Result of comparing every vertex pair along a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beyond {
    Positive,
    Negative,
    Neither,
}

/// Brute force over all 16 vertex pairs: `Positive` when every vertex of
/// `b` projects strictly past every vertex of `a` along `d`. Also returns
/// the smallest distance of any decisive pair difference from zero.
pub fn beyond(a: &[Vec2; 4], b: &[Vec2; 4], d: Vec2) -> (Beyond, f64) {
    let mut all_pos = true;
    let mut all_neg = true;
    let mut min_pos = f64::INFINITY;
    let mut min_neg = f64::INFINITY;
    for bv in b {
        for av in a {
            let diff = (bv.x - av.x) * d.x + (bv.y - av.y) * d.y;
            all_pos &= diff > 0.0;
            all_neg &= diff < 0.0;
            min_pos = min_pos.min(diff);
            min_neg = min_neg.min(-diff);
        }
    }
    let verdict = if all_pos {
        Beyond::Positive
    } else if all_neg {
        Beyond::Negative
    } else {
        Beyond::Neither
    };
    (verdict, min_pos.abs().min(min_neg.abs()))
}

/// Edge code of `b` relative to `a` seen along `heading`, and the margin.
pub fn oracle_edge(a: &[Vec2; 4], b: &[Vec2; 4], heading: Vec2) -> (Option<&'static str>, f64) {
    let left = Vec2::new(-heading.y, heading.x);
    let (side, m1) = beyond(a, b, left);
    let (fb, m2) = beyond(a, b, heading);
    let code = match (side, fb) {
        (Beyond::Positive, Beyond::Positive) => Some("lf"),
        (Beyond::Positive, Beyond::Neither) => Some("l"),
        (Beyond::Positive, Beyond::Negative) => Some("lb"),
        (Beyond::Neither, Beyond::Positive) => Some("f"),
        (Beyond::Neither, Beyond::Negative) => Some("b"),
        (Beyond::Negative, Beyond::Positive) => Some("rf"),
        (Beyond::Negative, Beyond::Neither) => Some("r"),
        (Beyond::Negative, Beyond::Negative) => Some("rb"),
        (Beyond::Neither, Beyond::Neither) => None,
    };
    (code, m1.min(m2))
}

/// Even-odd ray casting.
pub fn inside_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
    }
    inside
}

/// Mean Euclidean distance after repeating the last driven point.
pub fn padded_ade(driven: &[(f64, f64)], gt: &[(f64, f64)]) -> f64 {
    let last = *driven.last().expect("non-empty");
    let mut total = 0.0;
    for (i, g) in gt.iter().enumerate() {
        let d = driven.get(i).copied().unwrap_or(last);
        total += ((d.0 - g.0).powi(2) + (d.1 - g.1).powi(2)).sqrt();
    }
    total / gt.len() as f64
}
