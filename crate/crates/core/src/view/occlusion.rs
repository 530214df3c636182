//! Z-buffer style visibility filter over filled 2D boxes.

use crate::scene_graph::VisibilityPolicy;
use crate::view::camera::BBox2D;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxVisibility {
    pub visible_pixels: u64,
    pub fraction: f64,
    pub survives: bool,
}

/// Length of `[a, b)` not covered by the sorted, disjoint `covered` list.
fn uncovered(a: u32, b: u32, covered: &[(u32, u32)]) -> u64 {
    let mut free = (b - a) as u64;
    for &(c, d) in covered {
        let lo = c.max(a);
        let hi = d.min(b);
        if lo < hi {
            free -= (hi - lo) as u64;
        }
    }
    free
}

fn insert_interval(covered: &mut Vec<(u32, u32)>, a: u32, b: u32) {
    covered.push((a, b));
    covered.sort_unstable();
    let mut merged: Vec<(u32, u32)> = Vec::with_capacity(covered.len());
    for &(c, d) in covered.iter() {
        match merged.last_mut() {
            Some(last) if c <= last.1 => last.1 = last.1.max(d),
            _ => merged.push((c, d)),
        }
    }
    *covered = merged;
}

/// Exact count, for each box, of its pixels not covered by any nearer box
/// (a far-to-near painter's z-buffer). `boxes` must be sorted by ascending
/// depth; results are returned in the same order.
///
/// Rows between consecutive box edges share the same set of active boxes,
/// so each such band is resolved once with interval arithmetic.
pub fn visibility(boxes: &[BBox2D], policy: &VisibilityPolicy) -> Vec<BoxVisibility> {
    let mut edges: Vec<u32> = boxes.iter().flat_map(|b| [b.min[1], b.max[1]]).collect();
    edges.sort_unstable();
    edges.dedup();
    let mut visible = vec![0u64; boxes.len()];
    let mut covered: Vec<(u32, u32)> = Vec::new();
    for band in edges.windows(2) {
        let (y0, y1) = (band[0], band[1]);
        covered.clear();
        for (i, b) in boxes.iter().enumerate() {
            if b.min[1] <= y0 && y1 <= b.max[1] && b.min[0] < b.max[0] {
                visible[i] += uncovered(b.min[0], b.max[0], &covered) * (y1 - y0) as u64;
                insert_interval(&mut covered, b.min[0], b.max[0]);
            }
        }
    }
    boxes
        .iter()
        .zip(visible)
        .map(|(b, visible)| {
            let area = b.area();
            let fraction = if area == 0 {
                0.0
            } else {
                visible as f64 / area as f64
            };
            BoxVisibility {
                visible_pixels: visible,
                fraction,
                survives: fraction >= policy.min_visible_fraction
                    && visible >= policy.min_pixels as u64,
            }
        })
        .collect()
}

/// Boxes passing both the visible-fraction and the pixel-count rule.
pub fn occlusion_filter(boxes: &[BBox2D], policy: &VisibilityPolicy) -> Vec<BBox2D> {
    boxes
        .iter()
        .zip(visibility(boxes, policy))
        .filter(|(_, v)| v.survives)
        .map(|(b, _)| b.clone())
        .collect()
}
