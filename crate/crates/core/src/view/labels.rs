//! Set-of-Mark label numbering and placement.
//!
//! Each label goes to the interior pixel of its object's visible region that
//! is farthest (Euclidean distance transform) from everything that is not
//! the region: the image outside the box, nearer boxes covering it, and the
//! extents of labels placed earlier. Labels of boxes enclosing fewer than
//! `SMALL_BOX_PX` pixels are moved just outside the box, above its top edge.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::view::camera::BBox2D;
use crate::view::font;

pub const SMALL_BOX_PX: u64 = 1600;
pub const LABEL_SCALE: f64 = 1.0;

/// Pixel rectangle, `max` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub min: [i64; 2],
    pub max: [i64; 2],
}

impl PixelRect {
    pub fn centered(anchor: [i64; 2], w: usize, h: usize) -> Self {
        let min = [anchor[0] - (w as i64) / 2, anchor[1] - (h as i64) / 2];
        Self {
            min,
            max: [min[0] + w as i64, min[1] + h as i64],
        }
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.min[0] && x < self.max[0] && y >= self.min[1] && y < self.max[1]
    }

    pub fn expanded(&self, by: i64) -> Self {
        Self {
            min: [self.min[0] - by, self.min[1] - by],
            max: [self.max[0] + by, self.max[1] + by],
        }
    }

    fn intersects(&self, o: &PixelRect) -> bool {
        self.min[0] < o.max[0] && o.min[0] < self.max[0] && self.min[1] < o.max[1] && o.min[1] < self.max[1]
    }
}

impl From<&BBox2D> for PixelRect {
    fn from(b: &BBox2D) -> Self {
        Self {
            min: [b.min[0] as i64, b.min[1] as i64],
            max: [b.max[0] as i64, b.max[1] as i64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub track_id: String,
    pub bbox: BBox2D,
    pub anchor: [i64; 2],
    /// Background box of the label text.
    pub extent: PixelRect,
    /// True when the box was too small and the label sits outside it.
    pub relocated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub entries: BTreeMap<u32, LabelEntry>,
}

impl LabelAssignment {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn track_ids(&self) -> BTreeMap<u32, String> {
        self.entries
            .iter()
            .map(|(&l, e)| (l, e.track_id.clone()))
            .collect()
    }

    pub fn label_of(&self, track_id: &str) -> Option<u32> {
        self.entries
            .iter()
            .find(|(_, e)| e.track_id == track_id)
            .map(|(&l, _)| l)
    }
}

pub fn label_text(label: u32) -> String {
    format!("<{label}>")
}

/// Stable numbering key: independent of geometry so label numbers carry no
/// hint about position or distance.
fn numbering_key(track_id: &str) -> [u8; 8] {
    let digest = Sha256::digest(track_id.as_bytes());
    let mut key = [0u8; 8];
    key.copy_from_slice(&digest[..8]);
    key
}

/// Squared Euclidean distance transform in one dimension (lower envelope of
/// parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared distance from every cell to the nearest cell where `inside` is
/// false. Cells outside the grid count as outside.
fn squared_distance_to_outside(inside: &[bool], w: usize, h: usize) -> Vec<f64> {
    // one-cell border of outside cells
    let (pw, ph) = (w + 2, h + 2);
    let big = ((pw * pw + ph * ph) as f64) * 4.0;
    let mut grid = vec![0f64; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if inside[y * w + x] {
                grid[(y + 1) * pw + x + 1] = big;
            }
        }
    }
    let mut col = vec![0f64; ph];
    let mut tmp = vec![0f64; ph.max(pw)];
    for x in 0..pw {
        for y in 0..ph {
            col[y] = grid[y * pw + x];
        }
        edt_1d(&col, &mut tmp[..ph]);
        for y in 0..ph {
            grid[y * pw + x] = tmp[y];
        }
    }
    let mut row = vec![0f64; pw];
    for y in 0..ph {
        row.copy_from_slice(&grid[y * pw..(y + 1) * pw]);
        edt_1d(&row, &mut tmp[..pw]);
        grid[y * pw..(y + 1) * pw].copy_from_slice(&tmp[..pw]);
    }
    let mut out = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = grid[(y + 1) * pw + x + 1];
        }
    }
    out
}

fn clamp_into_image(rect: PixelRect, width: u32, height: u32) -> PixelRect {
    let w = rect.max[0] - rect.min[0];
    let h = rect.max[1] - rect.min[1];
    let x = rect.min[0].clamp(0, (width as i64 - w).max(0));
    let y = rect.min[1].clamp(0, (height as i64 - h).max(0));
    PixelRect {
        min: [x, y],
        max: [x + w, y + h],
    }
}

fn anchor_of(rect: &PixelRect) -> [i64; 2] {
    [
        rect.min[0] + (rect.max[0] - rect.min[0]) / 2,
        rect.min[1] + (rect.max[1] - rect.min[1]) / 2,
    ]
}

/// Numbers the surviving boxes from 0 and places one label per box.
/// `boxes` are the occlusion survivors sorted by ascending depth.
pub fn place_labels(boxes: &[BBox2D], width: u32, height: u32) -> LabelAssignment {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by_key(|&i| (numbering_key(&boxes[i].track_id), i));

    let mut placed: Vec<PixelRect> = Vec::new();
    let mut entries = BTreeMap::new();
    for (label, &i) in order.iter().enumerate() {
        let label = label as u32;
        let b = &boxes[i];
        let (lw, lh) = font::label_extent(&label_text(label), LABEL_SCALE);
        let rect = PixelRect::from(b);
        let relocated = b.area() < SMALL_BOX_PX;
        let extent = if relocated {
            let cx = rect.min[0] + (rect.max[0] - rect.min[0]) / 2;
            let above = PixelRect::centered([cx, rect.min[1] - 1 - lh as i64 / 2 - 1], lw, lh);
            let candidate = if above.min[1] >= 0 {
                above
            } else {
                PixelRect::centered([cx, rect.max[1] + 1 + lh as i64 / 2 + 1], lw, lh)
            };
            clamp_into_image(candidate, width, height)
        } else {
            let anchor = interior_anchor(b, &boxes[..i], &placed);
            clamp_into_image(PixelRect::centered(anchor, lw, lh), width, height)
        };
        placed.push(extent);
        entries.insert(
            label,
            LabelEntry {
                track_id: b.track_id.clone(),
                bbox: b.clone(),
                anchor: anchor_of(&extent),
                extent,
                relocated,
            },
        );
    }
    LabelAssignment { entries }
}

/// Longest side of the grid the label anchor is searched on; larger boxes
/// are sampled in square blocks.
const ANCHOR_GRID: usize = 96;

/// Distance-transform peak of the box's free region, evaluated on a block
/// grid; ties resolved toward the box center, then by row-major order.
fn interior_anchor(b: &BBox2D, nearer: &[BBox2D], placed: &[PixelRect]) -> [i64; 2] {
    let rect = PixelRect::from(b);
    let w = b.width() as usize;
    let h = b.height() as usize;
    let cell = w.max(h).div_ceil(ANCHOR_GRID).max(1);
    let (gw, gh) = (w.div_ceil(cell), h.div_ceil(cell));
    let blockers: Vec<PixelRect> = nearer
        .iter()
        .map(PixelRect::from)
        .chain(placed.iter().copied())
        .filter(|r| r.intersects(&rect))
        .collect();
    let block = |gx: usize, gy: usize| {
        let x0 = rect.min[0] + (gx * cell) as i64;
        let y0 = rect.min[1] + (gy * cell) as i64;
        PixelRect {
            min: [x0, y0],
            max: [(x0 + cell as i64).min(rect.max[0]), (y0 + cell as i64).min(rect.max[1])],
        }
    };
    let mut inside = vec![true; gw * gh];
    for gy in 0..gh {
        for gx in 0..gw {
            let cell_rect = block(gx, gy);
            inside[gy * gw + gx] = !blockers.iter().any(|r| r.intersects(&cell_rect));
        }
    }
    if !inside.iter().any(|&v| v) {
        return [rect.min[0] + w as i64 / 2, rect.min[1] + h as i64 / 2];
    }
    let center = [rect.min[0] as f64 + (w as f64 - 1.0) / 2.0, rect.min[1] as f64 + (h as f64 - 1.0) / 2.0];
    let pixel_of = |idx: usize| {
        let r = block(idx % gw, idx / gw);
        [r.min[0] + (r.max[0] - r.min[0] - 1) / 2, r.min[1] + (r.max[1] - r.min[1] - 1) / 2]
    };
    let dist = squared_distance_to_outside(&inside, gw, gh);
    let mut best = (f64::NEG_INFINITY, f64::INFINITY, 0usize);
    for (idx, &d) in dist.iter().enumerate() {
        if !inside[idx] {
            continue;
        }
        let [x, y] = pixel_of(idx);
        let off = (x as f64 - center[0]).powi(2) + (y as f64 - center[1]).powi(2);
        if d > best.0 || (d == best.0 && off < best.1) {
            best = (d, off, idx);
        }
    }
    pixel_of(best.2)
}
