//! Schematic front-camera rendering. A frame is first turned into an
//! [`AnnotationPlan`] (ordered draw commands), then rasterized and encoded
//! as PNG. The plan doubles as the JSON sidecar used for golden diffs.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scenario::{to_ego_frame, ScenarioRecord};
use crate::view::camera::{BBox2D, NEAR_PLANE};
use crate::view::font;
use crate::view::labels::{label_text, LabelAssignment, PixelRect, LABEL_SCALE};
use crate::view::FrameAnnotation;

pub type Rgb = [u8; 3];

pub const STROKE_WIDTH: u32 = 2;
pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];
const SKY: Rgb = [150, 185, 220];
const GROUND: Rgb = [96, 110, 86];
const ROAD: Rgb = [70, 70, 74];
/// Margin between the highlighted label text and the white box.
const HIGHLIGHT_MARGIN: i64 = 4;

/// Outline colors cycled by label number.
const MARK_PALETTE: [Rgb; 8] = [
    [255, 64, 64],
    [64, 200, 255],
    [255, 200, 0],
    [160, 80, 255],
    [0, 230, 120],
    [255, 120, 200],
    [255, 140, 40],
    [120, 255, 255],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DrawCommand {
    FillPolygon {
        color: Rgb,
        points: Vec<[f64; 2]>,
    },
    StrokeRect {
        min: [i64; 2],
        max: [i64; 2],
        color: Rgb,
        width: u32,
    },
    LabelText {
        text: String,
        anchor: [i64; 2],
        scale: f64,
        fg: Rgb,
        bg: Rgb,
    },
    HighlightRect {
        min: [i64; 2],
        max: [i64; 2],
        color: Rgb,
        width: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationPlan {
    pub width: u32,
    pub height: u32,
    pub commands: Vec<DrawCommand>,
}

impl AnnotationPlan {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderOptions {
    /// Label to enclose with a white box (grounding questions).
    pub highlight: Option<u32>,
}

fn kind_fill(obj_color: Option<crate::scenario::Color>, kind: crate::scenario::ObjectKind) -> Rgb {
    use crate::scenario::ObjectKind as K;
    if let Some(c) = obj_color {
        return c.rgb();
    }
    match kind {
        K::Sedan | K::Suv | K::Pickup => [150, 150, 160],
        K::Truck | K::Bus => [120, 130, 150],
        K::Pedestrian | K::Cyclist | K::Motorcycle => [170, 120, 100],
        K::TrafficCone => [240, 140, 20],
        K::Barrier => [220, 220, 220],
    }
}

fn rect_polygon(b: &BBox2D) -> Vec<[f64; 2]> {
    let (x0, y0, x1, y1) = (b.min[0] as f64, b.min[1] as f64, b.max[0] as f64, b.max[1] as f64);
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

/// Clips a camera-frame ground polygon to the half-plane `forward >= near`.
fn clip_near(poly: &[Vec2]) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let a_in = a.x >= NEAR_PLANE;
        let b_in = b.x >= NEAR_PLANE;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (NEAR_PLANE - a.x) / (b.x - a.x);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Builds the ordered draw commands for an annotated frame.
pub fn build_plan(
    scenario: &ScenarioRecord,
    annotation: &FrameAnnotation,
    options: &RenderOptions,
) -> AnnotationPlan {
    let camera = &annotation.camera;
    let (w, h) = (camera.width as f64, camera.height as f64);
    let horizon = h / 2.0;
    let mut commands = vec![
        DrawCommand::FillPolygon {
            color: SKY,
            points: vec![[0.0, 0.0], [w, 0.0], [w, horizon], [0.0, horizon]],
        },
        DrawCommand::FillPolygon {
            color: GROUND,
            points: vec![[0.0, horizon], [w, horizon], [w, h], [0.0, h]],
        },
    ];
    let cam = camera.pose(&annotation.frame.ego.state.pose);
    for poly in &scenario.drivable {
        let local: Vec<Vec2> = poly.iter().map(|p| to_ego_frame(&cam, *p)).collect();
        let clipped = clip_near(&local);
        if clipped.len() < 3 {
            continue;
        }
        let points = clipped
            .iter()
            .map(|p| camera.to_pixel([p.x, p.y, 0.0]))
            .collect();
        commands.push(DrawCommand::FillPolygon { color: ROAD, points });
    }
    // every projected object, far to near
    for b in annotation.projected.iter().rev() {
        let Some(obj) = annotation
            .frame
            .others
            .iter()
            .find(|o| o.track_id == b.track_id)
        else {
            continue;
        };
        commands.push(DrawCommand::FillPolygon {
            color: kind_fill(obj.color, obj.kind),
            points: rect_polygon(b),
        });
    }
    push_marks(&mut commands, &annotation.labels, options);
    AnnotationPlan {
        width: camera.width,
        height: camera.height,
        commands,
    }
}

fn push_marks(commands: &mut Vec<DrawCommand>, labels: &LabelAssignment, options: &RenderOptions) {
    for (&label, e) in &labels.entries {
        let r = PixelRect::from(&e.bbox);
        commands.push(DrawCommand::StrokeRect {
            min: r.min,
            max: r.max,
            color: MARK_PALETTE[label as usize % MARK_PALETTE.len()],
            width: STROKE_WIDTH,
        });
    }
    for (&label, e) in &labels.entries {
        commands.push(DrawCommand::LabelText {
            text: label_text(label),
            anchor: e.anchor,
            scale: LABEL_SCALE,
            fg: WHITE,
            bg: BLACK,
        });
    }
    if let Some(target) = options.highlight {
        if let Some(e) = labels.entries.get(&target) {
            let r = e.extent.expanded(HIGHLIGHT_MARGIN);
            commands.push(DrawCommand::HighlightRect {
                min: r.min,
                max: r.max,
                color: WHITE,
                width: STROKE_WIDTH,
            });
        }
    }
}

/// RGB8 raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    fn fill_rect(&mut self, min: [i64; 2], max: [i64; 2], c: Rgb) {
        let x0 = min[0].clamp(0, self.width as i64);
        let x1 = max[0].clamp(0, self.width as i64);
        let y0 = min[1].clamp(0, self.height as i64);
        let y1 = max[1].clamp(0, self.height as i64);
        for y in y0..y1 {
            for x in x0..x1 {
                self.put(x, y, c);
            }
        }
    }

    /// Even-odd scanline fill sampled at pixel centers.
    fn fill_polygon(&mut self, pts: &[[f64; 2]], c: Rgb) {
        if pts.len() < 3 {
            return;
        }
        let ymin = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let ymax = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let y0 = (ymin.floor().max(0.0)) as i64;
        let y1 = (ymax.ceil().min(self.height as f64)) as i64;
        let mut xs = Vec::new();
        for y in y0..y1 {
            let sy = y as f64 + 0.5;
            xs.clear();
            for i in 0..pts.len() {
                let a = pts[i];
                let b = pts[(i + 1) % pts.len()];
                if (a[1] <= sy) != (b[1] <= sy) {
                    xs.push(a[0] + (sy - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                // pixel x is covered when its center x + 0.5 lies in [left, right)
                let xa = (pair[0] - 0.5).ceil().max(0.0) as i64;
                let xb = (pair[1] - 0.5).ceil().min(self.width as f64) as i64;
                for x in xa..xb {
                    self.put(x, y, c);
                }
            }
        }
    }

    fn stroke_rect(&mut self, min: [i64; 2], max: [i64; 2], c: Rgb, width: u32) {
        let t = width as i64;
        self.fill_rect(min, [max[0], min[1] + t], c);
        self.fill_rect([min[0], max[1] - t], max, c);
        self.fill_rect(min, [min[0] + t, max[1]], c);
        self.fill_rect([max[0] - t, min[1]], max, c);
    }

    fn label(&mut self, text: &str, anchor: [i64; 2], scale: f64, fg: Rgb, bg: Rgb) {
        let (w, h) = font::label_extent(text, scale);
        let r = PixelRect::centered(anchor, w, h);
        self.fill_rect(r.min, r.max, bg);
        for (dx, dy) in font::lit_pixels(text, scale) {
            self.put(r.min[0] + dx as i64, r.min[1] + dy as i64, fg);
        }
    }

    pub fn execute(&mut self, plan: &AnnotationPlan) {
        for cmd in &plan.commands {
            match cmd {
                DrawCommand::FillPolygon { color, points } => self.fill_polygon(points, *color),
                DrawCommand::StrokeRect {
                    min,
                    max,
                    color,
                    width,
                }
                | DrawCommand::HighlightRect {
                    min,
                    max,
                    color,
                    width,
                } => self.stroke_rect(*min, *max, *color, *width),
                DrawCommand::LabelText {
                    text,
                    anchor,
                    scale,
                    fg,
                    bg,
                } => self.label(text, *anchor, *scale, *fg, *bg),
            }
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Fast);
            let mut writer = enc.write_header().expect("in-memory png header");
            writer
                .write_image_data(&self.pixels)
                .expect("in-memory png data");
        }
        out
    }
}

pub fn rasterize(plan: &AnnotationPlan) -> Canvas {
    let mut canvas = Canvas::new(plan.width, plan.height);
    canvas.execute(plan);
    canvas
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub png: Vec<u8>,
    pub plan: AnnotationPlan,
}

pub fn render_frame(
    scenario: &ScenarioRecord,
    annotation: &FrameAnnotation,
    options: &RenderOptions,
) -> RenderedFrame {
    let plan = build_plan(scenario, annotation, options);
    let png = rasterize(&plan).to_png();
    RenderedFrame { png, plan }
}
