use std::path::PathBuf;

use scenebench_core::scene_graph::VisibilityPolicy;
use scenebench_core::synth::synthetic_suite;
use scenebench_core::view::render::{build_plan, BLACK, STROKE_WIDTH};
use scenebench_core::view::{
    annotate_frame, occlusion_filter, visibility, BBox2D, CameraRig, DrawCommand, RenderOptions,
};

fn bx(id: &str, x0: u32, y0: u32, x1: u32, y1: u32, depth: f64) -> BBox2D {
    BBox2D {
        track_id: id.into(),
        min: [x0, y0],
        max: [x1, y1],
        depth,
    }
}

#[test]
fn occlusion_thresholds_on_known_pixel_counts() {
    let p = VisibilityPolicy::default();
    let boxes = vec![
        bx("wall", 0, 0, 100, 100, 1.0),
        // 80x50 = 4000 px, 2400 hidden: 1600 visible, fraction 0.4
        bx("mostly_hidden", 52, 10, 132, 60, 2.0),
        // 60x40 = 2400 px, half hidden: exactly 0.5 and 1200 px
        bx("half", 70, 200, 130, 240, 0.5),
        bx("blocker", 100, 200, 130, 240, 0.4),
        // 30x30 = 900 px, fully visible but too small
        bx("small", 300, 300, 330, 330, 3.0),
        // 40x40 = 1600 px, fully visible
        bx("clear", 400, 400, 440, 440, 3.0),
        // 59x20 = 1180 px after 20 px hidden
        bx("few_pixels", 500, 0, 560, 20, 3.0),
        bx("sliver", 559, 0, 560, 20, 1.0),
    ];
    let mut sorted = boxes.clone();
    sorted.sort_by(|a, b| a.depth.total_cmp(&b.depth));
    let vis = visibility(&sorted, &p);
    let get = |id: &str| {
        let i = sorted.iter().position(|b| b.track_id == id).unwrap();
        &vis[i]
    };
    assert_eq!(get("mostly_hidden").visible_pixels, 1600);
    assert_eq!(get("mostly_hidden").fraction, 0.4);
    assert_eq!(get("half").visible_pixels, 1200);
    assert_eq!(get("half").fraction, 0.5);
    assert_eq!(get("few_pixels").visible_pixels, 1180);
    let kept: Vec<String> = occlusion_filter(&sorted, &p)
        .into_iter()
        .map(|b| b.track_id)
        .collect();
    assert!(kept.contains(&"half".to_string()));
    assert!(kept.contains(&"clear".to_string()));
    for gone in ["mostly_hidden", "small", "few_pixels"] {
        assert!(!kept.contains(&gone.to_string()), "{gone}");
    }
}

#[test]
fn plans_follow_the_mark_style() {
    let camera = CameraRig::generation();
    let policy = VisibilityPolicy::default();
    let mut labels_seen = 0;
    let mut relocated_seen = 0;
    for s in synthetic_suite(2) {
        for step in s.keyframes().step_by(4) {
            let ann = annotate_frame(&s, step, &camera, &policy).unwrap();
            for e in ann.labels.entries.values() {
                assert_eq!(e.relocated, e.bbox.area() < 1600);
                if e.relocated {
                    relocated_seen += 1;
                    let inside = e.extent.min[0] >= e.bbox.min[0] as i64
                        && e.extent.max[0] <= e.bbox.max[0] as i64
                        && e.extent.min[1] >= e.bbox.min[1] as i64
                        && e.extent.max[1] <= e.bbox.max[1] as i64;
                    assert!(!inside);
                }
            }
            let plan = build_plan(&s, &ann, &RenderOptions::default());
            for cmd in &plan.commands {
                match cmd {
                    DrawCommand::StrokeRect { width, .. } => assert_eq!(*width, STROKE_WIDTH),
                    DrawCommand::LabelText { scale, bg, .. } => {
                        labels_seen += 1;
                        assert_eq!(*scale, 1.0);
                        assert_eq!(*bg, BLACK);
                    }
                    _ => {}
                }
            }
        }
    }
    assert!(labels_seen > 20);
    assert!(relocated_seen > 0);
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Golden draw plans. Regenerate with `UPDATE_GOLDEN=1`.
#[test]
fn plans_match_golden_files() {
    let camera = CameraRig::generation();
    let policy = VisibilityPolicy::default();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for s in synthetic_suite(0).iter().take(4) {
        let ann = annotate_frame(s, 10, &camera, &policy).unwrap();
        let plan = build_plan(s, &ann, &RenderOptions::default()).to_json();
        let path = golden_dir().join(format!("{}_0010.json", s.id));
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &plan).unwrap();
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(plan == want, "plan drifted from {}", path.display());
    }
}
