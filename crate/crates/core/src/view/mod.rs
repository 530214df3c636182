//! Camera view of a keyframe: projection, occlusion filtering, Set-of-Mark
//! labels and schematic rendering.

pub mod camera;
pub mod font;
pub mod labels;
pub mod occlusion;
pub mod render;

pub use camera::{project_box, BBox2D, CameraRig};
pub use labels::{place_labels, LabelAssignment, LabelEntry, PixelRect};
pub use occlusion::{occlusion_filter, visibility, BoxVisibility};
pub use render::{render_frame, AnnotationPlan, DrawCommand, RenderOptions, RenderedFrame};

use crate::scenario::{to_ego_frame, FrameSnapshot, ScenarioError, ScenarioRecord};
use crate::scene_graph::VisibilityPolicy;

/// Everything the view pipeline derives from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotation {
    pub frame: FrameSnapshot,
    /// Rig actually used, mounted at the ego's front.
    pub camera: CameraRig,
    /// In-view objects within range, ascending depth.
    pub projected: Vec<BBox2D>,
    pub visibility: Vec<BoxVisibility>,
    pub labels: LabelAssignment,
}

/// Projects, filters and labels the objects of `frame`.
pub fn annotate_snapshot(
    frame: FrameSnapshot,
    camera: &CameraRig,
    policy: &VisibilityPolicy,
) -> FrameAnnotation {
    let ego = frame.ego.state;
    let camera = camera.mounted_at_front(ego.half_extents.x);
    let mut projected: Vec<BBox2D> = frame
        .others
        .iter()
        .filter(|o| to_ego_frame(&ego.pose, o.state.pose.position).norm() <= policy.max_range_m)
        .filter_map(|o| project_box(&camera, &ego.pose, &o.track_id, &o.state, o.height))
        .collect();
    projected.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.track_id.cmp(&b.track_id)));
    let visibility = occlusion::visibility(&projected, policy);
    let surviving: Vec<BBox2D> = projected
        .iter()
        .zip(&visibility)
        .filter(|(_, v)| v.survives)
        .map(|(b, _)| b.clone())
        .collect();
    let labels = place_labels(&surviving, camera.width, camera.height);
    FrameAnnotation {
        frame,
        camera,
        projected,
        visibility,
        labels,
    }
}

pub fn annotate_frame(
    scenario: &ScenarioRecord,
    step: usize,
    camera: &CameraRig,
    policy: &VisibilityPolicy,
) -> Result<FrameAnnotation, ScenarioError> {
    Ok(annotate_snapshot(scenario.frame_at(step)?, camera, policy))
}
