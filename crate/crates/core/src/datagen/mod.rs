//! Procedural multi-view dataset: parametric scenes, cameras on arcs, paired
//! glossy/diffuse renders and exact correspondences.

pub mod camera;
mod dataset;
pub mod geometry;
mod groundtruth;
pub mod render;
pub mod scene;

pub use camera::{sample_camera_arc, CameraConfig, CameraFrame, CameraPose};
pub use dataset::{
    config_hash, corr_path, generate_dataset, render_scene_packet, scene_dir, triplets_per_scene, view_path, Dataset,
    DatasetManifest, RenderedScenePacket, SceneEntry, SceneMeta, TripletEntry, INCOMPLETE_MARKER, MANIFEST_FILE,
};
pub use geometry::{GeometrySpec, ShapeRegistry, Vec3};
pub use groundtruth::{ground_truth_correspondences, GroundTruthParams};
pub use render::{render_view, render_with_coverage, RenderOutput, ShadingMode, Tracer};
pub use scene::{sample_scene, sample_scene_with_id, DatagenConfig, Light, Material, SceneSpec};

/// Independent seed for a sub-stream, a pure function of the master seed and the path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p.wrapping_add(1))))
}
