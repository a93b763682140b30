//! Environment layer: declarative scenes, occupancy rasterization, the
//! spatial-semantic scene graph and a seeded procedural scene generator.

mod generator;
mod occupancy;
mod scene;
mod scene_graph;

pub use generator::{
    generate_scene, is_connected, single_free_component, GenerationError, GeneratorParams,
};
pub use occupancy::build_occupancy;
pub use scene::{
    load_scene, save_scene, Footprint, InvariantViolation, ObjectSpec, Rect, RoomSpec, Scene,
    SceneIoError, HALLWAY_ROOM_ID, MIN_DOOR_WIDTH,
};
pub use scene_graph::{
    build_scene_graph, build_scene_graph_with, is_near, is_on, Edge, Relation,
    RelationThresholds, SceneGraph,
};

use crate::geometry::{dilate, OccupancyGrid};

/// A scene together with everything derived from it for one agent body.
/// Immutable after construction and shared between simulators.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub scene: Scene,
    /// Walls and blocking objects.
    pub occupancy: OccupancyGrid,
    /// `occupancy` grown by the agent radius; free cells are valid agent centers.
    pub dilated: OccupancyGrid,
    pub graph: SceneGraph,
    pub agent_radius: f64,
}

impl SceneContext {
    pub fn new(scene: Scene, resolution: f64, agent_radius: f64, agent_height: f64) -> Self {
        let occupancy = build_occupancy(&scene, resolution, agent_height);
        let dilated = dilate(&occupancy, agent_radius);
        let graph = build_scene_graph(&scene);
        Self {
            scene,
            occupancy,
            dilated,
            graph,
            agent_radius,
        }
    }

    pub fn resolution(&self) -> f64 {
        self.occupancy.resolution()
    }
}
