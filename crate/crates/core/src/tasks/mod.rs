//! Episode and dataset generation: path sampling, the five task types,
//! templated instructions with optional refinement, long-horizon chaining
//! and split construction.

mod chain;
mod dataset;
mod episode;
mod instructions;
mod refine;
mod sampling;

pub use chain::{chain_long_horizon, ChainError};
pub use dataset::{
    apply_reviews, build_dataset, episodes_to_jsonl, fnv1a64, goal_snapshot, load_dataset,
    manifest_to_json, nearest_target, parse_episodes_jsonl, read_manifest, scene_rng,
    split_scene_counts, write_dataset, Dataset, DatasetConfig, DatasetError, DatasetSplit,
    LoadedDataset, Manifest, PerSceneCounts, ReviewEntry, SplitName, SplitRatios,
    COARSE_STYLE_EXPANSION, GENERATOR_VERSION, TARGET_RADIUS,
};
pub use episode::{
    CoarseInstructions, Episode, EpisodeError, Goal, GoalSnapshot, InstructionBundle, TaskType,
};
pub use instructions::{
    coarse_from_parts, describe_target, landmark_vocabulary, make_coarse_instructions,
    make_fine_instruction, simplify, target_room_label, validate_fine_instruction, FineCheck,
    ACTION_VERBS, END_VERBS, FORBIDDEN_PHRASES, FORBIDDEN_WORDS, SPATIAL_TERMS,
};
pub use refine::{
    caption_is_informative, caption_relation, fuse_relation, parse_synthesizer_reply, refine,
    RefineContext, RefinementClient, RefinementClients, RefinementError, RefinementRequest, Role,
};
pub use sampling::{
    initial_heading, sample_path, PathConstraints, PathSampler, SampledPath, SamplingError,
    DEFAULT_SAMPLING_BUDGET,
};
