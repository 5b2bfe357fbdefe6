from src.synth.scenes import (
    MotionStep,
    SceneConfig,
    SyntheticScene,
    render_plane_scene,
    render_scene,
    render_terrain_scene,
)
from src.synth.export import export_dataset, load_dataset, load_manifest, manifest_hash
