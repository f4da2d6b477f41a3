"""Coverage-aware replay buffering for task-incremental scene localization.

The library provides three interchangeable fixed-capacity buffering
strategies (reservoir, class-balance, and coverage-score buffering), the
hierarchical scene-label machinery behind the cheap coverage test, replay
loss composition, a synthetic scene-stream generator, a label-overlap
localization oracle, and an experiment harness that reproduces the
buffer-quality and accuracy-trend behavior at desk scale.
"""

from .buffering import (
    EXACT_3D,
    Buffer,
    BufferDecision,
    BufferEntry,
    DecisionKind,
    DecisionLog,
    DecisionReason,
    Strategy,
    buff_cs_decide,
    class_balance_decide,
    coverage_score_factor,
    observe,
    reservoir_decide,
    victim_unique_labels,
)
from .core import Instance, PointId, RngHandle, SceneId, uniform, uniform_index
from .harness import (
    CellResult,
    ExperimentConfig,
    RunRecord,
    config_from_dict,
    config_hash,
    config_to_dict,
    default_profile,
    emit_reports,
    generate_scenes,
    resolve_order,
    run_cell,
    run_experiment,
    stratified_split,
)
from .hierarchy import ClusterLabel, LabelHierarchy, build_hierarchy, labels_of
from .localizer import LocalizerConfig, LocalizeResult, evaluate_scene, jaccard, localize, localize_many
from .metrics import (
    AccuracyMatrix,
    CoverageReport,
    average_accuracy,
    buffer_coverage,
    class_distribution,
    confidence_interval_95,
    final_accuracy,
    overall_average_accuracy,
)
from .replay import (
    LearnerOracle,
    LossBreakdown,
    RepresentationPayload,
    bounded_beta,
    distill_loss,
    replay_loss_img,
    replay_loss_rep,
    sample_replay_batch,
    task_loss,
)
from .scenegen import BiasedDwell, RoomLoop, Scene, SceneSpec, SweepGrid, generate_scene, make_stream

__version__ = "0.1.0"
