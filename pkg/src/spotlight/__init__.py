"""Spotlight: audit a trained model by searching its representation space for
contiguous regions of high loss."""

from spotlight.core import (
    BarrierSchedule,
    EmbeddingDataset,
    SpotlightParams,
    WeightVector,
    barrier_penalty,
    kernel_weight,
    objective_gradient,
    penalized_objective,
    weight_vector,
    weighted_loss,
)
from spotlight.files import load_dataset
from spotlight.multi import deflate_losses, find_spotlights
from spotlight.optimizer import SpotlightConfig, SpotlightResult, detect_plateau, init_params, optimize_spotlight
from spotlight.projection import ProjectionSpec, project, project_seeded, projection_matrix
from spotlight.report import AuditReport, build_report, read_report, write_report
from spotlight.summarize import category_breakdown, relative_token_frequency, top_weighted

__version__ = "0.1.0"
