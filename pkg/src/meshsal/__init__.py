"""Gaze-driven per-face mesh saliency.

The package covers the full desk-scale pipeline: converting raw VR gaze logs
into per-face ground-truth saliency maps, extracting geometric and texture
features, predicting saliency with a bidirectional state-space sequence model
over topology-preserving mesh patches, evaluating predictions, and
saliency-guided quadric mesh simplification.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateFaceError,
    MeshFormatError,
    MeshSalError,
    NoFixationHitError,
    NumericError,
    UnsupportedTopologyError,
)
from .mesh import FaceBasis, LoadOptions, TriMesh, build_adjacency, face_basis, load_mesh, make_mesh, save_mesh
from .bvh import Bvh, RayHit, build_bvh, cast_ray, cast_ray_linear, intersect_ray_triangle
from .gaze import (
    Fixation,
    GazeParams,
    GazeSample,
    build_saliency_map,
    classify_fixations,
    read_gaze_log,
    splat_fixation_cone,
    write_gaze_log,
)
from .saliency import SaliencyMap, load_saliency_map, save_saliency_map
from .texture import (
    EncoderConfig,
    FaceFeatureGrid,
    LatentCodeMap,
    TextureImage,
    encode_texture,
    face_feature_grid,
    pool_face_feature,
    sample_latent,
)
from .geometry import GeoFeature, curve_feature, geo_feature_matrix, shape_feature, spatial_feature
from .graphconv import fuse_inputs, graph_conv_forward
from .subgraph import Subgraph, TokenSequence, embed_patches, fps_centers, random_walk_subgraph
from .ssm import SsmParams, feature_diffuse_aggregate, ssm_block, ssm_scan, ssm_scan_reference, stack_blocks
from .propagation import predict_head, propagate, propagation_plan
from .model import ModelConfig, SaliencyModel, apply_ablation, measure_flops
from .metrics import cc, evaluate_pair, format_metrics_row, kld, se, sim
from .train import AdamW, TrainConfig, TrainItem, load_checkpoint, loss_l1, lr_at, save_checkpoint, train_loop
from .simplify import SimplifyResult, saliency_weighted_cost, simplify_to, vertex_quadrics
