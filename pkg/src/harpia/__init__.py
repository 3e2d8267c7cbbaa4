"""Out-of-core volumetric image segmentation engine."""

from .annotate import RLEMask, SnakeParams, apply_mask, lasso_fill, magic_wand, morph_snakes_acwe
from .chunking import (
    ChunkPlan,
    ExecutionReport,
    MemoryBudget,
    OpProfile,
    execute_chunked,
    execute_two_pass,
    plan_chunks,
    profile_budget,
)
from .errors import (
    BudgetTooSmallError,
    BudgetUnavailableError,
    ChunkExecutionError,
    CorruptInputError,
    HarpiaError,
    JobCancelled,
    ParameterError,
    UnsupportedFormatError,
)
from .ledger import LEDGER, MemoryLedger
from .morphology import StructuringElement, fill_holes, geodesic_reconstruct, morph, remove_islands, smooth_labels
from .quantify import connected_components, edt, label_metrics
from .registry import get_operator, operator_names, run_direct, run_operator
from .threshold import apply_threshold, local_threshold, otsu, otsu_binarize
from .volume import LabelVolume, Volume, VolumeMeta, crop_z, load_volume, read_slice, save_volume
from .watershed import watershed_2_5d

__version__ = "0.1.0"
