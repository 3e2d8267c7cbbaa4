"""Static operator registry.

Each operator declares how it runs (``map`` operators go through the
halo-padded chunk loop; ``global`` operators own their whole-volume or
two-pass execution), its chunk profile as a function of its parameters,
and a light parameter schema used by the CLI and service.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import filters, morphology, quantify, threshold, watershed
from .chunking import ExecutionReport, MemoryBudget, OpProfile, execute_chunked
from .errors import ParameterError
from .ledger import LEDGER
from .volume import LABEL_DTYPE

REQUIRED = object()

FLOAT32 = np.dtype("float32")
UINT8 = np.dtype("uint8")


@dataclass(frozen=True)
class Operator:
    name: str
    kind: str                     # "map" | "global"
    output: str                   # "volume" | "labels"
    schema: dict = field(default_factory=dict)   # name -> (caster, default)
    profile: Optional[Callable[[dict], OpProfile]] = None   # map ops
    fn: Optional[Callable] = None                           # fn(block, params, aux)
    run: Optional[Callable] = None                          # run(data, params, budget, cancel)
    aux_keys: tuple[str, ...] = ()
    #: excluded from generic plan-invariance sweeps (needs aux label inputs)
    label_input: bool = False


_REGISTRY: dict[str, Operator] = {}


def register(op: Operator) -> Operator:
    if op.name in _REGISTRY:
        raise ValueError(f"duplicate operator {op.name}")
    _REGISTRY[op.name] = op
    return op


def get_operator(name: str) -> Operator:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ParameterError(f"unknown operator {name!r}") from None


def operator_names() -> list[str]:
    return sorted(_REGISTRY)


def validate_params(op: Operator, raw: dict) -> dict:
    params = {}
    unknown = set(raw) - set(op.schema)
    if unknown:
        raise ParameterError(f"{op.name}: unknown parameters {sorted(unknown)}")
    for key, (caster, default) in op.schema.items():
        if key in raw:
            try:
                params[key] = caster(raw[key])
            except (TypeError, ValueError) as exc:
                raise ParameterError(f"{op.name}: bad value for {key!r}: {exc}") from exc
        elif default is REQUIRED:
            raise ParameterError(f"{op.name}: missing required parameter {key!r}")
        elif default is not None or key in op.schema:
            params[key] = default
    return params


def run_operator(
    data: np.ndarray,
    name: str,
    params: Optional[dict] = None,
    budget: Optional[MemoryBudget] = None,
    aux: Optional[dict] = None,
    cancel=None,
    validate: bool = True,
) -> tuple[np.ndarray, ExecutionReport]:
    """Uniform entry point used by the CLI, service, and bench harness."""
    op = get_operator(name)
    params = validate_params(op, params or {}) if validate else dict(params or {})
    aux = aux or {}
    if budget is None:
        from .chunking import profile_budget

        budget = profile_budget()
    if op.kind == "map":
        return execute_chunked(
            data, op.fn, op.profile(params), budget, params, aux=aux, cancel=cancel
        )
    return op.run(data, params, budget, cancel)


def run_direct(data: np.ndarray, name: str, params: Optional[dict] = None, aux=None) -> np.ndarray:
    """Whole-volume single-shot evaluation (no chunk loop); used as the
    plan-invariance reference path."""
    op = get_operator(name)
    params = validate_params(op, params or {})
    if op.kind == "map":
        return op.fn(data, params, aux or {})
    result, _ = op.run(data, params, None, None)
    return result


# ---------------------------------------------------------------------------
# map operators
# ---------------------------------------------------------------------------

def _se_param(value):
    if isinstance(value, morphology.StructuringElement):
        return value
    return morphology.StructuringElement.parse(str(value))


register(Operator(
    name="identity",
    kind="map",
    output="volume",
    profile=lambda p: OpProfile(halo_z=0, scratch_factor=2),
    fn=lambda b, p, a: b,
))

register(Operator(
    name="gaussian",
    kind="map",
    output="volume",
    schema={"sigma": (float, REQUIRED)},
    profile=lambda p: OpProfile(
        halo_z=filters.gaussian_kernel_radius(p["sigma"]), scratch_factor=8, out_dtype=FLOAT32
    ),
    fn=lambda b, p, a: filters.gaussian(b, p["sigma"]),
))

register(Operator(
    name="mean",
    kind="map",
    output="volume",
    schema={"radius": (int, REQUIRED)},
    profile=lambda p: OpProfile(halo_z=p["radius"], scratch_factor=12, out_dtype=FLOAT32),
    fn=lambda b, p, a: filters.mean(b, p["radius"]),
))

register(Operator(
    name="median",
    kind="map",
    output="volume",
    schema={"radius": (int, REQUIRED)},
    profile=lambda p: OpProfile(halo_z=p["radius"], scratch_factor=4),
    fn=lambda b, p, a: filters.median(b, p["radius"]),
))

register(Operator(
    name="nlm",
    kind="map",
    output="volume",
    schema={
        "h": (float, REQUIRED),
        "patch_radius": (int, 1),
        "search_radius": (int, 3),
        "sigma_noise": (float, 0.0),
    },
    profile=lambda p: OpProfile(
        halo_z=p["patch_radius"] + p["search_radius"], scratch_factor=24, out_dtype=FLOAT32
    ),
    fn=lambda b, p, a: filters.nlm(
        b, p["h"], p["patch_radius"], p["search_radius"], p["sigma_noise"]
    ),
))

register(Operator(
    name="unsharp",
    kind="map",
    output="volume",
    schema={"sigma": (float, REQUIRED), "amount": (float, REQUIRED)},
    profile=lambda p: OpProfile(
        halo_z=filters.gaussian_kernel_radius(p["sigma"]), scratch_factor=10, out_dtype=FLOAT32
    ),
    fn=lambda b, p, a: filters.unsharp(b, p["sigma"], p["amount"]),
))

register(Operator(
    name="anisotropic_diffusion",
    kind="map",
    output="volume",
    schema={
        "iterations": (int, REQUIRED),
        "kappa": (float, REQUIRED),
        "dt": (float, 1.0 / 6.0),
        "mode": (str, "exponential"),
    },
    # each explicit step widens the dependence stencil by one slice
    profile=lambda p: OpProfile(halo_z=p["iterations"], scratch_factor=12, out_dtype=FLOAT32),
    fn=lambda b, p, a: filters.anisotropic_diffusion(
        b, p["iterations"], p["kappa"], p["dt"], p["mode"]
    ),
))

register(Operator(
    name="sobel",
    kind="map",
    output="volume",
    profile=lambda p: OpProfile(halo_z=1, scratch_factor=12, out_dtype=FLOAT32),
    fn=lambda b, p, a: filters.sobel(b),
))

register(Operator(
    name="prewitt",
    kind="map",
    output="volume",
    profile=lambda p: OpProfile(halo_z=1, scratch_factor=12, out_dtype=FLOAT32),
    fn=lambda b, p, a: filters.prewitt(b),
))

register(Operator(
    name="lbp2d",
    kind="map",
    output="volume",
    profile=lambda p: OpProfile(halo_z=0, scratch_factor=4, out_dtype=UINT8),
    fn=lambda b, p, a: filters.lbp2d(b),
))

for _comp in filters.HESSIAN_COMPONENTS:
    register(Operator(
        name=f"hessian_{_comp}",
        kind="map",
        output="volume",
        schema={"sigma": (float, REQUIRED)},
        profile=lambda p: OpProfile(
            halo_z=filters.gaussian_kernel_radius(p["sigma"]) + 2,
            scratch_factor=10,
            out_dtype=FLOAT32,
        ),
        fn=(lambda comp: lambda b, p, a: filters.hessian_component(b, p["sigma"], comp))(_comp),
    ))

register(Operator(
    name="apply_threshold",
    kind="map",
    output="labels",
    schema={"t": (float, REQUIRED)},
    profile=lambda p: OpProfile(halo_z=0, scratch_factor=6, out_dtype=LABEL_DTYPE),
    fn=lambda b, p, a: threshold.apply_threshold(b, p["t"]),
))

register(Operator(
    name="local_threshold",
    kind="map",
    output="labels",
    schema={
        "kind": (str, REQUIRED),
        "window": (int, REQUIRED),
        "k": (float, 0.2),
        "R": (lambda v: None if v is None else float(v), None),
        "c": (float, 0.0),
    },
    profile=lambda p: OpProfile(halo_z=p["window"], scratch_factor=24, out_dtype=LABEL_DTYPE),
    fn=lambda b, p, a: threshold.local_threshold(
        b, p["kind"], p["window"], p["k"], p["R"], p["c"]
    ),
))

for _morph_op in morphology.MORPH_OPS:
    register(Operator(
        name=f"morph_{_morph_op}",
        kind="map",
        output="volume",
        schema={"se": (_se_param, REQUIRED), "iterations": (int, 1)},
        profile=(lambda mop: lambda p: OpProfile(
            halo_z=p["se"].z_extent * p["iterations"] * (2 if mop in ("open", "close") else 1),
            scratch_factor=8,
        ))(_morph_op),
        fn=(lambda mop: lambda b, p, a: morphology.morph(b, mop, p["se"], p["iterations"]))(_morph_op),
    ))

register(Operator(
    name="smooth_labels",
    kind="map",
    output="labels",
    schema={"se": (_se_param, REQUIRED)},
    profile=lambda p: OpProfile(halo_z=4 * p["se"].z_extent, scratch_factor=10, out_dtype=LABEL_DTYPE),
    fn=lambda b, p, a: morphology.smooth_labels(b.astype(LABEL_DTYPE), p["se"]),
    label_input=True,
))

register(Operator(
    name="watershed",
    kind="map",
    output="labels",
    schema={},
    profile=lambda p: OpProfile(halo_z=0, scratch_factor=10, out_dtype=LABEL_DTYPE),
    fn=lambda b, p, a: watershed.watershed_2_5d(b, a["markers"], a.get("mask")),
    aux_keys=("markers", "mask"),
))


# ---------------------------------------------------------------------------
# global operators (own their chunking or run whole-volume)
# ---------------------------------------------------------------------------

def _run_otsu(data, params, budget, cancel):
    LEDGER.job_start()
    out, t = threshold.otsu_binarize(data, params.get("bins", 256), budget, cancel=cancel)
    if budget is None:
        report = ExecutionReport(chunk_count=1)
    else:
        snap = LEDGER.snapshot()
        report = ExecutionReport(
            chunk_count=1,
            peak_bytes=snap.peak_bytes - snap.baseline_bytes,
            residual_bytes=snap.residual_bytes,
        )
    report.threshold = t  # type: ignore[attr-defined]
    return out, report


register(Operator(
    name="otsu",
    kind="global",
    output="labels",
    schema={"bins": (int, 256)},
    run=_run_otsu,
))


def _run_cc(data, params, budget, cancel):
    LEDGER.job_start()
    labels, count = quantify.connected_components(data, params["connectivity"], budget)
    report = ExecutionReport(chunk_count=1)
    report.component_count = count  # type: ignore[attr-defined]
    return labels, report


register(Operator(
    name="connected_components",
    kind="global",
    output="labels",
    schema={"connectivity": (int, 6)},
    run=_run_cc,
))


def _run_fill_holes(data, params, budget, cancel):
    LEDGER.job_start()
    out = morphology.fill_holes(data, params["connectivity"]).astype(data.dtype)
    return out, ExecutionReport(chunk_count=1)


register(Operator(
    name="fill_holes",
    kind="global",
    output="labels",
    schema={"connectivity": (int, 6)},
    run=_run_fill_holes,
    label_input=True,
))


def _run_remove_islands(data, params, budget, cancel):
    LEDGER.job_start()
    out = morphology.remove_islands(data, params["min_size"], params["connectivity"])
    return out, ExecutionReport(chunk_count=1)


register(Operator(
    name="remove_islands",
    kind="global",
    output="labels",
    schema={"min_size": (int, REQUIRED), "connectivity": (int, 6)},
    run=_run_remove_islands,
    label_input=True,
))


def _run_geodesic(data, params, budget, cancel):
    LEDGER.job_start()
    # whole-volume fixed-point iteration; propagation range is unbounded,
    # so no finite halo can make this a map operator
    out = morphology.geodesic_reconstruct(params["marker"], data, params["kind"])
    return out, ExecutionReport(chunk_count=1)


register(Operator(
    name="geodesic_reconstruct",
    kind="global",
    output="volume",
    schema={"marker": (np.asarray, REQUIRED), "kind": (str, "dilation")},
    run=_run_geodesic,
    label_input=True,
))


def _run_edt(data, params, budget, cancel):
    LEDGER.job_start()
    spacing = params.get("spacing") or (1.0, 1.0, 1.0)
    out = quantify.edt(data, spacing)
    return out, ExecutionReport(chunk_count=1)


register(Operator(
    name="edt",
    kind="global",
    output="volume",
    schema={"spacing": (lambda v: tuple(float(s) for s in v), None)},
    run=_run_edt,
    label_input=True,
))
