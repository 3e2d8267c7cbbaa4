import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harpia.chunking import (
    MemoryBudget,
    OpProfile,
    execute_chunked,
    plan_chunks,
    profile_budget,
)
from harpia.errors import (
    BudgetTooSmallError,
    ChunkExecutionError,
    JobCancelled,
    ParameterError,
)
from harpia.ledger import LEDGER
from harpia.registry import run_direct, run_operator

MIB = 1024 * 1024


class TestBudget:
    def test_usable_fraction(self):
        b = MemoryBudget(1000 * MIB, 0.8)
        assert b.usable_bytes == 800 * MIB

    def test_full_fraction_is_identity(self):
        b = MemoryBudget(12345, 1.0)
        assert b.usable_bytes == 12345

    def test_bad_fraction(self):
        with pytest.raises(ParameterError):
            MemoryBudget(100, 0.0)
        with pytest.raises(ParameterError):
            MemoryBudget(100, 1.5)

    def test_probe_stability(self):
        a = profile_budget(fraction=1.0).usable_bytes
        b = profile_budget(fraction=1.0).usable_bytes
        assert abs(a - b) <= 0.05 * max(a, b)


class TestPlan:
    def test_worked_example(self):
        # Z=100 slices of 4 MiB, scratch 3, halo 2, usable 96 MiB:
        # t = floor(96/(3*4)) = 8 total slices, interior n = 8 - 4 = 4,
        # hence ceil(100/4) = 25 chunks.
        plan = plan_chunks(
            (100, 1024, 1024),
            np.uint32,
            OpProfile(halo_z=2, scratch_factor=3),
            MemoryBudget(96 * MIB, 1.0),
        )
        assert plan.slice_bytes == 4 * MIB
        assert plan.interior_slices == 4
        assert len(plan.chunks) == 25

    def test_single_chunk_when_roomy(self):
        plan = plan_chunks(
            (10, 8, 8), np.uint8, OpProfile(halo_z=0, scratch_factor=3), MemoryBudget(1 * MIB, 1.0)
        )
        assert len(plan.chunks) == 1
        assert plan.chunks[0].z_start == 0 and plan.chunks[0].z_stop == 10

    def test_budget_too_small(self):
        with pytest.raises(BudgetTooSmallError) as exc:
            plan_chunks(
                (100, 1024, 1024),
                np.uint32,
                OpProfile(halo_z=2, scratch_factor=3),
                MemoryBudget(20 * MIB, 1.0),
            )
        assert exc.value.minimum_bytes > 20 * MIB

    @given(
        z=st.integers(1, 200),
        halo=st.integers(0, 4),
        interior=st.integers(1, 50),
    )
    @settings(max_examples=100, deadline=None)
    def test_interiors_partition(self, z, halo, interior):
        t = interior + 2 * halo
        slice_bytes = 16 * 16
        budget = MemoryBudget(int(t * 3 * slice_bytes), 1.0)
        plan = plan_chunks((z, 16, 16), np.uint8, OpProfile(halo_z=halo, scratch_factor=3), budget)
        covered = []
        for c in plan.chunks:
            assert 0 <= c.padded_start <= c.z_start < c.z_stop <= c.padded_stop <= z
            assert c.halo_lo <= halo and c.halo_hi <= halo
            covered.extend(range(c.z_start, c.z_stop))
        assert covered == list(range(z))
        assert plan.predicted_peak_bytes <= budget.usable_bytes


def _chunking_budget(shape, dtype, profile, chunks):
    z, y, x = shape
    slice_bytes = y * x * np.dtype(dtype).itemsize
    t = max(1, z // chunks) + 2 * profile.halo_z
    return MemoryBudget(int(t * profile.scratch_factor * slice_bytes) + 1, 1.0)


class TestExecute:
    def test_identity_any_plan(self, small_volume):
        profile = OpProfile(halo_z=0, scratch_factor=2)
        for chunks in (1, 3, 7):
            budget = _chunking_budget(small_volume.shape, small_volume.dtype, profile, chunks)
            out, report = execute_chunked(
                small_volume, lambda b, _p, _a: b, profile, budget
            )
            assert np.array_equal(out, small_volume)
            assert report.chunk_count >= min(chunks, 1)

    def test_gaussian_plan_invariance(self, small_volume):
        whole = run_direct(small_volume, "gaussian", {"sigma": 1.0})
        _, profile_budget_chunks = self._run_counting(small_volume, "gaussian", {"sigma": 1.0}, 5)
        chunked, report = profile_budget_chunks
        assert report.chunk_count >= 5
        assert np.max(np.abs(chunked.astype(np.float64) - whole)) <= 1e-5

    def test_median_bitwise_across_budgets(self, small_volume):
        params = {"radius": 2}
        _, (a, ra) = self._run_counting(small_volume, "median", params, 3)
        _, (b, rb) = self._run_counting(small_volume, "median", params, 7)
        assert ra.chunk_count != rb.chunk_count
        assert np.array_equal(a, b)
        assert np.array_equal(a, run_direct(small_volume, "median", params))

    @staticmethod
    def _run_counting(data, op, params, chunks):
        from harpia.registry import get_operator

        op_obj = get_operator(op)
        profile = op_obj.profile(params)
        budget = _chunking_budget(data.shape, data.dtype, profile, chunks)
        out, report = run_operator(data, op, params, budget)
        return budget, (out, report)

    def test_failure_reports_chunk_index(self, small_volume):
        profile = OpProfile(halo_z=0, scratch_factor=2)
        budget = _chunking_budget(small_volume.shape, small_volume.dtype, profile, 4)
        calls = []

        def boom(block, _p, _a):
            calls.append(1)
            if len(calls) == 2:
                raise ValueError("synthetic fault")
            return block

        with pytest.raises(ChunkExecutionError) as exc:
            execute_chunked(small_volume, boom, profile, budget)
        assert exc.value.chunk_index == 1
        # all buffers are released even on abort
        snap = LEDGER.snapshot()
        assert snap.residual_bytes == 0

    def test_cancel_between_chunks(self, small_volume):
        profile = OpProfile(halo_z=0, scratch_factor=2)
        budget = _chunking_budget(small_volume.shape, small_volume.dtype, profile, 4)
        seen = []

        def fn(block, _p, _a):
            seen.append(1)
            return block

        with pytest.raises(JobCancelled):
            execute_chunked(small_volume, fn, profile, budget, cancel=lambda: len(seen) >= 2)
        assert len(seen) == 2

    def test_memory_bound_and_release(self, small_volume):
        profile = OpProfile(halo_z=1, scratch_factor=4)
        budget = _chunking_budget(small_volume.shape, small_volume.dtype, profile, 4)
        LEDGER.job_start()
        _, report = execute_chunked(small_volume, lambda b, _p, _a: b, profile, budget)
        assert report.peak_bytes <= report.predicted_peak_bytes
        assert report.working_peak_bytes <= report.predicted_peak_bytes
        assert report.residual_bytes == 0


class TestTwoPass:
    def test_chunked_otsu_matches_whole(self, rng):
        from harpia.threshold import otsu

        lo = rng.normal(60, 10, size=(16, 16, 16))
        hi = rng.normal(190, 10, size=(16, 16, 16))
        data = np.clip(np.concatenate([lo, hi]), 0, 255).astype(np.uint8)
        budget = _chunking_budget(data.shape, data.dtype, OpProfile(0, 3), 5)
        assert otsu(data, budget=budget) == otsu(data)

    def test_constant_histogram_reduce(self):
        from harpia.chunking import chunked_reduce
        from harpia.threshold import Histogram, compute_histogram

        data = np.full((20, 8, 8), 42, dtype=np.uint8)
        budget = _chunking_budget(data.shape, data.dtype, OpProfile(0, 3), 4)
        hist = chunked_reduce(
            data,
            lambda b, _p: compute_histogram(b, 256, (0.0, 256.0)),
            Histogram.merge,
            budget,
        )
        assert hist.counts[42] == data.size
        assert hist.counts.sum() == data.size


# adversarial input: high-amplitude seeded noise makes any halo shortfall
# visible at chunk seams
_AUDITED_OPS = [
    ("gaussian", {"sigma": 1.5}, "float32"),
    ("mean", {"radius": 2}, "uint8"),
    ("median", {"radius": 1}, "uint8"),
    ("nlm", {"h": 20.0, "patch_radius": 1, "search_radius": 2}, "uint8"),
    ("unsharp", {"sigma": 1.0, "amount": 1.5}, "uint8"),
    ("anisotropic_diffusion", {"iterations": 3, "kappa": 30.0}, "uint8"),
    ("sobel", {}, "uint8"),
    ("prewitt", {}, "uint8"),
    ("lbp2d", {}, "uint8"),
    ("hessian_xx", {"sigma": 1.0}, "uint8"),
    ("hessian_xz", {"sigma": 1.0}, "uint8"),
    ("apply_threshold", {"t": 127.0}, "uint8"),
    ("local_threshold", {"kind": "sauvola", "window": 2}, "uint8"),
    ("morph_erode", {"se": "ball:2"}, "uint8"),
    ("morph_close", {"se": "box:1", "iterations": 2}, "uint8"),
    ("smooth_labels", {"se": "ball:1"}, "labels"),
]


def _audit_volume(kind, rng):
    if kind == "float32":
        return (rng.random((24, 12, 12)) * 1000).astype(np.float32)
    if kind == "labels":
        return (rng.integers(0, 3, size=(24, 12, 12))).astype(np.uint32)
    return rng.integers(0, 256, size=(24, 12, 12), dtype=np.uint8)


@pytest.mark.parametrize("op_name,params,input_kind", _AUDITED_OPS)
def test_plan_invariance_all_ops(op_name, params, input_kind, rng):
    from harpia.registry import get_operator, validate_params

    data = _audit_volume(input_kind, rng)
    whole = run_direct(data, op_name, params)
    profile = get_operator(op_name).profile(validate_params(get_operator(op_name), params))
    budget = _chunking_budget(data.shape, data.dtype, profile, 4)
    chunked, report = run_operator(data, op_name, params, budget)
    assert report.chunk_count >= 2, "budget failed to force chunking"
    if np.issubdtype(whole.dtype, np.floating):
        assert np.max(np.abs(chunked.astype(np.float64) - whole.astype(np.float64))) <= 1e-5
    else:
        assert np.array_equal(chunked, whole)


@pytest.mark.parametrize(
    "op_name,params,input_kind",
    [(o, p, k) for o, p, k in _AUDITED_OPS if o in ("mean", "median", "anisotropic_diffusion", "morph_erode")],
)
def test_halo_shrink_breaks_invariance(op_name, params, input_kind, rng):
    """Guard against over-declared halos: one slice less must corrupt seams."""
    from harpia.registry import get_operator, validate_params

    data = _audit_volume(input_kind, rng)
    op = get_operator(op_name)
    params = validate_params(op, params)
    true_profile = op.profile(params)
    assert true_profile.halo_z >= 1
    lying = OpProfile(
        halo_z=true_profile.halo_z - 1,
        scratch_factor=true_profile.scratch_factor,
        out_dtype=true_profile.out_dtype,
    )
    budget = _chunking_budget(data.shape, data.dtype, lying, 4)
    whole = run_direct(data, op_name, params)
    broken, report = execute_chunked(
        data, lambda b, p, a: op.fn(b, {**params, **p}, a), lying, budget, params
    )
    assert report.chunk_count >= 2
    assert not np.array_equal(broken, whole)
