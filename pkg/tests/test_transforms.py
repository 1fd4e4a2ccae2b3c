import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from fpprep import fp_core as fc
from fpprep.errors import (
    CapacityError,
    CheckFailedError,
    ContractError,
    IntegrityError,
    NonConvergenceError,
    RangeExhaustedError,
    UnsupportedInputError,
)
from fpprep.transforms import (
    CompactBinsMetadata,
    PreprocessedDataset,
    Technique,
    align_exponents,
    compact_bins_forward,
    compact_bins_inverse,
    even_odd_separate_forward,
    even_odd_separate_inverse,
    forward,
    inverse,
    multiply_shift_forward,
    multiply_shift_inverse,
    save_evenness_forward,
    save_evenness_inverse,
    shares_leading_bits,
    unalign,
)
from fpprep.transforms.bins import _choose_boundaries
from fpprep.transforms.evenodd import recurrence_next, schedule, window_high
from fpprep.transforms.mulshift import first_shift


def same_bits(a, b):
    return np.array_equal(fc.as_bits(np.asarray(a, dtype=np.float64)), fc.as_bits(np.asarray(b, dtype=np.float64)))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# -- alignment -------------------------------------------------------------


def test_align_single_region_unchanged():
    out, rec = align_exponents([1.5, 1.25])
    assert same_bits(out, [1.5, 1.25]) and rec.deltas == (0, 0) and rec.is_identity


def test_align_scales_by_power_of_two():
    out, rec = align_exponents([1.5, 3.0])
    assert same_bits(out, [1.5, 1.5]) and rec.deltas == (0, 1)


def test_align_multi_region_round_trip(rng):
    x = rng.uniform(1, 2, 500) * np.exp2(rng.integers(-40, 40, 500))
    x[::17] = 0.0
    out, rec = align_exponents(x)
    nz = out != 0
    assert np.all(fc.regions(out[nz]) == rec.reference_e_star)
    assert same_bits(unalign(out, rec), x)


def test_align_keeps_negative_zero():
    x = np.array([-0.0, 2.5, 0.0])
    for tech, p in [("bins", 2), ("mulshift", 2), ("evenodd", 2), ("evenness", 4)]:
        assert same_bits(inverse(forward(x, tech, p)), x)


@pytest.mark.parametrize("bad", [[1.0, -2.0], [math.nan], [math.inf], [5e-324], []])
def test_unsupported_inputs(bad):
    with pytest.raises(UnsupportedInputError):
        align_exponents(bad)
    with pytest.raises(UnsupportedInputError):
        forward(bad, "evenness", 3)


def test_all_zero_is_identity():
    pd = forward([0.0, -0.0], "mulshift", 3)
    assert pd.technique is Technique.IDENTITY
    assert same_bits(inverse(pd), [0.0, -0.0])


# -- compact bins ----------------------------------------------------------


def test_bins_k1_in_window_is_identity():
    # values already carrying two leading ones
    x = np.array([1.8, 1.9, 1.76])
    pd = compact_bins_forward(x, 1, 2)
    assert pd.metadata.shifts == (0.0,)
    assert same_bits(pd.values, x)
    assert same_bits(compact_bins_inverse(pd), x)


def test_bins_three_clusters_share_two_leading_ones():
    x = np.array([1.01, 1.02, 1.03, 1.40, 1.41, 1.70, 1.705, 1.71])
    pd = compact_bins_forward(x, 3, 2, checked=True)
    m = fc.mantissas(pd.values)
    assert np.all(m >> 50 == 0b11)
    assert same_bits(compact_bins_inverse(pd, checked=True), x)


def test_bins_random_k8_d6(rng):
    x = np.concatenate([rng.uniform(1 + i / 8, 1 + i / 8 + 2**-10, 125) for i in range(8)])
    rng.shuffle(x)
    pd = compact_bins_forward(x, 8, 6, checked=True)
    assert fc.shared_bits(pd.values).s_m >= 6
    assert same_bits(compact_bins_inverse(pd, checked=True), x)


def test_bins_boundaries_at_largest_gaps():
    x = np.array([1.0, 1.001, 1.5, 1.501, 1.9])
    pd = compact_bins_forward(x, 3, 1)
    assert pd.metadata.boundaries == (2, 4)


def test_bins_gap_ties_prefer_earlier():
    x = np.array([1.0, 1.25, 1.5, 1.75])
    assert _choose_boundaries(fc.regions(x), fc.mantissas(x), 2) == [1]
    assert _choose_boundaries(fc.regions(x), fc.mantissas(x), 3) == [1, 2]


def test_bins_capacity_error_reports_max_d(rng):
    x = rng.uniform(1, 2, 1000)
    with pytest.raises(CapacityError) as ei:
        compact_bins_forward(x, 2, 20)
    best = ei.value.max_feasible_d
    assert best is not None and best < 20
    if best:
        compact_bins_forward(x, 2, best)


def test_bins_k_clamped_to_unique_count():
    x = np.array([1.1, 1.1, 1.3])
    pd = compact_bins_forward(x, 10, None)
    assert pd.metadata.k == 2 and pd.metadata.ell == 2


def test_bins_k_below_region_count():
    with pytest.raises(CapacityError):
        compact_bins_forward([1.5, 3.0, 6.0], 2)


def test_bins_multi_region_per_region_windows(rng):
    x = np.concatenate([rng.uniform(1, 1.01, 50), rng.uniform(8, 8.1, 50)])
    pd = compact_bins_forward(x, 4, None, checked=True)
    assert shares_leading_bits(pd.values, pd.metadata.d)
    assert np.array_equal(fc.regions(pd.values), fc.regions(x))
    assert same_bits(compact_bins_inverse(pd), x)


def test_bins_corrupt_metadata():
    x = np.array([1.0, 1.001, 1.5, 1.501])
    pd = compact_bins_forward(x, 2, 1)
    md = pd.metadata
    bad = PreprocessedDataset(pd.values, pd.technique, CompactBinsMetadata(md.shifts, (7,), md.ell))
    with pytest.raises(IntegrityError):
        compact_bins_inverse(bad)
    bad = PreprocessedDataset(pd.values, pd.technique, CompactBinsMetadata(md.shifts + (0.0,), md.boundaries, md.ell))
    with pytest.raises(IntegrityError):
        compact_bins_inverse(bad)


# -- multiply and shift ----------------------------------------------------


def test_mulshift_already_in_window():
    x = np.array([1.9, 1.95])
    pd = multiply_shift_forward(x, 2)
    assert pd.iteration_count == 0 and same_bits(pd.values, x)
    assert same_bits(multiply_shift_inverse(pd), x)


def test_mulshift_first_shift_value():
    raw = 2**-1 - 2 * 2**-51
    a = first_shift(0, 2)
    assert a == fc.round_down_within_region(raw, 1)
    assert a <= raw and fc.is_lossless_add_within_region(a, 1)


def test_mulshift_random_d3(rng):
    x = rng.uniform(1, 2, 1000)
    pd = multiply_shift_forward(x, 3, checked=True)
    assert pd.iteration_count > 0
    assert shares_leading_bits(pd.values, 3)
    assert same_bits(multiply_shift_inverse(pd, checked=True), x)


def test_mulshift_shifts_recomputable(rng):
    x = rng.uniform(1, 2, 200)
    pd = multiply_shift_forward(x, 2)
    assert fc.region_of(pd.metadata.a_1) + 2 == pd.metadata.alignment.reference_e_star


def test_mulshift_non_convergence(rng):
    with pytest.raises(NonConvergenceError):
        multiply_shift_forward(rng.uniform(1, 2, 100), 8, max_iter=16)


def test_mulshift_range_exhausted():
    x = np.array([1.0e308, 1.1e308])
    with pytest.raises(RangeExhaustedError):
        multiply_shift_forward(x, 2)


# -- even/odd separation ---------------------------------------------------


def test_evenodd_constant_one_iteration():
    x = np.full(20, 1.3)
    pd = even_odd_separate_forward(x, 4, checked=True)
    assert pd.iteration_count <= 1
    assert same_bits(even_odd_separate_inverse(pd), x)


def test_evenodd_recurrence_example():
    assert recurrence_next(0.5, 0, 2) == 0.75


def test_evenodd_schedule_tracks_recurrence():
    d = 3
    w0_units = 3 << 49
    steps = schedule(w0_units, d, 64)
    w = math.ldexp(w0_units, -52)
    for i, (a, b) in enumerate(zip(steps, steps[1:])):
        w = recurrence_next(w, i, d)
        measured = math.ldexp(window_high(d) - b.low, i + 1 - 52)
        # the odd-shift rounding adds at most ~2 ulps per step
        assert abs(measured - w) <= math.ldexp(4 * (i + 1), i + 1 - 52)


def test_evenodd_random_disjoint_windows(rng):
    x = rng.uniform(1, 2, 1000)
    trace = []
    pd = even_odd_separate_forward(x, 2, checked=True, trace=trace)
    assert len(trace) == pd.iteration_count > 0
    for ev, od in trace:
        if ev and od:
            assert od[1] < ev[0]
    assert same_bits(even_odd_separate_inverse(pd, checked=True), x)


def test_evenodd_non_convergence_reports_max_d(rng):
    with pytest.raises(NonConvergenceError) as ei:
        even_odd_separate_forward(rng.uniform(1, 2, 100), 20)
    best = ei.value.max_feasible_d
    assert 1 <= best < 20
    even_odd_separate_forward(rng.uniform(1, 2, 100), best)


def test_evenodd_value_outside_subwindows():
    x = np.array([1.1, 1.2, 1.3])
    pd = even_odd_separate_forward(x, 3)
    assert pd.iteration_count > 0
    vals = pd.values.copy()
    # a value one region up but far below both sub-windows
    vals[0] = math.ldexp(1.0, fc.region_of(vals[0]))
    with pytest.raises(IntegrityError):
        even_odd_separate_inverse(PreprocessedDataset(vals, pd.technique, pd.metadata))


# -- save evenness ---------------------------------------------------------


def test_evenness_constant_even():
    x = np.full(9, 1.5)
    pd = save_evenness_forward(x, 4)
    assert pd.iteration_count == 1
    assert pd.metadata.evenness_bits == (bytes(2),)
    assert same_bits(save_evenness_inverse(pd), x)


def test_evenness_single_element():
    pd = save_evenness_forward([1.7], 12)
    assert all(len(b) == 1 for b in pd.metadata.evenness_bits)
    assert same_bits(save_evenness_inverse(pd), [1.7])


def test_evenness_random_d10(rng):
    x = rng.uniform(1, 2, 1000)
    pd = save_evenness_forward(x, 10, checked=True)
    md = pd.metadata
    assert len(md.evenness_bits) == md.iteration_count
    assert sum(len(b) for b in md.evenness_bits) == md.iteration_count * math.ceil(1000 / 8)
    assert fc.shared_bits(pd.values).s_m >= 10
    assert same_bits(save_evenness_inverse(pd, checked=True), x)


def test_evenness_fewer_iterations_than_evenodd(rng):
    x = rng.uniform(1, 2, 500)
    assert save_evenness_forward(x, 4).iteration_count < even_odd_separate_forward(x, 4).iteration_count


def test_evenness_stall_reports_max_d(rng):
    with pytest.raises(NonConvergenceError) as ei:
        save_evenness_forward(rng.uniform(1, 2, 100), 52)
    assert 40 <= ei.value.max_feasible_d < 52


def test_evenness_bitmap_mismatch(rng):
    x = rng.uniform(1, 2, 20)
    pd = save_evenness_forward(x, 5)
    md = pd.metadata
    short = type(md)(md.d, md.e_star, md.a_align, md.iteration_count, md.n, md.evenness_bits[:-1], md.alignment)
    with pytest.raises(IntegrityError):
        save_evenness_inverse(PreprocessedDataset(pd.values, pd.technique, short))
    wrong = type(md)(md.d, md.e_star, md.a_align, md.iteration_count, md.n, (b"\0",) * md.iteration_count, md.alignment)
    with pytest.raises(IntegrityError):
        save_evenness_inverse(PreprocessedDataset(pd.values, pd.technique, wrong))


# -- dispatch and master property ------------------------------------------


def test_forward_rejects_bad_d():
    with pytest.raises(ContractError):
        forward([1.5], "mulshift", 0)
    with pytest.raises(ContractError):
        forward([1.5], "nope", 1)


def test_inverse_rejects_unknown_technique():
    pd = forward([1.5, 1.6], "evenness", 3)
    pd.technique = 9
    with pytest.raises(IntegrityError):
        inverse(pd)


def _price_like(draw_vals):
    return np.round(np.asarray(draw_vals), 2) + 0.01


positive = st.floats(min_value=1e-200, max_value=1e200, allow_nan=False, allow_infinity=False)


@st.composite
def datasets(draw):
    kind = draw(st.sampled_from(["any", "region", "price", "constant", "single", "tail", "gauss"]))
    n = draw(st.integers(1, 60))
    if kind == "any":
        vals = draw(st.lists(st.one_of(positive, st.just(0.0)), min_size=1, max_size=n))
    elif kind == "region":
        e = draw(st.integers(-60, 60))
        man = draw(st.lists(st.integers(0, fc.MANTISSA_MASK), min_size=1, max_size=n))
        vals = [math.ldexp((1 << 52) + m, e - 52) for m in man]
    elif kind == "price":
        cents = draw(st.lists(st.integers(1, 100_000), min_size=1, max_size=n))
        vals = [c / 100 for c in cents]
    elif kind == "constant":
        vals = [draw(positive)] * n
    elif kind == "single":
        vals = [draw(positive)]
    elif kind == "tail":
        # mantissas that differ only in their last few bits, around the window edges
        base = draw(st.sampled_from([0, 1, (1 << 51) - 3, (1 << 52) - 8]))
        tails = draw(st.lists(st.integers(0, 7), min_size=1, max_size=n))
        vals = [math.ldexp((1 << 52) + base + t, -52) for t in tails]
    else:
        seed = draw(st.integers(0, 2**32 - 1))
        vals = np.abs(np.random.default_rng(seed).normal(100, 15, n)).tolist()
    return np.asarray(vals, dtype=np.float64)


def _roundtrip(x, technique, param, **kw):
    try:
        pd = forward(x, technique, param, checked=True, **kw)
    except (CapacityError, NonConvergenceError, RangeExhaustedError):
        return
    assert same_bits(inverse(pd, checked=True), x)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(datasets(), st.integers(1, 6))
def test_master_roundtrip_bins(x, k):
    nreg = len(np.unique(fc.regions(x[x != 0]))) if np.any(x) else 1
    _roundtrip(x, "bins", k + nreg - 1)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(datasets(), st.integers(1, 4))
def test_master_roundtrip_mulshift(x, d):
    _roundtrip(x, "mulshift", d)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(datasets(), st.integers(1, 4))
def test_master_roundtrip_evenodd(x, d):
    _roundtrip(x, "evenodd", d)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(datasets(), st.integers(1, 50))
def test_master_roundtrip_evenness(x, d):
    _roundtrip(x, "evenness", d)


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_small_d_always_converges(x):
    # d=1 is always within reach of every iterative technique
    for tech in ("mulshift", "evenodd", "evenness"):
        pd = forward(x, tech, 1, checked=True)
        assert same_bits(inverse(pd), x)


def test_post_transform_check_is_enforced(monkeypatch):
    import fpprep.transforms as tr

    monkeypatch.setattr(tr, "shares_leading_bits", lambda v, d: False)
    with pytest.raises(CheckFailedError):
        tr.forward([1.1, 1.2], "evenness", 3)


@pytest.mark.parametrize("x", [[2.5] * 7, [3.0], [0.0, -0.0, 0.0]])
@pytest.mark.parametrize("tech", ["bins", "mulshift", "evenodd", "evenness"])
def test_all_equal_bypasses_transform(x, tech):
    pd = forward(x, tech, 2)
    assert pd.technique is Technique.IDENTITY
    assert same_bits(pd.values, x) and same_bits(inverse(pd), x)
