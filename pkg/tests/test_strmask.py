import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fewpixel.strmask import (StrAttackParams, admm_structured, binary_mask, eligible_pixels,
                              group_norm, group_prox, init_from_mask, load_mask_png,
                              mask_call_cost, mask_init_vector, pad_perturbation,
                              save_mask_png, strattack, structured_mask)
from fewpixel.core import decode, search_bounds


def test_prox_zero_stays_zero():
    assert np.array_equal(group_prox(np.zeros((4, 4, 3)), 1.0), np.zeros((4, 4, 3)))


def test_prox_small_group_zeroed():
    v = np.zeros((2, 2, 3))
    v[0, 0, 0] = 0.3
    assert np.all(group_prox(v, 0.3) == 0.0)


def test_prox_closed_form_3_4():
    assert np.allclose(group_prox(np.array([3.0, 4.0]), 2.5), [1.5, 2.0], rtol=1e-12)


def test_prox_groups_are_independent():
    v = np.zeros((4, 4, 3))
    v[0, 0] = 10.0
    v[3, 3, 1] = 0.1
    out = group_prox(v, 1.0, 2, 2)
    assert np.all(out[2:, 2:] == 0.0)
    assert np.linalg.norm(out[:2, :2]) == pytest.approx(np.sqrt(300) - 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
def test_prox_group_norm_shrinks_by_lambda(seed, lam):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(6, 6, 3))
    out = group_prox(v, lam, 2, 2)
    for y in range(0, 6, 2):
        for x in range(0, 6, 2):
            n = np.linalg.norm(v[y:y + 2, x:x + 2])
            assert np.linalg.norm(out[y:y + 2, x:x + 2]) == pytest.approx(max(0.0, n - lam), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_prox_nonexpansive(seed, lam):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 4, 6, 3))
    lhs = np.linalg.norm(group_prox(a, lam) - group_prox(b, lam))
    assert lhs <= np.linalg.norm(a - b) + 1e-12


def test_prox_rejects_negative_threshold():
    with pytest.raises(ValueError):
        group_prox(np.ones(3), -0.1)


def test_group_norm_with_ragged_edges():
    v = np.ones((3, 3, 1))
    # groups: 2x2 (norm 2), 2x1 twice (norm sqrt 2), 1x1 (norm 1)
    assert group_norm(v) == pytest.approx(2 + 2 * np.sqrt(2) + 1)


def test_mask_all_zero():
    assert not binary_mask(np.zeros((3, 3, 3)), 0.1).any()


def test_mask_strict_threshold():
    d = np.zeros((2, 2, 3))
    d[0, 0, 0] = 10.0
    d[1, 1, 2] = 1.0  # exactly 0.1 * max
    m = binary_mask(d, 0.1)
    assert m[0, 0, 0] and not m[1, 1, 2]


def test_mask_single_entry():
    d = np.zeros((4, 4, 3))
    d[2, 1, 1] = -0.01
    for theta in (0.01, 0.5, 0.99):
        m = binary_mask(d, theta)
        assert m.sum() == 1 and m[2, 1, 1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_mask_scale_invariant(seed, c):
    d = np.random.default_rng(seed).normal(size=(5, 5, 3))
    assert np.array_equal(binary_mask(c * d, 0.3), binary_mask(d, 0.3))


def _mask_with(pixels, shape=(8, 8, 3)):
    m = np.zeros(shape, dtype=bool)
    for x, y, c in pixels:
        m[y, x, c] = True
    return m


def test_init_from_mask_contract(rng):
    img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    mask = _mask_with([(1, 2, 0), (5, 5, 2), (7, 0, 1), (3, 3, 1), (3, 3, 2)])
    p, fallback = init_from_mask(img, mask, 3, rng)
    assert not fallback and len(p) == 3
    eligible = {tuple(xy) for xy in eligible_pixels(mask)}
    assert len(set(p.positions())) == 3
    for x, y, r, g, b in p.tuples:
        assert (x, y) in eligible
        assert [r, g, b] == (255 - img[y, x].astype(int)).tolist()


def test_init_from_mask_min_rule(rng):
    img = np.zeros((8, 8, 3), np.uint8)
    p, _ = init_from_mask(img, _mask_with([(0, 0, 0), (1, 1, 1), (2, 2, 2)]), 25, rng)
    assert len(p) == 3 and p.limit == 25


def test_init_from_mask_deterministic():
    img = np.zeros((8, 8, 3), np.uint8)
    mask = np.ones((8, 8, 3), bool)
    a, _ = init_from_mask(img, mask, 5, np.random.default_rng(1))
    b, _ = init_from_mask(img, mask, 5, np.random.default_rng(1))
    assert a == b


def test_init_from_empty_mask_falls_back(rng):
    img = np.full((8, 8, 3), 200, np.uint8)
    with pytest.warns(RuntimeWarning):
        p, fallback = init_from_mask(img, np.zeros((8, 8, 3), bool), 4, rng)
    assert fallback and len(p) == 4
    assert np.all(p.tuples[:, 2:] == 55)


def test_pad_and_vector(rng):
    img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    mask = _mask_with([(1, 1, 0), (2, 2, 0)])
    v = mask_init_vector(img, mask, 5, rng)
    assert v.shape == (25,)
    p = decode(v, search_bounds(8, 8, 5))
    assert set(p.positions()) == {(1, 1), (2, 2)}
    with pytest.raises(ValueError):
        pad_perturbation(p.__class__(np.zeros((0, 5)), 5), 5)


def test_mask_call_cost():
    assert mask_call_cost() == 5
    assert mask_call_cost(StrAttackParams(call_cost=0)) == 0
    assert 15000 - mask_call_cost() == 14995


def test_mask_png_roundtrip(tmp_path, rng):
    m = rng.random((6, 7, 3)) > 0.5
    paths = save_mask_png(m, tmp_path / "img0")
    assert [p.name for p in paths] == ["img0_r.png", "img0_g.png", "img0_b.png"]
    assert np.array_equal(load_mask_png(tmp_path / "img0"), m)


def test_huge_tau_gives_no_perturbation(quick_model, small_split):
    _, (x, y) = small_split
    d = strattack(quick_model, x[0], int(y[0]), StrAttackParams(tau=1e6))
    assert np.abs(d).max() < 1e-3


def test_strattack_deterministic_and_in_range(quick_model, small_split):
    _, (x, y) = small_split
    a = strattack(quick_model, x[1], int(y[1]))
    b = strattack(quick_model, x[1], int(y[1]))
    assert np.array_equal(a, b)
    adv = x[1].astype(float) + a
    assert adv.min() >= -1e-9 and adv.max() <= 255 + 1e-9


def test_strattack_finds_structure(shapes_model, default_split):
    _, (x, y) = default_split
    i = int(np.flatnonzero(shapes_model.predict(x) == y)[0])
    res = admm_structured(shapes_model, x[i], int(y[i]))
    assert len(res.objective) == StrAttackParams().iterations
    assert np.all(np.isfinite(res.objective))
    m = binary_mask(res.delta, 0.1)
    assert 0 < len(eligible_pixels(m)) < 32 * 32


def test_params_validation():
    for kw in ({"tau": 0.0}, {"stride": 1, "group_size": 2}, {"threshold": 1.0},
               {"iterations": 0}, {"call_cost": -1}):
        with pytest.raises(ValueError):
            StrAttackParams(**kw)


def test_structured_mask_backs_off_tau_for_confident_inputs(shapes_model, default_split):
    _, (x, y) = default_split
    ok = np.flatnonzero(shapes_model.predict(x) == y)[:40]
    empty = [i for i in ok
             if not binary_mask(strattack(shapes_model, x[i], int(y[i])), 0.1).any()]
    assert empty
    for i in empty:
        assert structured_mask(shapes_model, x[i], int(y[i])).any()
        no_retry = StrAttackParams(tau_backoff=0)
        assert not structured_mask(shapes_model, x[i], int(y[i]), no_retry).any()
