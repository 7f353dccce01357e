import io
import json

import numpy as np
import pytest

from src.dapoly import AlgebraSpec, make_variable
from src.data_classes import Domain, Manifold, SplitRecord
from src.exceptions import DomainError, DomainEvaluationError
from src.manifold import (
    adaptive_eval,
    directional_nli,
    dump_jsonl,
    evaluate_manifold,
    history_box,
    initial_box_volume,
    is_prefix,
    locate,
    merge,
    nli,
    refine,
    split,
    split_direction,
)


def _root(spec: AlgebraSpec) -> Manifold:
    state = tuple(make_variable(spec, i) for i in range(spec.nvars))
    return Manifold(domains=(Domain(state=state),))


def _stress(state: tuple) -> tuple:
    x, y = state
    return x * x + y, y


def test_affine_maps_are_linear(spec2: AlgebraSpec) -> None:
    x = make_variable(spec2, 0)
    y = make_variable(spec2, 1)
    assert nli((x + 2.0 * y, 3.0 * x - y)) == 0.0
    assert directional_nli((x + 2.0 * y, 3.0 * x - y), 1) == 0.0


def test_split_direction_follows_the_curvature(spec2: AlgebraSpec) -> None:
    x = make_variable(spec2, 0)
    y = make_variable(spec2, 1)
    assert split_direction((x + y * y, x)) == 1
    assert split_direction((x * x + y, y)) == 0


def test_adaptive_eval_meets_the_threshold(spec2: AlgebraSpec) -> None:
    eps = 0.1
    output, refined = adaptive_eval(_stress, _root(spec2), eps=eps, max_depth=8)
    assert len(output) > 1
    assert len(output) == len(refined)
    for dom in output:
        assert dom.flagged or nli(dom.state) <= eps
    assert initial_box_volume(output.histories(), 2) == pytest.approx(1.0)
    for point in np.random.default_rng(2).uniform(-1.0, 1.0, size=(25, 2)):
        value = evaluate_manifold(output, point)
        assert value[0] == pytest.approx(point[0] ** 2 + point[1], abs=1e-12)


def test_depth_limit_flags_domains(spec2: AlgebraSpec) -> None:
    output, _ = adaptive_eval(_stress, _root(spec2), eps=1e-6, max_depth=1)
    assert len(output) == 3
    assert output.flagged_count() == 3


def test_vanishing_slope_is_not_linear() -> None:
    spec = AlgebraSpec(order=2, nvars=1)
    eps = 0.01
    output, _ = adaptive_eval(lambda s: (s[0] * s[0],), _root(spec), eps=eps, max_depth=6)
    assert len(output) > 1
    # the third around the vertex keeps a zero slope down to the depth limit
    assert output.flagged_count() > 0
    for dom in output:
        assert dom.flagged or nli(dom.state) <= eps
    # a constant image needs no splitting
    constant, _ = adaptive_eval(lambda s: (s[0] * 0.0 + 2.0,), _root(spec), eps=eps, max_depth=6)
    assert len(constant) == 1 and constant.flagged_count() == 0
    # nor does a parent with a vanishing slope get merged back
    children = split(_root(spec)[0], 0)
    squared = Manifold(domains=tuple(c.evolve(state=(c.state[0] * c.state[0],)) for c in children))
    assert len(merge(squared, eps=10.0)) == 3


def test_split_then_merge_restores_the_parent(spec2: AlgebraSpec) -> None:
    x = make_variable(spec2, 0)
    y = make_variable(spec2, 1)
    parent = Domain(state=(x + 0.01 * y * y, y))
    children = split(parent, 0)
    assert [c.history for c in children] == [(SplitRecord(0, t),) for t in (1, 2, 3)]
    merged = merge(Manifold(domains=children), eps=0.1)
    assert len(merged) == 1
    assert merged[0].history == ()
    for original, recovered in zip(parent.state, merged[0].state):
        np.testing.assert_allclose(recovered.coeffs, original.coeffs, atol=1e-12)


def test_merge_never_increases_the_count(spec2: AlgebraSpec) -> None:
    output, _ = adaptive_eval(_stress, _root(spec2), eps=0.05, max_depth=6)
    merged = merge(output, eps=0.05)
    assert len(merged) <= len(output)
    relaxed = merge(output, eps=10.0)
    assert len(relaxed) == 1


def test_incomplete_triplets_stay(spec2: AlgebraSpec) -> None:
    children = split(_root(spec2)[0], 1)
    merged = merge(Manifold(domains=children[:2]), eps=10.0)
    assert len(merged) == 2


def test_history_replay(spec2: AlgebraSpec) -> None:
    history = (SplitRecord(0, 1), SplitRecord(1, 3), SplitRecord(0, 2))
    lower, upper = history_box(history, 2)
    np.testing.assert_allclose(lower, [-1.0 + 2.0 / 9.0, 1.0 / 3.0])
    np.testing.assert_allclose(upper, [-1.0 + 4.0 / 9.0, 1.0])
    dom = refine(_root(spec2)[0], history)
    assert dom.history == history
    assert is_prefix(history[:2], history)
    assert not is_prefix(history[1:], history)
    found, local = locate(Manifold(domains=(dom,)), 0.5 * (lower + upper))
    assert found is dom
    np.testing.assert_allclose(local, [0.0, 0.0], atol=1e-12)


def test_failures_carry_the_history(spec2: AlgebraSpec) -> None:
    def failing(state: tuple) -> tuple:
        x, y = state
        return (x + 1.0).sqrt(), y

    with pytest.raises(DomainEvaluationError) as info:
        adaptive_eval(lambda s: failing((s[0] - 1.0, s[1])), _root(spec2))
    assert info.value.history == ()
    with pytest.raises(ValueError):
        adaptive_eval(_stress, _root(spec2), eps=0.0)
    with pytest.raises(DomainError):
        split(_root(spec2)[0], 5)


def test_dump_jsonl(spec2: AlgebraSpec) -> None:
    output, _ = adaptive_eval(_stress, _root(spec2), eps=0.1, max_depth=8)
    stream = io.StringIO()
    dump_jsonl(output, stream)
    lines = [json.loads(line) for line in stream.getvalue().splitlines()]
    assert len(lines) == len(output)
    assert all(len(line["bounds"]) == 2 for line in lines)
