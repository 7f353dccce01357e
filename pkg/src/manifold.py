"""
low-order automatic domain splitting over sets of polynomial domains

a domain whose image under a map is too nonlinear (its nonlinearity index
exceeds a threshold) is cut into three along its most nonlinear direction and
each third is mapped again. every domain remembers its trisection history,
which is what merging and replay onto the initial box rely on.
"""
from __future__ import annotations

import json
import logging
import math
from collections import defaultdict, deque
from typing import Callable, Iterable, Optional, Sequence, TextIO

import numpy as np

from src.constants import DEFAULT_MAX_DEPTH, DEFAULT_NLI_THRESHOLD
from src.custom_typing import Epoch
from src.dapoly import PolyOrReal, TaylorPoly
from src.data_classes import Domain, Manifold, SplitRecord
from src.exceptions import DegenerateMapError, DomainError, DomainEvaluationError, OrbitDeterminationError

logger = logging.getLogger(__name__)

PolyVector = Sequence[PolyOrReal]
VectorMap = Callable[[tuple], Sequence[PolyOrReal]]

History = tuple[SplitRecord, ...]


def _jacobian_parts(pv: PolyVector) -> tuple[np.ndarray, np.ndarray]:
    """
    constant jacobian J[i, j] and the first-order coefficients A[i, j, k]
    of d pv_i / d dx_j along dx_k
    """
    polys = [p for p in pv if isinstance(p, TaylorPoly)]
    if not polys:
        raise DegenerateMapError("no polynomial component to differentiate")
    spec = polys[0].spec
    if any(p.spec != spec for p in polys):
        raise DomainError("all components must share one algebra")
    constant_jacobian = np.array([p.gradient for p in polys])
    first_order = np.array([p.hessian() for p in polys])
    return constant_jacobian, first_order


def nli(pv: PolyVector) -> float:
    """
    nonlinearity index: frobenius norm of the bounds of the varying part of the
    jacobian over the frobenius norm of its constant part
    """
    constant_jacobian, first_order = _jacobian_parts(pv)
    denominator = np.sqrt(np.sum(constant_jacobian ** 2))
    if denominator == 0.0:
        raise DegenerateMapError("constant jacobian is identically zero")
    numerator = np.sqrt(np.sum(np.sum(np.abs(first_order), axis=2) ** 2))
    return float(numerator / denominator)


def directional_nli(pv: PolyVector, d: int) -> float:
    """nonlinearity index of the jacobian with every variable but dx_d set to zero"""
    constant_jacobian, first_order = _jacobian_parts(pv)
    if not 0 <= d < constant_jacobian.shape[1]:
        raise DomainError(f"direction {d} out of range")
    denominator = np.sqrt(np.sum(constant_jacobian ** 2))
    if denominator == 0.0:
        raise DegenerateMapError("constant jacobian is identically zero")
    return float(np.sqrt(np.sum(first_order[:, :, d] ** 2)) / denominator)


def _safe_nli(pv: PolyVector) -> float:
    """
    nli that tolerates a vanishing constant jacobian: a map with no first-order
    variation left is linear, one whose jacobian only varies is infinitely
    nonlinear
    """
    try:
        return nli(pv)
    except DegenerateMapError:
        if not any(isinstance(c, TaylorPoly) for c in pv):
            return 0.0
        _, first_order = _jacobian_parts(pv)
        return math.inf if np.any(first_order) else 0.0


def split_direction(pv: PolyVector) -> int:
    """most nonlinear direction, lowest index on ties"""
    constant_jacobian, first_order = _jacobian_parts(pv)
    scores = np.sqrt(np.sum(first_order ** 2, axis=(0, 1)))
    return int(np.argmax(scores))


def split(dom: Domain, d_s: int) -> tuple[Domain, Domain, Domain]:
    """trisects a domain along variable d_s, child j keeps the j-th third"""
    spec = dom.spec
    if spec is not None and not 0 <= d_s < spec.nvars:
        raise DomainError(f"split direction {d_s} out of range for {spec.nvars} variables")
    children = []
    for third in (1, 2, 3):
        shift = (2.0 / 3.0) * (third - 2)
        state = tuple(
            c.substitute_affine(d_s, shift, 1.0 / 3.0) if isinstance(c, TaylorPoly) else c
            for c in dom.state
        )
        children.append(
            dom.evolve(
                state=state,
                history=dom.history + (SplitRecord(direction=d_s, third=third),),
                flagged=False,
            )
        )
    return children[0], children[1], children[2]


def _history_key(dom: Domain) -> History:
    return dom.history


def adaptive_eval(
        f: VectorMap,
        input: Manifold,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
        epoch: Optional[Epoch] = None,
        measured: Optional[Callable[[tuple], PolyVector]] = None,
) -> tuple[Manifold, Manifold]:
    """
    maps every domain of the input manifold through f, trisecting input domains
    until each image has a nonlinearity index below eps or reached max_depth.
    returns the output manifold and the refined input manifold, both sorted by
    history and in one-to-one correspondence.
    measured picks the output components the index is computed on
    """
    if eps <= 0.0:
        raise ValueError(f"splitting threshold must be positive, got {eps}")
    if max_depth < 0:
        raise ValueError(f"maximal depth must be non-negative, got {max_depth}")
    measured = measured or (lambda state: state)
    out_epoch = input.epoch if epoch is None else epoch
    pending = deque(input.domains)
    outputs: list[Domain] = []
    refined: list[Domain] = []
    while pending:
        dom = pending.popleft()
        try:
            image = tuple(f(dom.state))
        except DomainEvaluationError:
            raise
        except (OrbitDeterminationError, ArithmeticError, ValueError) as exc:
            raise DomainEvaluationError(str(exc), dom.history) from exc
        target = measured(image)
        if not any(isinstance(c, TaylorPoly) for c in target):
            nu = 0.0
        else:
            nu = _safe_nli(target)
        flagged = False
        if nu > eps:
            if dom.depth < max_depth:
                pending.extend(split(dom, split_direction(target)))
                continue
            flagged = True
            logger.warning("domain at depth %d kept with nonlinearity index %.3e", dom.depth, nu)
        outputs.append(dom.evolve(state=image, epoch=out_epoch, flagged=flagged))
        refined.append(dom)
    outputs.sort(key=_history_key)
    refined.sort(key=_history_key)
    logger.debug("adaptive evaluation: %d domains in, %d out", len(input), len(outputs))
    return (
        Manifold(domains=tuple(outputs), epoch=out_epoch),
        Manifold(domains=tuple(refined), epoch=input.epoch),
    )


def merge(
        man: Manifold,
        nli_of: Optional[Callable[[tuple], float]] = None,
        eps: float = DEFAULT_NLI_THRESHOLD,
) -> Manifold:
    """
    recombines complete sibling triplets, deepest first, whenever the
    recombined parent passes the nonlinearity test
    """
    if eps <= 0.0:
        raise ValueError(f"merging threshold must be positive, got {eps}")
    nli_of = nli_of or _safe_nli
    current: dict[History, Domain] = {d.history: d for d in man.domains}
    if len(current) != len(man.domains):
        raise ValueError("manifold histories must be unique")
    deepest = max((d.depth for d in man.domains), default=0)
    merged = 0
    for depth in range(deepest, 0, -1):
        siblings: dict[tuple[History, int], dict[int, Domain]] = defaultdict(dict)
        for history, dom in current.items():
            if dom.depth == depth:
                last = history[-1]
                siblings[(history[:-1], last.direction)][last.third] = dom
        for (prefix, direction), group in sorted(siblings.items()):
            # an incomplete triplet (one sibling pruned away) stays as it is
            if len(group) != 3 or prefix in current:
                continue
            central = group[2]
            parent_state = tuple(
                c.substitute_affine(direction, 0.0, 3.0) if isinstance(c, TaylorPoly) else c
                for c in central.state
            )
            if nli_of(parent_state) > eps:
                continue
            pn_cov = np.maximum(np.maximum(group[1].pn_cov, group[2].pn_cov), group[3].pn_cov)
            for third in (1, 2, 3):
                del current[group[third].history]
            current[prefix] = central.evolve(state=parent_state, history=prefix, pn_cov=pn_cov, flagged=False)
            merged += 1
    if merged:
        logger.debug("merged %d triplets, %d -> %d domains", merged, len(man), len(current))
    domains = sorted(current.values(), key=_history_key)
    return Manifold(domains=tuple(domains), epoch=man.epoch)


# replay of histories onto the root deviation box

def history_box(history: Iterable[SplitRecord], nvars: int) -> tuple[np.ndarray, np.ndarray]:
    """sub-box of [-1, 1]^nvars covered by a domain with the given history"""
    lower = -np.ones(nvars)
    upper = np.ones(nvars)
    for record in history:
        width = (upper[record.direction] - lower[record.direction]) / 3.0
        lower[record.direction] += (record.third - 1) * width
        upper[record.direction] = lower[record.direction] + width
    return lower, upper


def to_local(history: Iterable[SplitRecord], point: Sequence[float]) -> np.ndarray:
    """coordinates, in the domain's own [-1, 1] box, of a point of the root box"""
    local = np.array(point, dtype=float)
    for record in history:
        local[record.direction] = 3.0 * local[record.direction] - 2.0 * (record.third - 2)
    return local


def locate(man: Manifold, point: Sequence[float], tol: float = 1e-12) -> tuple[Domain, np.ndarray]:
    """the domain covering a point of the root box, and the point in its local coordinates"""
    point = np.asarray(point, dtype=float)
    for dom in man.domains:
        lower, upper = history_box(dom.history, point.size)
        if np.all(point >= lower - tol) and np.all(point <= upper + tol):
            return dom, to_local(dom.history, point)
    raise ValueError("no domain of the manifold covers the point")


def evaluate_domain(dom: Domain, local: Sequence[float]) -> np.ndarray:
    return np.array([
        c.eval(local) if isinstance(c, TaylorPoly) else float(c) for c in dom.state
    ])


def evaluate_manifold(man: Manifold, point: Sequence[float]) -> np.ndarray:
    """value of the manifold at a point of the root box"""
    dom, local = locate(man, point)
    return evaluate_domain(dom, local)


def refine(dom: Domain, records: Iterable[SplitRecord]) -> Domain:
    """applies further trisections to a domain"""
    for record in records:
        dom = split(dom, record.direction)[record.third - 1]
    return dom


def is_prefix(prefix: Sequence[SplitRecord], history: Sequence[SplitRecord]) -> bool:
    return len(prefix) <= len(history) and tuple(history[:len(prefix)]) == tuple(prefix)


def initial_box_volume(histories: Iterable[Sequence[SplitRecord]], nvars: int) -> float:
    """fraction of the root box covered by domains with the given (disjoint) histories"""
    total = 0.0
    for history in histories:
        lower, upper = history_box(history, nvars)
        total += float(np.prod((upper - lower) / 2.0))
    return total


def dump_jsonl(man: Manifold, stream: TextIO) -> None:
    """one json line per domain with history, component bounds and process-noise covariance"""
    for dom in man.domains:
        line = {
            "epoch": float(man.epoch),
            "history": [[r.direction, r.third] for r in dom.history],
            "flagged": dom.flagged,
            "bounds": [[b.lower, b.upper] for b in dom.bounds()],
            "pn_cov": np.asarray(dom.pn_cov).tolist(),
        }
        stream.write(json.dumps(line) + "\n")


__all__ = [
    "nli",
    "directional_nli",
    "split_direction",
    "split",
    "adaptive_eval",
    "merge",
    "history_box",
    "to_local",
    "locate",
    "evaluate_domain",
    "evaluate_manifold",
    "refine",
    "is_prefix",
    "initial_box_volume",
    "dump_jsonl",
]
