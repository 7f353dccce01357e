"""
truncated multivariate taylor polynomials (differential algebra)

every polynomial of one computation shares an AlgebraSpec: the truncation
order n and the number v of deviation variables. coefficients are stored
densely in graded-lexicographic order, index 0 being the constant part and
indices 1..v the first-order terms of variables 0..v-1.

the module-level helpers (sin, sqrt, atan2, ...) accept either plain floats
or TaylorPoly values, so every map written with them can be evaluated
pointwise or over a polynomial domain.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from src.constants import COEFF_CLEANUP_TOL, DEFAULT_ORDER, MAX_ORDER
from src.exceptions import DomainError

REAL_TYPES = (int, float, np.integer, np.floating)


@dataclass(frozen=True)
class AlgebraSpec:
    """truncation order and number of deviation variables of an algebra"""
    # truncation order n
    order: int = DEFAULT_ORDER
    # number of independent deviation variables v
    nvars: int = 6

    def __post_init__(self) -> None:
        if not 1 <= self.order <= MAX_ORDER:
            raise DomainError(f"truncation order must lie in [1, {MAX_ORDER}], got {self.order}")
        if self.nvars < 1:
            raise DomainError(f"an algebra needs at least one variable, got {self.nvars}")

    @property
    def size(self) -> int:
        """number of monomials of total degree at most order"""
        return math.comb(self.order + self.nvars, self.nvars)


@dataclass(frozen=True)
class RangeBound:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


@dataclass(frozen=True)
class _Tables:
    exponents: np.ndarray
    index: dict
    degree: np.ndarray
    even: np.ndarray
    mul_left: np.ndarray
    mul_right: np.ndarray
    mul_target: np.ndarray
    parent: np.ndarray
    last_var: np.ndarray
    # second-degree monomials as (monomial, first var, second var)
    quad_index: np.ndarray
    quad_vars: np.ndarray


@lru_cache(maxsize=None)
def _tables(order: int, nvars: int) -> _Tables:
    exps: list[tuple[int, ...]] = []
    for degree in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), degree):
            exponent = [0] * nvars
            for var in combo:
                exponent[var] += 1
            exps.append(tuple(exponent))
    index = {e: i for i, e in enumerate(exps)}
    exponents = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
    degree = exponents.sum(axis=1)
    even = (degree > 0) & np.all(exponents % 2 == 0, axis=1)

    # product table, restricted to pairs that survive truncation
    by_degree = [np.flatnonzero(degree == d) for d in range(order + 1)]
    left, right, target = [], [], []
    for i, ei in enumerate(exps):
        for d in range(order + 1 - degree[i]):
            for j in by_degree[d]:
                left.append(i)
                right.append(j)
                target.append(index[tuple(a + b for a, b in zip(ei, exps[j]))])

    parent = np.full(len(exps), -1, dtype=np.int64)
    last_var = np.full(len(exps), -1, dtype=np.int64)
    for i, e in enumerate(exps[1:], start=1):
        var = max(k for k, p in enumerate(e) if p > 0)
        reduced = list(e)
        reduced[var] -= 1
        parent[i] = index[tuple(reduced)]
        last_var[i] = var

    quad = np.flatnonzero(degree == 2)
    quad_vars = np.array(
        [[k for k, p in enumerate(exps[m]) for _ in range(p)] for m in quad],
        dtype=np.int64,
    ).reshape(len(quad), 2)
    return _Tables(
        exponents=exponents,
        index=index,
        degree=degree,
        even=even,
        mul_left=np.array(left, dtype=np.int64),
        mul_right=np.array(right, dtype=np.int64),
        mul_target=np.array(target, dtype=np.int64),
        parent=parent,
        last_var=last_var,
        quad_index=quad,
        quad_vars=quad_vars,
    )


@lru_cache(maxsize=None)
def _partial_table(order: int, nvars: int, var: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tables = _tables(order, nvars)
    src, dst, factor = [], [], []
    for i, e in enumerate(tables.exponents):
        if e[var] > 0:
            reduced = e.copy()
            reduced[var] -= 1
            src.append(i)
            dst.append(tables.index[tuple(int(x) for x in reduced)])
            factor.append(float(e[var]))
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(factor)


@lru_cache(maxsize=None)
def _affine_table(order: int, nvars: int, var: int):
    """expansion of every monomial under x_var -> a + b x_var, as binomial terms"""
    tables = _tables(order, nvars)
    src, dst, binom, power_a, power_b = [], [], [], [], []
    for i, e in enumerate(tables.exponents):
        k = int(e[var])
        for j in range(k + 1):
            reduced = [int(x) for x in e]
            reduced[var] = j
            src.append(i)
            dst.append(tables.index[tuple(reduced)])
            binom.append(float(math.comb(k, j)))
            power_a.append(k - j)
            power_b.append(j)
    return (
        np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64),
        np.array(binom),
        np.array(power_a, dtype=np.int64),
        np.array(power_b, dtype=np.int64),
    )


@lru_cache(maxsize=None)
def _embed_table(order: int, nvars_from: int, nvars_to: int, offset: int) -> np.ndarray:
    source = _tables(order, nvars_from)
    target = _tables(order, nvars_to)
    mapping = []
    for e in source.exponents:
        padded = [0] * nvars_to
        padded[offset:offset + nvars_from] = [int(x) for x in e]
        mapping.append(target.index[tuple(padded)])
    return np.array(mapping, dtype=np.int64)


def _cleanup(coeffs: np.ndarray) -> np.ndarray:
    threshold = COEFF_CLEANUP_TOL * (1.0 + abs(coeffs[0]))
    coeffs[np.abs(coeffs) < threshold] = 0.0
    return coeffs


class TaylorPoly:
    """
    immutable truncated taylor polynomial over an AlgebraSpec
    arithmetic operators mix freely with real scalars
    """
    __slots__ = ("spec", "coeffs")
    # numpy defers binary operations to our reflected operators
    __array_ufunc__ = None

    def __init__(self, spec: AlgebraSpec, coeffs: Iterable[float], clean: bool = True) -> None:
        values = np.array(coeffs, dtype=float)
        if values.shape != (spec.size,):
            raise DomainError(f"expected {spec.size} coefficients for {spec}, got {values.shape}")
        if clean:
            values = _cleanup(values)
        values.flags.writeable = False
        self.spec = spec
        self.coeffs = values

    # construction helpers

    @classmethod
    def constant(cls, spec: AlgebraSpec, value: float) -> TaylorPoly:
        coeffs = np.zeros(spec.size)
        coeffs[0] = value
        return cls(spec, coeffs)

    @property
    def tables(self) -> _Tables:
        return _tables(self.spec.order, self.spec.nvars)

    @property
    def cst(self) -> float:
        """constant part a_0"""
        return float(self.coeffs[0])

    @property
    def gradient(self) -> np.ndarray:
        """first-order coefficients, one per variable"""
        return np.array(self.coeffs[1:1 + self.spec.nvars])

    def hessian(self) -> np.ndarray:
        """matrix of second partial derivatives at the expansion point"""
        nvars = self.spec.nvars
        result = np.zeros((nvars, nvars))
        if self.spec.order < 2:
            return result
        tables = self.tables
        values = self.coeffs[tables.quad_index]
        first, second = tables.quad_vars[:, 0], tables.quad_vars[:, 1]
        diagonal = first == second
        result[first[diagonal], first[diagonal]] = 2.0 * values[diagonal]
        result[first[~diagonal], second[~diagonal]] = values[~diagonal]
        result[second[~diagonal], first[~diagonal]] = values[~diagonal]
        return result

    def terms(self) -> list[tuple[tuple[int, ...], float]]:
        """nonzero (exponent, coefficient) pairs in storage order"""
        exponents = self.tables.exponents
        return [
            (tuple(int(x) for x in exponents[i]), float(c))
            for i, c in enumerate(self.coeffs) if c != 0.0
        ]

    def nonconstant(self) -> TaylorPoly:
        coeffs = self.coeffs.copy()
        coeffs[0] = 0.0
        return TaylorPoly(self.spec, coeffs, clean=False)

    def linear(self) -> TaylorPoly:
        """constant plus first-order part"""
        coeffs = self.coeffs.copy()
        coeffs[self.tables.degree > 1] = 0.0
        return TaylorPoly(self.spec, coeffs, clean=False)

    # arithmetic

    def _coerce(self, other) -> TaylorPoly | None:
        if isinstance(other, TaylorPoly):
            if other.spec != self.spec:
                raise DomainError(f"algebra mismatch: {self.spec} vs {other.spec}")
            return other
        if isinstance(other, REAL_TYPES):
            return TaylorPoly.constant(self.spec, float(other))
        return None

    def __add__(self, other):
        if isinstance(other, REAL_TYPES):
            coeffs = self.coeffs.copy()
            coeffs[0] += float(other)
            return TaylorPoly(self.spec, coeffs)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return TaylorPoly(self.spec, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self) -> TaylorPoly:
        return TaylorPoly(self.spec, -self.coeffs, clean=False)

    def __pos__(self) -> TaylorPoly:
        return self

    def __sub__(self, other):
        if isinstance(other, REAL_TYPES):
            return self + (-float(other))
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return TaylorPoly(self.spec, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        if not isinstance(other, REAL_TYPES):
            return NotImplemented
        return (-self) + float(other)

    def __mul__(self, other):
        if isinstance(other, REAL_TYPES):
            return TaylorPoly(self.spec, self.coeffs * float(other))
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        tables = self.tables
        weights = self.coeffs[tables.mul_left] * other.coeffs[tables.mul_right]
        product = np.bincount(tables.mul_target, weights=weights, minlength=self.spec.size)
        return TaylorPoly(self.spec, product)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, REAL_TYPES):
            if other == 0:
                raise DomainError("division by zero")
            return TaylorPoly(self.spec, self.coeffs / float(other))
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        if not isinstance(other, REAL_TYPES):
            return NotImplemented
        return self.reciprocal() * float(other)

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)):
            exponent = int(exponent)
            if exponent < 0:
                return self.reciprocal() ** (-exponent)
            result = TaylorPoly.constant(self.spec, 1.0)
            base = self
            # square-and-multiply
            while exponent:
                if exponent & 1:
                    result = result * base
                exponent >>= 1
                if exponent:
                    base = base * base
            return result
        if isinstance(exponent, REAL_TYPES):
            return self.power(float(exponent))
        return NotImplemented

    def __repr__(self) -> str:
        shown = " + ".join(f"{c:.6g}*{list(e)}" for e, c in self.terms()[:8])
        return f"TaylorPoly(order={self.spec.order}, nvars={self.spec.nvars}: {shown or '0'})"

    # elementary functions

    def _series(self, coefficients: Sequence[float]) -> TaylorPoly:
        """sum_k coefficients[k] * (p - a_0)^k, horner form"""
        increment = self.nonconstant()
        result = TaylorPoly.constant(self.spec, coefficients[self.spec.order])
        for k in range(self.spec.order - 1, -1, -1):
            result = result * increment + coefficients[k]
        return result

    def exp(self) -> TaylorPoly:
        base = math.exp(self.cst)
        return self._series([base / math.factorial(k) for k in range(self.spec.order + 1)])

    def log(self) -> TaylorPoly:
        a0 = self.cst
        if a0 <= 0.0:
            raise DomainError(f"log of a polynomial with constant part {a0}")
        coefficients = [math.log(a0)]
        coefficients += [(-1.0) ** (k + 1) / (k * a0 ** k) for k in range(1, self.spec.order + 1)]
        return self._series(coefficients)

    def power(self, alpha: float) -> TaylorPoly:
        a0 = self.cst
        if a0 == 0.0 or (a0 < 0.0 and not float(alpha).is_integer()):
            raise DomainError(f"power {alpha} of a polynomial with constant part {a0}")
        coefficients = []
        binom = 1.0
        for k in range(self.spec.order + 1):
            coefficients.append(binom * a0 ** (alpha - k))
            binom *= (alpha - k) / (k + 1)
        return self._series(coefficients)

    def sqrt(self) -> TaylorPoly:
        if self.cst <= 0.0:
            raise DomainError(f"sqrt of a polynomial with constant part {self.cst}")
        return self.power(0.5)

    def reciprocal(self) -> TaylorPoly:
        a0 = self.cst
        if a0 == 0.0:
            raise DomainError("reciprocal of a polynomial with zero constant part")
        return self._series([(-1.0) ** k / a0 ** (k + 1) for k in range(self.spec.order + 1)])

    def sin(self) -> TaylorPoly:
        s, c = math.sin(self.cst), math.cos(self.cst)
        cycle = (s, c, -s, -c)
        return self._series([cycle[k % 4] / math.factorial(k) for k in range(self.spec.order + 1)])

    def cos(self) -> TaylorPoly:
        s, c = math.sin(self.cst), math.cos(self.cst)
        cycle = (c, -s, -c, s)
        return self._series([cycle[k % 4] / math.factorial(k) for k in range(self.spec.order + 1)])

    def tan(self) -> TaylorPoly:
        if math.cos(self.cst) == 0.0:
            raise DomainError("tan at an odd multiple of pi/2")
        return self.sin() / self.cos()

    def sinh(self) -> TaylorPoly:
        s, c = math.sinh(self.cst), math.cosh(self.cst)
        cycle = (s, c)
        return self._series([cycle[k % 2] / math.factorial(k) for k in range(self.spec.order + 1)])

    def cosh(self) -> TaylorPoly:
        s, c = math.sinh(self.cst), math.cosh(self.cst)
        cycle = (c, s)
        return self._series([cycle[k % 2] / math.factorial(k) for k in range(self.spec.order + 1)])

    def atan(self) -> TaylorPoly:
        a0 = self.cst
        # atan(p) = atan(a0) + atan(u), u = (p - a0) / (1 + a0 p) has no constant part
        reduced = self.nonconstant() * (self * a0 + 1.0).reciprocal()
        coefficients = [0.0] + [
            ((-1.0) ** ((k - 1) // 2) / k) if k % 2 else 0.0
            for k in range(1, self.spec.order + 1)
        ]
        return reduced._series(coefficients) + math.atan(a0)

    def asin(self) -> TaylorPoly:
        if abs(self.cst) >= 1.0:
            raise DomainError(f"asin of a polynomial with constant part {self.cst}")
        return atan2(self, (1.0 - self * self).sqrt())

    def acos(self) -> TaylorPoly:
        if abs(self.cst) >= 1.0:
            raise DomainError(f"acos of a polynomial with constant part {self.cst}")
        return atan2((1.0 - self * self).sqrt(), self)

    # calculus and evaluation

    def partial(self, var: int) -> TaylorPoly:
        if not 0 <= var < self.spec.nvars:
            raise DomainError(f"variable {var} out of range for {self.spec.nvars} variables")
        src, dst, factor = _partial_table(self.spec.order, self.spec.nvars, var)
        coeffs = np.bincount(dst, weights=self.coeffs[src] * factor, minlength=self.spec.size)
        return TaylorPoly(self.spec, coeffs)

    def eval(self, point: Sequence[float]) -> float:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.spec.nvars,):
            raise DomainError(f"expected a point with {self.spec.nvars} entries, got {point.shape}")
        monomials = np.prod(point[None, :] ** self.tables.exponents, axis=1)
        return float(monomials @ self.coeffs)

    def bound(self) -> RangeBound:
        coeffs = self.coeffs[1:]
        even = self.tables.even[1:]
        lower = np.where(even, np.minimum(coeffs, 0.0), -np.abs(coeffs))
        upper = np.where(even, np.maximum(coeffs, 0.0), np.abs(coeffs))
        a0 = self.coeffs[0]
        return RangeBound(lower=float(a0 + lower.sum()), upper=float(a0 + upper.sum()))

    def substitute_affine(self, var: int, shift: float, scale: float) -> TaylorPoly:
        """exact image of the polynomial under x_var -> shift + scale * x_var"""
        src, dst, binom, power_a, power_b = _affine_table(self.spec.order, self.spec.nvars, var)
        weights = self.coeffs[src] * binom * float(shift) ** power_a * float(scale) ** power_b
        return TaylorPoly(self.spec, np.bincount(dst, weights=weights, minlength=self.spec.size))

    def embed(self, new_spec: AlgebraSpec, var_offset: int = 0) -> TaylorPoly:
        return embed(self, new_spec, var_offset)


PolyOrReal = Union[TaylorPoly, float]


def make_variable(spec: AlgebraSpec, index: int, center: float = 0.0, scale: float = 1.0) -> TaylorPoly:
    """the polynomial center + scale * dx_index"""
    if not 0 <= index < spec.nvars:
        raise DomainError(f"variable {index} out of range for {spec.nvars} variables")
    if scale < 0.0:
        raise DomainError(f"variable scale must be non-negative, got {scale}")
    coeffs = np.zeros(spec.size)
    coeffs[0] = center
    coeffs[1 + index] = scale
    return TaylorPoly(spec, coeffs)


def arith(op: str, a: TaylorPoly, b: PolyOrReal) -> TaylorPoly:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scalar_mul":
        if not isinstance(b, REAL_TYPES):
            raise DomainError("scalar_mul expects a real scalar")
        return a * b
    raise DomainError(f"unknown arithmetic operation {op}")


def elementary(fn: str, p: TaylorPoly, q: PolyOrReal | None = None) -> TaylorPoly:
    if fn == "atan2":
        if q is None:
            raise DomainError("atan2 needs two arguments")
        return atan2(p, q)
    if fn == "power":
        if q is None:
            raise DomainError("power needs an exponent")
        return p ** q
    unary = {
        "sin": p.sin, "cos": p.cos, "tan": p.tan, "asin": p.asin, "acos": p.acos,
        "atan": p.atan, "sqrt": p.sqrt, "exp": p.exp, "log": p.log,
        "reciprocal": p.reciprocal, "sinh": p.sinh, "cosh": p.cosh,
    }
    if fn not in unary:
        raise DomainError(f"unknown elementary function {fn}")
    return unary[fn]()


def compose(p: TaylorPoly, args: Sequence[TaylorPoly]) -> TaylorPoly:
    """substitutes args for the variables of p, truncating in the algebra of args"""
    if len(args) != p.spec.nvars:
        raise DomainError(f"compose needs {p.spec.nvars} arguments, got {len(args)}")
    specs = {a.spec for a in args if isinstance(a, TaylorPoly)}
    if len(specs) != 1:
        raise DomainError("compose arguments must share one algebra")
    target = specs.pop()
    args = [a if isinstance(a, TaylorPoly) else TaylorPoly.constant(target, a) for a in args]
    tables = p.tables
    powers: list[TaylorPoly] = [TaylorPoly.constant(target, 1.0)]
    result = np.zeros(target.size)
    result[0] = p.coeffs[0]
    for m in range(1, p.spec.size):
        powers.append(powers[tables.parent[m]] * args[tables.last_var[m]])
        if p.coeffs[m] != 0.0:
            result += p.coeffs[m] * powers[m].coeffs
    return TaylorPoly(target, result)


def partial(p: TaylorPoly, var: int) -> TaylorPoly:
    return p.partial(var)


def evaluate(p: TaylorPoly, point: Sequence[float]) -> float:
    return p.eval(point)


def bound(p: PolyOrReal) -> RangeBound:
    if isinstance(p, TaylorPoly):
        return p.bound()
    return RangeBound(lower=float(p), upper=float(p))


def embed(p: TaylorPoly, new_spec: AlgebraSpec, var_offset: int = 0) -> TaylorPoly:
    """re-keys p into a larger algebra, its variables landing at var_offset onwards"""
    if new_spec.order != p.spec.order:
        raise DomainError("embedding requires equal truncation orders")
    if var_offset < 0 or var_offset + p.spec.nvars > new_spec.nvars:
        raise DomainError(f"cannot embed {p.spec.nvars} variables at offset {var_offset} into {new_spec.nvars}")
    mapping = _embed_table(p.spec.order, p.spec.nvars, new_spec.nvars, var_offset)
    coeffs = np.zeros(new_spec.size)
    coeffs[mapping] = p.coeffs
    return TaylorPoly(new_spec, coeffs, clean=False)


def monomial_basis(spec: AlgebraSpec, points: np.ndarray) -> np.ndarray:
    """values of every monomial at every point, shape (len(points), spec.size)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    exponents = _tables(spec.order, spec.nvars).exponents
    return np.prod(points[:, None, :] ** exponents[None, :, :], axis=2)


def to_json(p: TaylorPoly) -> str:
    payload = {
        "order": p.spec.order,
        "nvars": p.spec.nvars,
        "terms": [{"exp": list(e), "coef": c} for e, c in p.terms()],
    }
    return json.dumps(payload)


def from_json(text: str) -> TaylorPoly:
    payload = json.loads(text)
    spec = AlgebraSpec(order=payload["order"], nvars=payload["nvars"])
    tables = _tables(spec.order, spec.nvars)
    coeffs = np.zeros(spec.size)
    for term in payload["terms"]:
        key = tuple(term["exp"])
        if key not in tables.index:
            raise DomainError(f"exponent {list(key)} does not belong to {spec}")
        coeffs[tables.index[key]] = term["coef"]
    return TaylorPoly(spec, coeffs, clean=False)


# helpers over floats or polynomials

def is_poly(x) -> bool:
    return isinstance(x, TaylorPoly)


def cst(x: PolyOrReal) -> float:
    """constant part of a polynomial, or the value itself"""
    return x.cst if isinstance(x, TaylorPoly) else float(x)


def constants(values: Iterable[PolyOrReal]) -> np.ndarray:
    return np.array([cst(v) for v in values], dtype=float)


def as_array(values: Iterable[PolyOrReal]) -> np.ndarray:
    """float array for plain numbers, object array as soon as one polynomial is present"""
    values = list(values)
    if any(isinstance(v, TaylorPoly) for v in values):
        array = np.empty(len(values), dtype=object)
        array[:] = values
        return array
    return np.array(values, dtype=float)


def spec_of(values: Iterable[PolyOrReal]) -> AlgebraSpec | None:
    for v in values:
        if isinstance(v, TaylorPoly):
            return v.spec
    return None


def sqrt(x: PolyOrReal) -> PolyOrReal:
    return x.sqrt() if isinstance(x, TaylorPoly) else math.sqrt(x)


def exp(x: PolyOrReal) -> PolyOrReal:
    return x.exp() if isinstance(x, TaylorPoly) else math.exp(x)


def log(x: PolyOrReal) -> PolyOrReal:
    return x.log() if isinstance(x, TaylorPoly) else math.log(x)


def sin(x: PolyOrReal) -> PolyOrReal:
    return x.sin() if isinstance(x, TaylorPoly) else math.sin(x)


def cos(x: PolyOrReal) -> PolyOrReal:
    return x.cos() if isinstance(x, TaylorPoly) else math.cos(x)


def tan(x: PolyOrReal) -> PolyOrReal:
    return x.tan() if isinstance(x, TaylorPoly) else math.tan(x)


def sinh(x: PolyOrReal) -> PolyOrReal:
    return x.sinh() if isinstance(x, TaylorPoly) else math.sinh(x)


def cosh(x: PolyOrReal) -> PolyOrReal:
    return x.cosh() if isinstance(x, TaylorPoly) else math.cosh(x)


def atan(x: PolyOrReal) -> PolyOrReal:
    return x.atan() if isinstance(x, TaylorPoly) else math.atan(x)


def asin(x: PolyOrReal) -> PolyOrReal:
    return x.asin() if isinstance(x, TaylorPoly) else math.asin(x)


def acos(x: PolyOrReal) -> PolyOrReal:
    return x.acos() if isinstance(x, TaylorPoly) else math.acos(x)


def atan2(y: PolyOrReal, x: PolyOrReal) -> PolyOrReal:
    """
    four-quadrant arctangent, the quadrant is decided on constant parts and the
    variation is expanded through atan around that angle
    """
    if not isinstance(y, TaylorPoly) and not isinstance(x, TaylorPoly):
        return math.atan2(y, x)
    spec = y.spec if isinstance(y, TaylorPoly) else x.spec
    if not isinstance(y, TaylorPoly):
        y = TaylorPoly.constant(spec, float(y))
    if not isinstance(x, TaylorPoly):
        x = TaylorPoly.constant(spec, float(x))
    y0, x0 = y.cst, x.cst
    if y0 == 0.0 and x0 == 0.0:
        raise DomainError("atan2 with both constant parts equal to zero")
    theta0 = math.atan2(y0, x0)
    numerator = y * x0 - x * y0
    denominator = x * x0 + y * y0
    return (numerator * denominator.reciprocal()).atan() + theta0


def wrap_angle(x: PolyOrReal) -> PolyOrReal:
    """shifts by a multiple of 2 pi so the constant part lies in (-pi, pi]"""
    turns = math.ceil((cst(x) - math.pi) / (2.0 * math.pi))
    return x - 2.0 * math.pi * turns if turns else x


__all__ = [
    "AlgebraSpec",
    "RangeBound",
    "TaylorPoly",
    "PolyOrReal",
    "make_variable",
    "arith",
    "elementary",
    "compose",
    "partial",
    "evaluate",
    "bound",
    "embed",
    "monomial_basis",
    "to_json",
    "from_json",
    "is_poly",
    "cst",
    "constants",
    "as_array",
    "spec_of",
    "sqrt",
    "exp",
    "log",
    "sin",
    "cos",
    "tan",
    "sinh",
    "cosh",
    "atan",
    "asin",
    "acos",
    "atan2",
    "wrap_angle",
]
