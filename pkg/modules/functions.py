"""
Cost-function families with Lipschitz bounds on a hypercube, and the
adversary constructions built from honest functions.

Every family evaluates a batch of points: values(points) maps an (m, d)
array to an (m,) array. Distances are Euclidean throughout, so Lipschitz
constants here match the cell diameters used by the approximate solver.
"""
import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, ClassVar, Dict, Optional, Sequence, Tuple

import numpy as np

from modules.errors import ContractViolation, EvaluationError
from modules.rank_core import Hypercube

logger = logging.getLogger(__name__)


def _as_points(points) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=float))


def _as_vector(values, name: str) -> Tuple[float, ...]:
    vector = tuple(float(v) for v in np.atleast_1d(values))
    if not vector or not all(math.isfinite(v) for v in vector):
        raise ContractViolation(f"{name} must be a non-empty vector of finite reals")
    return vector


def _require_dimension(expected: int, domain: Hypercube, what: str) -> None:
    if expected != domain.dimension:
        raise ContractViolation(f"{what} has dimension {expected}, domain has {domain.dimension}")


class CostFunctionSpec(ABC):
    """Declarative description of one cost function Q_i"""
    kind: ClassVar[str] = ""

    @abstractmethod
    def values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at each row of an (m, d) array"""

    @abstractmethod
    def lipschitz_bound(self, domain: Hypercube) -> float:
        """A valid Lipschitz constant on domain; +inf when none is known"""

    @abstractmethod
    def check_domain(self, domain: Hypercube) -> None:
        """Reject a domain the spec cannot be evaluated on"""

    @abstractmethod
    def to_dict(self) -> Dict:
        """Mapping form used in scenario files"""


@dataclass(frozen=True)
class Cone(CostFunctionSpec):
    """Q(x) = slope * ||x - center|| + offset"""
    center: Tuple[float, ...]
    slope: float = 1.0
    offset: float = 0.0
    kind: ClassVar[str] = "cone"

    def __post_init__(self):
        object.__setattr__(self, 'center', _as_vector(self.center, "cone center"))
        if not self.slope > 0:
            raise ContractViolation(f"cone slope must be > 0, got {self.slope}")
        if not self.offset >= 0:
            raise ContractViolation(f"cone offset must be >= 0, got {self.offset}")

    def values(self, points):
        pts = _as_points(points)
        return self.slope * np.linalg.norm(pts - np.asarray(self.center), axis=1) + self.offset

    def lipschitz_bound(self, domain):
        return float(self.slope)

    def check_domain(self, domain):
        _require_dimension(len(self.center), domain, "cone center")

    def to_dict(self):
        return {'kind': self.kind, 'center': list(self.center),
                'slope': float(self.slope), 'offset': float(self.offset)}

    @classmethod
    def from_dict(cls, data: Dict) -> "Cone":
        return cls(center=tuple(data['center']), slope=float(data.get('slope', 1.0)),
                   offset=float(data.get('offset', 0.0)))


@dataclass(frozen=True)
class Quadratic(CostFunctionSpec):
    """Q(x) = scale * ||x - center||^2 + offset"""
    center: Tuple[float, ...]
    scale: float = 1.0
    offset: float = 0.0
    kind: ClassVar[str] = "quadratic"

    def __post_init__(self):
        object.__setattr__(self, 'center', _as_vector(self.center, "quadratic center"))
        if not self.scale > 0:
            raise ContractViolation(f"quadratic scale must be > 0, got {self.scale}")
        if not self.offset >= 0:
            raise ContractViolation(f"quadratic offset must be >= 0, got {self.offset}")

    def values(self, points):
        pts = _as_points(points)
        diff = pts - np.asarray(self.center)
        return self.scale * np.einsum('ij,ij->i', diff, diff) + self.offset

    def lipschitz_bound(self, domain):
        # The gradient norm 2a||x - c|| peaks at the corner farthest from c
        center = np.asarray(self.center)
        reach = np.maximum(np.abs(domain.lower_array - center), np.abs(domain.upper_array - center))
        return float(2.0 * self.scale * np.linalg.norm(reach))

    def check_domain(self, domain):
        _require_dimension(len(self.center), domain, "quadratic center")

    def to_dict(self):
        return {'kind': self.kind, 'center': list(self.center),
                'scale': float(self.scale), 'offset': float(self.offset)}

    @classmethod
    def from_dict(cls, data: Dict) -> "Quadratic":
        return cls(center=tuple(data['center']), scale=float(data.get('scale', 1.0)),
                   offset=float(data.get('offset', 0.0)))


@dataclass(frozen=True)
class PiecewiseLinear1D(CostFunctionSpec):
    """Linear interpolation through (x, value) breakpoints, constant beyond the ends"""
    breakpoints: Tuple[Tuple[float, float], ...]
    kind: ClassVar[str] = "piecewise_linear"

    def __post_init__(self):
        pairs = tuple((float(x), float(y)) for x, y in self.breakpoints)
        if len(pairs) < 2:
            raise ContractViolation("piecewise-linear function needs at least two breakpoints")
        if not all(math.isfinite(x) and math.isfinite(y) for x, y in pairs):
            raise ContractViolation("piecewise-linear breakpoints must be finite")
        xs = [x for x, _ in pairs]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ContractViolation("piecewise-linear breakpoints must be strictly increasing in x")
        object.__setattr__(self, 'breakpoints', pairs)

    def values(self, points):
        pts = _as_points(points)
        xs, ys = zip(*self.breakpoints)
        return np.interp(pts[:, 0], xs, ys)

    def lipschitz_bound(self, domain):
        xs, ys = (np.asarray(v) for v in zip(*self.breakpoints))
        return float(np.max(np.abs(np.diff(ys) / np.diff(xs))))

    def check_domain(self, domain):
        _require_dimension(1, domain, "piecewise-linear function")

    def to_dict(self):
        return {'kind': self.kind, 'breakpoints': [[x, y] for x, y in self.breakpoints]}

    @classmethod
    def from_dict(cls, data: Dict) -> "PiecewiseLinear1D":
        return cls(breakpoints=tuple(tuple(pair) for pair in data['breakpoints']))


def _check_base(base, what: str) -> Tuple[CostFunctionSpec, ...]:
    base = tuple(base)
    if not base:
        raise ContractViolation(f"{what} needs a non-empty base")
    return base


@dataclass(frozen=True)
class EnvelopePlus(CostFunctionSpec):
    """Q(x) = max over base at x, plus delta"""
    base: Tuple[CostFunctionSpec, ...]
    delta: float = 0.0
    kind: ClassVar[str] = "envelope_plus"

    def __post_init__(self):
        object.__setattr__(self, 'base', _check_base(self.base, "upper envelope"))
        if not math.isfinite(self.delta):
            raise ContractViolation("envelope delta must be finite")

    def values(self, points):
        pts = _as_points(points)
        return np.max(np.stack([spec.values(pts) for spec in self.base]), axis=0) + self.delta

    def lipschitz_bound(self, domain):
        return max(spec.lipschitz_bound(domain) for spec in self.base)

    def check_domain(self, domain):
        for spec in self.base:
            spec.check_domain(domain)

    def to_dict(self):
        return {'kind': self.kind, 'delta': float(self.delta),
                'base': [spec.to_dict() for spec in self.base]}

    @classmethod
    def from_dict(cls, data: Dict) -> "EnvelopePlus":
        return cls(base=tuple(spec_from_dict(b) for b in data['base']),
                   delta=float(data.get('delta', 0.0)))


@dataclass(frozen=True)
class EnvelopeMinus(CostFunctionSpec):
    """Q(x) = min over base at x, minus delta; optionally floored at 0"""
    base: Tuple[CostFunctionSpec, ...]
    delta: float = 0.0
    floor_at_zero: bool = False
    kind: ClassVar[str] = "envelope_minus"

    def __post_init__(self):
        object.__setattr__(self, 'base', _check_base(self.base, "lower envelope"))
        if not math.isfinite(self.delta):
            raise ContractViolation("envelope delta must be finite")

    def values(self, points):
        pts = _as_points(points)
        out = np.min(np.stack([spec.values(pts) for spec in self.base]), axis=0) - self.delta
        if self.floor_at_zero:
            out = np.maximum(out, 0.0)
        return out

    def lipschitz_bound(self, domain):
        return max(spec.lipschitz_bound(domain) for spec in self.base)

    def check_domain(self, domain):
        for spec in self.base:
            spec.check_domain(domain)

    def to_dict(self):
        return {'kind': self.kind, 'delta': float(self.delta), 'floor_at_zero': bool(self.floor_at_zero),
                'base': [spec.to_dict() for spec in self.base]}

    @classmethod
    def from_dict(cls, data: Dict) -> "EnvelopeMinus":
        return cls(base=tuple(spec_from_dict(b) for b in data['base']),
                   delta=float(data.get('delta', 0.0)),
                   floor_at_zero=bool(data.get('floor_at_zero', False)))


@dataclass(frozen=True)
class BlackBox(CostFunctionSpec):
    """An arbitrary in-process function; certified only if a Lipschitz constant is declared"""
    func: Callable
    dimension: int
    lipschitz: Optional[float] = None
    label: str = "black_box"
    vectorized: bool = False
    kind: ClassVar[str] = "black_box"

    def values(self, points):
        pts = _as_points(points)
        if self.vectorized:
            return np.asarray(self.func(pts), dtype=float).reshape(-1)
        return np.fromiter((self.func(p) for p in pts), dtype=float, count=pts.shape[0])

    def lipschitz_bound(self, domain):
        return math.inf if self.lipschitz is None else float(self.lipschitz)

    def check_domain(self, domain):
        _require_dimension(self.dimension, domain, f"black box {self.label!r}")

    def to_dict(self):
        raise ContractViolation(f"black box {self.label!r} cannot be written to a scenario file")


_FAMILIES = {cls.kind: cls for cls in (Cone, Quadratic, PiecewiseLinear1D, EnvelopePlus, EnvelopeMinus)}


def spec_to_dict(spec: CostFunctionSpec) -> Dict:
    return spec.to_dict()


def spec_from_dict(data: Dict) -> CostFunctionSpec:
    """Build a spec from its mapping form; unknown kinds are rejected"""
    if not isinstance(data, dict) or 'kind' not in data:
        raise ContractViolation(f"function spec must be a mapping with a 'kind', got {data!r}")
    family = _FAMILIES.get(data['kind'])
    if family is None:
        raise ContractViolation(f"unknown function kind {data['kind']!r}; expected one of {sorted(_FAMILIES)}")
    try:
        return family.from_dict(data)
    except (KeyError, TypeError) as e:
        raise ContractViolation(f"malformed {data['kind']} spec: {e}") from e


def evaluate_batch(spec: CostFunctionSpec, points) -> np.ndarray:
    values = np.asarray(spec.values(_as_points(points)), dtype=float)
    if not np.all(np.isfinite(values)):
        raise EvaluationError(None, f"{spec.kind} produced a non-finite value")
    return values


def evaluate(spec: CostFunctionSpec, x) -> float:
    """Q(x) at a single point"""
    return float(evaluate_batch(spec, np.asarray(x, dtype=float).reshape(1, -1))[0])


def lipschitz_bound(spec: CostFunctionSpec, domain: Hypercube) -> float:
    return spec.lipschitz_bound(domain)


def max_lipschitz(specs: Sequence[CostFunctionSpec], domain: Hypercube) -> float:
    return max(spec.lipschitz_bound(domain) for spec in specs)


def sample_points(domain: Hypercube, per_axis: Optional[int] = None) -> np.ndarray:
    """Tensor grid over domain including its corners"""
    if per_axis is None:
        per_axis = {1: 1001, 2: 101}.get(domain.dimension, 11)
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=1)


def certify_nonnegative(specs: Sequence[CostFunctionSpec], domain: Hypercube,
                        per_axis: Optional[int] = None) -> Tuple[bool, float]:
    """Sampled check that every spec is >= 0 on domain; returns (ok, smallest value seen)"""
    points = sample_points(domain, per_axis)
    lowest = min(float(np.min(evaluate_batch(spec, points))) for spec in specs)
    return lowest >= 0.0, lowest


def make_above_all_adversary(honest: Sequence[CostFunctionSpec], margin: float) -> EnvelopePlus:
    """A faulty function strictly above every honest function everywhere"""
    if not honest:
        raise ContractViolation("above-all adversary needs at least one honest function")
    if not margin > 0:
        raise ContractViolation(f"margin must be > 0, got {margin}")
    return EnvelopePlus(base=tuple(honest), delta=float(margin))


def make_below_all_adversary(honest: Sequence[CostFunctionSpec], margin: float,
                             domain: Optional[Hypercube] = None,
                             nonnegative: bool = False,
                             per_axis: Optional[int] = None) -> EnvelopeMinus:
    """A faulty function strictly below every honest function everywhere

    With nonnegative set the result is floored at 0, which is admitted only
    when the honest lower envelope stays >= margin on the sampled domain.
    """
    if not honest:
        raise ContractViolation("below-all adversary needs at least one honest function")
    if not margin > 0:
        raise ContractViolation(f"margin must be > 0, got {margin}")
    adversary = EnvelopeMinus(base=tuple(honest), delta=float(margin), floor_at_zero=nonnegative)
    if nonnegative:
        if domain is None:
            raise ContractViolation("a non-negative below-all adversary needs the domain to certify against")
        envelope = EnvelopeMinus(base=tuple(honest), delta=0.0)
        lowest = float(np.min(evaluate_batch(envelope, sample_points(domain, per_axis))))
        if lowest < margin:
            raise ContractViolation(
                f"honest minimum {lowest:.6g} on the domain is below the margin {margin}; "
                "a floored adversary would not stay strictly below"
            )
    return adversary


def make_gap_adversary(honest_tail: Sequence[CostFunctionSpec], V: float, margin: float) -> EnvelopePlus:
    """A faulty function exceeding the tail's upper envelope by V + margin everywhere"""
    if not honest_tail:
        raise ContractViolation("gap adversary needs a non-empty honest tail")
    if not V > 0:
        raise ContractViolation(f"gap V must be > 0, got {V}")
    if not margin > 0:
        raise ContractViolation(f"margin must be > 0, got {margin}")
    return EnvelopePlus(base=tuple(honest_tail), delta=float(V) + float(margin))


def describe(spec: CostFunctionSpec) -> str:
    """Short human-readable label used in reports"""
    if isinstance(spec, Cone):
        return f"cone(c={list(spec.center)}, a={spec.slope:g}, b={spec.offset:g})"
    if isinstance(spec, Quadratic):
        return f"quadratic(c={list(spec.center)}, a={spec.scale:g}, b={spec.offset:g})"
    if isinstance(spec, PiecewiseLinear1D):
        return f"piecewise({len(spec.breakpoints)} breakpoints)"
    if isinstance(spec, EnvelopePlus):
        return f"max[{len(spec.base)}]+{spec.delta:g}"
    if isinstance(spec, EnvelopeMinus):
        floor = ", floor 0" if spec.floor_at_zero else ""
        return f"min[{len(spec.base)}]-{spec.delta:g}{floor}"
    return getattr(spec, 'label', spec.kind)
