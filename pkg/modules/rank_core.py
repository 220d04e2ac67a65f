"""
Rank statistics over cost-function values

rank_k is the k-th LARGEST value of a list; equal values occupy consecutive
ranks, so rank_k and rank_{k+1} may coincide. Function indices are 1-based
everywhere they are reported.

The three aggregate objectives:
    h_f(x) = rank_{f+1} over all n values        (what a solver may use)
    g_0(x) = rank_1     over the honest values    (oracle only)
    g_f(x) = rank_{f+1} over the honest values    (oracle only)
They satisfy g_f(x) <= h_f(x) <= g_0(x) at every x.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np

from modules.errors import ContractViolation, EvaluationError

if TYPE_CHECKING:
    from modules.functions import CostFunctionSpec

logger = logging.getLogger(__name__)

# Relative slack used when testing whether a point lies in a hypercube.
CONTAINMENT_RTOL = 1e-12


@dataclass(frozen=True)
class Hypercube:
    """Axis-aligned box X = [lower, upper] in R^d"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) == 0 or len(lower) != len(upper):
            raise ContractViolation("hypercube bounds must be non-empty and of equal length")
        for t, (lo, hi) in enumerate(zip(lower, upper)):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ContractViolation(f"hypercube axis {t} has non-finite bounds")
            if not lo < hi:
                raise ContractViolation(f"hypercube axis {t}: lower {lo} must be < upper {hi}")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return (self.lower_array + self.upper_array) / 2.0

    @property
    def diameter(self) -> float:
        """Euclidean length of the main diagonal"""
        return float(np.linalg.norm(self.upper_array - self.lower_array))

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper_array - self.lower_array))

    def corners(self) -> np.ndarray:
        """All 2^d corners, shape (2^d, d)"""
        axes = [(lo, hi) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)

    def _slack(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.lower_array), np.abs(self.upper_array))
        return CONTAINMENT_RTOL * np.maximum(scale, 1.0)

    def contains(self, x) -> bool:
        point = np.asarray(x, dtype=float).reshape(-1)
        if point.shape[0] != self.dimension:
            return False
        slack = self._slack()
        return bool(np.all(point >= self.lower_array - slack) and np.all(point <= self.upper_array + slack))

    def on_boundary(self, x) -> bool:
        point = np.asarray(x, dtype=float).reshape(-1)
        slack = self._slack()
        return bool(np.any(np.abs(point - self.lower_array) <= slack)
                    or np.any(np.abs(point - self.upper_array) <= slack))

    def to_dict(self) -> Dict:
        return {'lower': list(self.lower), 'upper': list(self.upper)}

    @classmethod
    def from_dict(cls, data: Dict) -> "Hypercube":
        return cls(lower=tuple(data['lower']), upper=tuple(data['upper']))


@dataclass(frozen=True)
class Ensemble:
    """The n cost functions and the fault budget f; carries no fault identities"""
    specs: Tuple["CostFunctionSpec", ...]
    f: int
    domain: Hypercube
    nonnegative: bool = False

    def __post_init__(self):
        specs = tuple(self.specs)
        object.__setattr__(self, 'specs', specs)
        if isinstance(self.f, bool) or int(self.f) != self.f or self.f < 0:
            raise ContractViolation(f"fault budget f must be a non-negative integer, got {self.f!r}")
        object.__setattr__(self, 'f', int(self.f))
        n = len(specs)
        if n < 2 * self.f + 1:
            raise ContractViolation(f"need n >= 2f+1, got n={n}, f={self.f}")
        for i, spec in enumerate(specs, start=1):
            try:
                spec.check_domain(self.domain)
            except ContractViolation as e:
                raise ContractViolation(f"function {i}: {e}") from e

    @property
    def n(self) -> int:
        return len(self.specs)

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(range(1, self.n + 1))


@dataclass(frozen=True)
class GroundTruth:
    """Which of the n functions are faulty; for oracles and the verifier only"""
    n: int
    faulty_set: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        faulty = frozenset(int(i) for i in self.faulty_set)
        object.__setattr__(self, 'faulty_set', faulty)
        bad = sorted(i for i in faulty if not 1 <= i <= self.n)
        if bad:
            raise ContractViolation(f"faulty indices {bad} outside 1..{self.n}")

    @property
    def honest_set(self) -> FrozenSet[int]:
        return frozenset(range(1, self.n + 1)) - self.faulty_set

    @property
    def honest_indices(self) -> Tuple[int, ...]:
        return tuple(sorted(self.honest_set))

    def validate_for(self, ensemble: Ensemble) -> None:
        """Reject a labeling that does not fit the ensemble's n and f"""
        if self.n != ensemble.n:
            raise ContractViolation(f"ground truth covers {self.n} functions, ensemble has {ensemble.n}")
        if len(self.faulty_set) > ensemble.f:
            raise ContractViolation(
                f"{len(self.faulty_set)} faulty functions exceed the fault budget f={ensemble.f}"
            )


@dataclass(frozen=True)
class ValueProfile:
    """The n function values at one point"""
    point: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        for i, v in enumerate(self.values, start=1):
            if not math.isfinite(v):
                raise EvaluationError(i, f"non-finite value {v} at {self.point}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _finite_values(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise EvaluationError(int(bad[0]) + 1, f"non-finite value {arr[bad[0]]}")
    return arr


def _check_rank(k: int, length: int) -> int:
    if isinstance(k, bool) or int(k) != k:
        raise ContractViolation(f"rank must be an integer, got {k!r}")
    k = int(k)
    if not 1 <= k <= length:
        raise ContractViolation(f"rank {k} outside 1..{length}")
    return k


def rank_k(values: Sequence[float], k: int) -> float:
    """k-th largest of values"""
    arr = _finite_values(values)
    k = _check_rank(k, arr.size)
    return float(np.sort(arr)[arr.size - k])


def rank_k_index(values: Sequence[float], k: int) -> int:
    """1-based index holding rank k; at equal value the smaller index ranks first"""
    arr = _finite_values(values)
    k = _check_rank(k, arr.size)
    # lexsort sorts by the last key first: descending value, then ascending index
    order = np.lexsort((np.arange(arr.size), -arr))
    return int(order[k - 1]) + 1


def rank_rows(matrix: np.ndarray, k: int) -> np.ndarray:
    """rank_k of every row of an (m, n) value matrix"""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ContractViolation("value matrix must be two-dimensional")
    width = matrix.shape[1]
    k = _check_rank(k, width)
    return np.sort(matrix, axis=1)[:, width - k]


def columns_for(n: int, indices: Optional[Iterable[int]] = None) -> np.ndarray:
    """Sorted 0-based column positions for 1-based function indices"""
    if indices is None:
        return np.arange(n)
    chosen = sorted(set(int(i) for i in indices))
    if not chosen:
        raise ContractViolation("index subset must not be empty")
    if chosen[0] < 1 or chosen[-1] > n:
        raise ContractViolation(f"index subset {chosen} outside 1..{n}")
    return np.asarray(chosen, dtype=int) - 1


def value_matrix(ensemble: Ensemble, points: np.ndarray,
                 indices: Optional[Iterable[int]] = None) -> np.ndarray:
    """Values Q_i at each point, shape (m, |indices|); columns in ascending index order"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    columns = columns_for(ensemble.n, indices)
    matrix = np.empty((points.shape[0], columns.size), dtype=float)
    for out, col in enumerate(columns):
        column = np.asarray(ensemble.specs[col].values(points), dtype=float)
        bad = np.flatnonzero(~np.isfinite(column))
        if bad.size:
            raise EvaluationError(int(col) + 1, f"non-finite value at {points[bad[0]].tolist()}")
        matrix[:, out] = column
    return matrix


def _point_in(ensemble: Ensemble, x) -> np.ndarray:
    point = np.asarray(x, dtype=float).reshape(-1)
    if not ensemble.domain.contains(point):
        raise ContractViolation(f"point {point.tolist()} is outside the domain")
    return point


def profile(ensemble: Ensemble, x) -> ValueProfile:
    point = _point_in(ensemble, x)
    row = value_matrix(ensemble, point[None, :])[0]
    return ValueProfile(point=tuple(point.tolist()), values=tuple(row.tolist()))


def eval_hf(ensemble: Ensemble, x) -> float:
    """h_f(x): rank_{f+1} over all n values"""
    return rank_k(profile(ensemble, x).values, ensemble.f + 1)


def _honest_values(ensemble: Ensemble, truth: GroundTruth, x) -> np.ndarray:
    truth.validate_for(ensemble)
    return profile(ensemble, x).as_array()[columns_for(ensemble.n, truth.honest_set)]


def eval_g0(ensemble: Ensemble, truth: GroundTruth, x) -> float:
    """g_0(x): largest honest value"""
    return rank_k(_honest_values(ensemble, truth, x), 1)


def eval_gf(ensemble: Ensemble, truth: GroundTruth, x) -> float:
    """g_f(x): rank_{f+1} over honest values"""
    honest = _honest_values(ensemble, truth, x)
    if honest.size < ensemble.f + 1:
        raise ContractViolation(f"|H|={honest.size} is smaller than f+1={ensemble.f + 1}")
    return rank_k(honest, ensemble.f + 1)
