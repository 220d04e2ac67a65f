"""
Global minimization of rank statistics over a dense grid

The exact algorithm outputs a minimizer of h_f = rank_{f+1} over all n
functions. On a compact hypercube this is realized as a scan of a tensor grid
in C order; the first node holding the minimum value wins, which is the
lexicographically smallest multi-index. When every function involved has a
finite Lipschitz bound L on X, the rank statistic is L-Lipschitz as well, so
the grid minimum is within L * (half cell diagonal) of the true minimum.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from modules.config import Settings, get_settings
from modules.errors import BudgetExceededError, ContractViolation
from modules.rank_core import Ensemble, Hypercube, columns_for, rank_rows, value_matrix

logger = logging.getLogger(__name__)

Resolution = Union[int, Sequence[int], None]


@dataclass(frozen=True)
class Grid:
    """Tensor grid with counts[t] evenly spaced nodes on axis t, endpoints included"""
    domain: Hypercube
    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(m) for m in self.counts)
        if len(counts) != self.domain.dimension:
            raise ContractViolation(f"grid needs {self.domain.dimension} axis counts, got {len(counts)}")
        if any(m < 2 for m in counts):
            raise ContractViolation(f"every axis needs at least 2 grid points, got {counts}")
        object.__setattr__(self, 'counts', counts)

    @classmethod
    def from_resolution(cls, domain: Hypercube, resolution: Resolution = None,
                        settings: Optional[Settings] = None) -> "Grid":
        if resolution is None:
            resolution = (settings or get_settings()).default_resolution(domain.dimension)
        if np.isscalar(resolution):
            counts = (int(resolution),) * domain.dimension
        else:
            counts = tuple(int(m) for m in resolution)
        return cls(domain=domain, counts=counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts, dtype=np.int64))

    @property
    def steps(self) -> Tuple[float, ...]:
        spans = self.domain.upper_array - self.domain.lower_array
        return tuple(float(s / (m - 1)) for s, m in zip(spans, self.counts))

    @property
    def half_cell_diameter(self) -> float:
        return 0.5 * float(np.linalg.norm(self.steps))

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, m) for lo, hi, m in zip(self.domain.lower, self.domain.upper, self.counts)]

    def points(self, start: int, stop: int) -> np.ndarray:
        """Nodes with flat indices in [start, stop), shape (stop - start, d)"""
        multi = np.unravel_index(np.arange(start, stop), self.counts)
        return np.stack([axis[idx] for axis, idx in zip(self.axes(), multi)], axis=1)

    def multi_index(self, flat: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.counts))

    def chunks(self, chunk_size: int) -> List[Tuple[int, int]]:
        return [(start, min(start + chunk_size, self.size)) for start in range(0, self.size, chunk_size)]


@dataclass(frozen=True)
class GridCertificate:
    """Additive error bound of a grid minimum; None when no Lipschitz bound is known"""
    grid_step: Tuple[float, ...]
    error_bound: Optional[float]

    @property
    def certified(self) -> bool:
        return self.error_bound is not None

    def to_dict(self) -> dict:
        return {'grid_step': list(self.grid_step),
                'error_bound': self.error_bound if self.certified else "uncertified"}


@dataclass(frozen=True)
class SolveResult:
    """Grid minimizer x_hat of a rank statistic and its value v_hat"""
    x_hat: Tuple[float, ...]
    v_hat: float
    certificate: GridCertificate
    evaluations: int
    grid_index: Tuple[int, ...]
    rank: int
    subset: Tuple[int, ...]
    on_boundary: bool = False

    def to_dict(self) -> dict:
        return {
            'x_hat': list(self.x_hat),
            'v_hat': self.v_hat,
            'rank': self.rank,
            'subset': list(self.subset),
            'grid_index': list(self.grid_index),
            'evaluations': self.evaluations,
            'on_boundary': self.on_boundary,
            'certificate': self.certificate.to_dict(),
        }


def iter_grid_values(ensemble: Ensemble, grid: Grid, chunk_size: Optional[int] = None,
                     indices: Optional[Iterable[int]] = None) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    """Yield (first flat index, points, value matrix) chunk by chunk in grid order"""
    chunk_size = chunk_size or get_settings().chunk_size
    for start, stop in grid.chunks(chunk_size):
        points = grid.points(start, stop)
        yield start, points, value_matrix(ensemble, points, indices)


class GridSolver:
    """Certified dense-grid minimizer of rank_r over a subset of the n functions"""

    def __init__(self, resolution: Resolution = None, budget: Optional[int] = None,
                 workers: Optional[int] = None, chunk_size: Optional[int] = None,
                 settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.resolution = resolution
        self.budget = budget if budget is not None else self.settings.grid_budget
        self.workers = max(1, workers if workers is not None else self.settings.workers)
        self.chunk_size = chunk_size or self.settings.chunk_size

    def grid_for(self, domain: Hypercube) -> Grid:
        """The grid this solver uses on domain; rejects grids beyond the budget"""
        grid = Grid.from_resolution(domain, self.resolution, self.settings)
        if grid.size > self.budget:
            raise BudgetExceededError(required=grid.size, budget=self.budget)
        return grid

    def _chunk_minimum(self, ensemble: Ensemble, grid: Grid, indices: Tuple[int, ...],
                       r: int, bounds: Tuple[int, int]) -> Tuple[int, float]:
        start, stop = bounds
        stats = rank_rows(value_matrix(ensemble, grid.points(start, stop), indices), r)
        local = int(np.argmin(stats))
        return start + local, float(stats[local])

    def _scan(self, ensemble: Ensemble, grid: Grid, indices: Tuple[int, ...], r: int) -> Tuple[int, float]:
        chunks = grid.chunks(self.chunk_size)

        def task(bounds):
            return self._chunk_minimum(ensemble, grid, indices, r, bounds)

        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                minima = list(executor.map(task, chunks))
        else:
            minima = [task(bounds) for bounds in chunks]

        # Strict comparison in chunk order keeps the earliest node on ties
        best_index, best_value = minima[0]
        for index, value in minima[1:]:
            if value < best_value:
                best_index, best_value = index, value
        return best_index, best_value

    def minimize_rank_r(self, ensemble: Ensemble, subset: Optional[Iterable[int]], r: int) -> SolveResult:
        """Grid argmin of rank_r over the 1-based index subset (all n when None)"""
        columns = columns_for(ensemble.n, subset)
        indices = tuple(int(c) + 1 for c in columns)
        if isinstance(r, bool) or int(r) != r or not 1 <= r <= len(indices):
            raise ContractViolation(f"rank r={r} outside 1..{len(indices)}")
        r = int(r)
        grid = self.grid_for(ensemble.domain)

        flat, value = self._scan(ensemble, grid, indices, r)
        x_hat = grid.points(flat, flat + 1)[0]

        lipschitz = max(ensemble.specs[i - 1].lipschitz_bound(ensemble.domain) for i in indices)
        bound = float(lipschitz * grid.half_cell_diameter) if np.isfinite(lipschitz) else None
        on_boundary = ensemble.domain.on_boundary(x_hat)
        if on_boundary:
            logger.warning(f"Grid minimizer {x_hat.tolist()} touches the domain boundary; "
                           "the unconstrained minimizer may lie outside X")

        result = SolveResult(
            x_hat=tuple(x_hat.tolist()),
            v_hat=value,
            certificate=GridCertificate(grid_step=grid.steps, error_bound=bound),
            evaluations=grid.size,
            grid_index=grid.multi_index(flat),
            rank=r,
            subset=indices,
            on_boundary=on_boundary,
        )
        logger.info(f"rank_{r} over {len(indices)} functions: v={value:.6g} at {result.x_hat} "
                    f"({grid.size} nodes, error bound {bound if bound is not None else 'uncertified'})")
        return result

    def minimize_hf(self, ensemble: Ensemble) -> SolveResult:
        """Grid argmin of h_f = rank_{f+1} over all n functions"""
        return self.minimize_rank_r(ensemble, None, ensemble.f + 1)


def minimize_hf(ensemble: Ensemble, resolution: Resolution = None, **options) -> SolveResult:
    return GridSolver(resolution=resolution, **options).minimize_hf(ensemble)


def minimize_rank_r(ensemble: Ensemble, subset: Optional[Iterable[int]], r: int,
                    resolution: Resolution = None, **options) -> SolveResult:
    return GridSolver(resolution=resolution, **options).minimize_rank_r(ensemble, subset, r)
