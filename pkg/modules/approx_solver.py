"""
Approximate minimization of h_f by hypercube partitioning

X is split into cells S_j with centers C_j and diameters d_j until every cell
satisfies

    h_f(C_j) - L * d_j >= (1 - epsilon) * min_i h_f(C_i)

and the best center C_k is returned. With L a Lipschitz constant of the
honest functions this gives g_f(C_k) <= min_X g_0 / (1 - epsilon).

Note that L is applied to h_f values although only g_0 is known to be
L-Lipschitz. The guarantee still follows because h_f(C_j) <= g_0(C_j) and g_0
varies by at most L * d_j over S_j; h_f itself need not be Lipschitz.

The criterion cannot be met by shrinking cells when min_i h_f(C_i) reaches 0,
so a cell also passes once L * d_j <= tau_abs. A run that needed this floor
reports terminated_by = "floor" and the additive slack tau_abs / (1 - epsilon).

Refinement is breadth-first: every violating cell is bisected along its
longest edge (lowest axis on ties) each round, in partition order; children
take fresh ids in that same order.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from modules.config import Settings, get_settings
from modules.errors import ContractViolation
from modules.rank_core import Ensemble, rank_rows, value_matrix

logger = logging.getLogger(__name__)

TERMINATED_BY_CRITERION = "criterion"
TERMINATED_BY_FLOOR = "floor"
TERMINATED_BY_BUDGET = "budget"


@dataclass(frozen=True)
class Cell:
    """Sub-hypercube [lower, upper] of X with cached h_f at its center"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    id: Optional[int] = None
    h_value: Optional[float] = None

    @property
    def center(self) -> Tuple[float, ...]:
        return tuple(((np.asarray(self.lower) + np.asarray(self.upper)) / 2.0).tolist())

    @property
    def edges(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.edges))

    @property
    def volume(self) -> float:
        return float(np.prod(self.edges))

    def to_dict(self) -> dict:
        return {'id': self.id, 'lower': list(self.lower), 'upper': list(self.upper),
                'center': list(self.center), 'diameter': self.diameter, 'h_value': self.h_value}


@dataclass(frozen=True)
class ApproxConfig:
    """epsilon in (0, 1), Lipschitz constant L > 0, cell budget and optional floor"""
    epsilon: float
    lipschitz: float
    max_cells: Optional[int] = None
    tau_abs: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ContractViolation(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.lipschitz > 0:
            raise ContractViolation(f"Lipschitz constant must be > 0, got {self.lipschitz}")
        if self.max_cells is not None and self.max_cells < 1:
            raise ContractViolation(f"max_cells must be >= 1, got {self.max_cells}")
        if self.tau_abs is not None and self.tau_abs < 0:
            raise ContractViolation(f"tau_abs must be >= 0, got {self.tau_abs}")

    @property
    def factor(self) -> float:
        return 1.0 / (1.0 - self.epsilon)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    cell_count: int
    min_value: float
    max_violation: float
    violators: int

    def to_dict(self) -> dict:
        return {'round': self.round, 'cell_count': self.cell_count, 'min_value': self.min_value,
                'max_violation': self.max_violation, 'violators': self.violators}


@dataclass(frozen=True)
class ApproxResult:
    """Output x_bar = C_k of the partition algorithm"""
    x_bar: Tuple[float, ...]
    value: float
    k: int
    cell_count: int
    terminated_by: str
    rounds: int
    epsilon: float
    lipschitz: float
    tau_abs: float
    cells: Tuple[Cell, ...] = field(repr=False, default=())
    trace: Tuple[RoundRecord, ...] = field(repr=False, default=())

    @property
    def factor(self) -> float:
        return 1.0 / (1.0 - self.epsilon)

    @property
    def floor_slack(self) -> float:
        """Additive relaxation of the guarantee owed to the floor"""
        return self.tau_abs * self.factor if self.terminated_by == TERMINATED_BY_FLOOR else 0.0

    def to_dict(self, include_trace: bool = True) -> dict:
        data = {
            'x_bar': list(self.x_bar),
            'value': self.value,
            'k': self.k,
            'cell_count': self.cell_count,
            'terminated_by': self.terminated_by,
            'rounds': self.rounds,
            'epsilon': self.epsilon,
            'lipschitz': self.lipschitz,
            'tau_abs': self.tau_abs,
            'factor': self.factor,
        }
        if include_trace:
            data['trace'] = [record.to_dict() for record in self.trace]
        return data


def split_cell(cell: Cell) -> Tuple[Cell, Cell]:
    """Bisect along the longest edge, lowest axis on ties; children carry no id or value"""
    edges = cell.edges
    if not np.all(edges > 0):
        raise ContractViolation(f"cell {cell.id} has zero volume and cannot be split")
    axis = int(np.argmax(edges))
    middle = (cell.lower[axis] + cell.upper[axis]) / 2.0
    left_upper = cell.upper[:axis] + (middle,) + cell.upper[axis + 1:]
    right_lower = cell.lower[:axis] + (middle,) + cell.lower[axis + 1:]
    return Cell(lower=cell.lower, upper=left_upper), Cell(lower=right_lower, upper=cell.upper)


def _violations(cells: Sequence[Cell], config: ApproxConfig) -> np.ndarray:
    values = np.asarray([c.h_value for c in cells], dtype=float)
    diameters = np.asarray([c.diameter for c in cells], dtype=float)
    target = (1.0 - config.epsilon) * float(np.min(values))
    return target - (values - config.lipschitz * diameters)


def criterion_satisfied(cells: Sequence[Cell], config: ApproxConfig,
                        tau_abs: Optional[float] = None) -> Tuple[bool, List[int]]:
    """Check h_j - L*d_j >= (1-eps) * min_i h_i for every cell; returns (ok, violator ids)

    With tau_abs given, a cell with L*d_j <= tau_abs also passes.
    """
    if not cells:
        raise ContractViolation("criterion needs at least one cell")
    if any(c.h_value is None for c in cells):
        raise ContractViolation("every cell needs a cached h_f value")
    violation = _violations(cells, config)
    failing = violation > 0
    if tau_abs is not None:
        small = np.asarray([config.lipschitz * c.diameter <= tau_abs for c in cells])
        failing &= ~small
    violators = sorted(c.id for c, bad in zip(cells, failing) if bad)
    return len(violators) == 0, violators


def partition_volume(cells: Sequence[Cell]) -> float:
    return float(sum(c.volume for c in cells))


def interiors_overlap(a: Cell, b: Cell) -> bool:
    """True when the open boxes of a and b intersect"""
    low = np.maximum(np.asarray(a.lower), np.asarray(b.lower))
    high = np.minimum(np.asarray(a.upper), np.asarray(b.upper))
    return bool(np.all(high > low))


def evaluate_centers(ensemble: Ensemble, cells: Sequence[Cell], workers: int = 1,
                     chunk_size: int = 65_536) -> List[float]:
    """h_f at each cell center, in input order"""
    if not cells:
        return []
    centers = np.asarray([c.center for c in cells], dtype=float)
    bounds = [(start, min(start + chunk_size, len(cells))) for start in range(0, len(cells), chunk_size)]

    def task(span):
        start, stop = span
        return rank_rows(value_matrix(ensemble, centers[start:stop]), ensemble.f + 1)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(task, bounds))
    else:
        parts = [task(span) for span in bounds]
    return np.concatenate(parts).tolist()


def _best_cell(cells: Sequence[Cell]) -> Cell:
    return min(cells, key=lambda c: (c.h_value, c.center))


def refine(ensemble: Ensemble, config: ApproxConfig, workers: Optional[int] = None,
           settings: Optional[Settings] = None,
           on_round: Optional[Callable[[int, Sequence[Cell]], None]] = None) -> ApproxResult:
    """Partition the domain until the criterion holds and return the best center

    on_round, when given, sees the partition at the start of every round.
    """
    settings = settings or get_settings()
    if not ensemble.nonnegative:
        raise ContractViolation("the partition algorithm requires an ensemble flagged non-negative")
    workers = max(1, workers if workers is not None else settings.workers)
    max_cells = config.max_cells if config.max_cells is not None else settings.max_cells

    domain = ensemble.domain
    root = Cell(lower=domain.lower, upper=domain.upper, id=0)
    root = replace(root, h_value=evaluate_centers(ensemble, [root])[0])
    if config.tau_abs is not None:
        tau_abs = float(config.tau_abs)
    else:
        h_scale = root.h_value if root.h_value > 0 else 1.0
        tau_abs = settings.tau_scale * h_scale

    cells: List[Cell] = [root]
    next_id = 1
    trace: List[RoundRecord] = []
    round_number = 0
    while True:
        if on_round is not None:
            on_round(round_number, tuple(cells))
        ok, violators = criterion_satisfied(cells, config, tau_abs)
        trace.append(RoundRecord(
            round=round_number,
            cell_count=len(cells),
            min_value=float(min(c.h_value for c in cells)),
            max_violation=float(np.max(_violations(cells, config))),
            violators=len(violators),
        ))
        if ok:
            strict_ok, _ = criterion_satisfied(cells, config)
            terminated_by = TERMINATED_BY_CRITERION if strict_ok else TERMINATED_BY_FLOOR
            break
        if len(cells) + len(violators) > max_cells:
            terminated_by = TERMINATED_BY_BUDGET
            logger.warning(f"Cell budget {max_cells} exhausted after {round_number} rounds "
                           f"with {len(violators)} cells still violating the criterion")
            break

        violating = set(violators)
        children: List[Cell] = []
        for cell in cells:
            if cell.id not in violating:
                continue
            for child in split_cell(cell):
                children.append(replace(child, id=next_id))
                next_id += 1
        values = evaluate_centers(ensemble, children, workers, settings.chunk_size)
        children = [replace(child, h_value=v) for child, v in zip(children, values)]
        cells = [c for c in cells if c.id not in violating] + children
        round_number += 1

    best = _best_cell(cells)
    if terminated_by == TERMINATED_BY_FLOOR:
        logger.warning(f"Criterion met only with the floor tau_abs={tau_abs:.3g}; "
                       "the guarantee carries an additive slack")
    logger.info(f"Partition finished by {terminated_by}: {len(cells)} cells, {round_number} rounds, "
                f"h_f(C_k)={best.h_value:.6g} at {best.center}")
    return ApproxResult(
        x_bar=best.center,
        value=float(best.h_value),
        k=int(best.id),
        cell_count=len(cells),
        terminated_by=terminated_by,
        rounds=round_number,
        epsilon=config.epsilon,
        lipschitz=config.lipschitz,
        tau_abs=tau_abs,
        cells=tuple(cells),
        trace=tuple(trace),
    )
