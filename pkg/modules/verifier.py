"""
Ground-truth oracles and numerical checks of the fault-tolerance bounds

Every check returns CheckRecord objects. A record's status is recomputable
from lhs, rhs, relation and tolerance alone. Oracle minima are grid minima
carrying an additive certificate; tolerances are sums of the certificates
involved. A check whose oracle cannot be certified, or whose budget ran out,
is reported inconclusive rather than passed.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from modules.approx_solver import TERMINATED_BY_BUDGET, ApproxResult, interiors_overlap
from modules.errors import BudgetExceededError, ContractViolation
from modules.exact_solver import GridSolver, Resolution, SolveResult, iter_grid_values
from modules.functions import CostFunctionSpec, make_gap_adversary, max_lipschitz
from modules.rank_core import (
    Ensemble, GroundTruth, Hypercube, columns_for, eval_gf, profile, rank_k, rank_rows, value_matrix,
)

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
SKIPPED = "skipped"

# Floating-point slack for comparisons that are exact in real arithmetic.
FLOAT_SLACK = 1e-9


def _holds(lhs: float, rhs: float, relation: str, tolerance: float) -> bool:
    if relation == ">=":
        return lhs >= rhs - tolerance
    if relation == ">":
        return lhs > rhs - tolerance
    if relation == "<=":
        return lhs <= rhs + tolerance
    if relation == "==":
        return abs(lhs - rhs) <= tolerance
    raise ContractViolation(f"unknown relation {relation!r}")


@dataclass(frozen=True)
class CheckRecord:
    """Outcome of one inequality: lhs <relation> rhs, within tolerance"""
    name: str
    status: str
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    relation: str = ">="
    tolerance: float = 0.0
    detail: Dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def compare(cls, name: str, lhs: float, rhs: float, relation: str,
                tolerance: float = 0.0, **detail) -> "CheckRecord":
        lhs, rhs, tolerance = float(lhs), float(rhs), float(tolerance)
        status = PASS if _holds(lhs, rhs, relation, tolerance) else FAIL
        record = cls(name=name, status=status, lhs=lhs, rhs=rhs, relation=relation,
                     tolerance=tolerance, detail=detail)
        if status == FAIL:
            logger.warning(f"Check {name} failed: {lhs:.9g} {relation} {rhs:.9g} "
                           f"(tolerance {tolerance:.3g}, gap {record.gap:.3g})")
        return record

    @classmethod
    def inconclusive(cls, name: str, reason: str, **detail) -> "CheckRecord":
        return cls(name=name, status=INCONCLUSIVE, detail={'reason': reason, **detail})

    @classmethod
    def skipped(cls, name: str, reason: str, **detail) -> "CheckRecord":
        return cls(name=name, status=SKIPPED, detail={'reason': reason, **detail})

    @property
    def gap(self) -> Optional[float]:
        if self.lhs is None or self.rhs is None:
            return None
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def recompute(self) -> bool:
        """True when the stored status agrees with lhs, rhs and tolerance"""
        if self.status in (INCONCLUSIVE, SKIPPED):
            return True
        return (self.status == PASS) == _holds(self.lhs, self.rhs, self.relation, self.tolerance)

    def to_dict(self) -> Dict:
        return {'name': self.name, 'status': self.status, 'lhs': self.lhs, 'rhs': self.rhs,
                'relation': self.relation, 'gap': self.gap, 'tolerance': self.tolerance,
                'detail': self.detail}


class VerificationReport:
    """Append-only collection of check records for one scenario"""

    def __init__(self, scenario_id: str, oracle: Optional[Dict] = None):
        self.scenario_id = scenario_id
        self.oracle: Dict = dict(oracle or {})
        self._records: List[CheckRecord] = []

    def add(self, record: CheckRecord) -> None:
        self._records.append(record)

    def extend(self, records: Iterable[CheckRecord]) -> None:
        for record in records:
            self.add(record)

    def merge(self, other: "VerificationReport") -> None:
        self.extend(other._records)
        for key, value in other.oracle.items():
            self.oracle.setdefault(key, value)

    @property
    def records(self) -> Tuple[CheckRecord, ...]:
        """Records ordered by check name; insertion order among equal names"""
        return tuple(sorted(self._records, key=lambda r: r.name))

    def counts(self) -> Dict[str, int]:
        counts = {PASS: 0, FAIL: 0, INCONCLUSIVE: 0, SKIPPED: 0}
        for record in self._records:
            counts[record.status] += 1
        return counts

    @property
    def failures(self) -> Tuple[CheckRecord, ...]:
        return tuple(r for r in self.records if r.status == FAIL)

    @property
    def passed(self) -> bool:
        """No non-inconclusive check failed"""
        return not self.failures

    def to_dict(self) -> Dict:
        return {'scenario': self.scenario_id, 'summary': self.counts(), 'passed': self.passed,
                'oracle': self.oracle, 'checks': [r.to_dict() for r in self.records]}


def _solver(resolution: Resolution, solver: Optional[GridSolver]) -> GridSolver:
    return solver if solver is not None else GridSolver(resolution=resolution)


def _err(result: SolveResult) -> float:
    return result.certificate.error_bound if result.certificate.certified else 0.0


def _point(x) -> List[float]:
    return [float(v) for v in np.asarray(x).reshape(-1)]


def check_claim1(ensemble: Ensemble, truth: GroundTruth, resolution: Resolution = None,
                 solver: Optional[GridSolver] = None) -> List[CheckRecord]:
    """min g_0 >= v_hat >= g_f(x_hat) >= min g_f, plus the rank of v_a at x_a"""
    truth.validate_for(ensemble)
    solver = _solver(resolution, solver)
    names = ("claim1.upper", "claim1.middle", "claim1.lower", "claim1.rank_of_va")
    honest = truth.honest_indices
    f = ensemble.f
    try:
        solve = solver.minimize_hf(ensemble)
        upper = solver.minimize_rank_r(ensemble, honest, 1)
        lower = solver.minimize_rank_r(ensemble, honest, f + 1)
    except BudgetExceededError as e:
        return [CheckRecord.inconclusive(name, str(e)) for name in names]
    if not (upper.certificate.certified and lower.certificate.certified):
        return [CheckRecord.inconclusive(name, "honest oracle has no Lipschitz certificate") for name in names]

    v_a, x_a = upper.v_hat, upper.x_hat
    # Smallest rank of v_a among all n values at x_a; at most f faulty values can sit above it
    at_x_a = profile(ensemble, x_a).as_array()
    slack = FLOAT_SLACK * max(1.0, abs(solve.v_hat))
    smallest_rank = 1 + int(np.count_nonzero(at_x_a > v_a + slack))
    gf_at_x_hat = eval_gf(ensemble, truth, solve.x_hat)
    shared = dict(x_hat=list(solve.x_hat), v_hat=solve.v_hat, x_a=list(x_a), v_a=v_a)
    return [
        CheckRecord.compare("claim1.upper", v_a, solve.v_hat, ">=", _err(upper) + _err(solve), **shared),
        CheckRecord.compare("claim1.middle", solve.v_hat, gf_at_x_hat, ">=", _err(solve) + slack, **shared),
        CheckRecord.compare("claim1.lower", gf_at_x_hat, lower.v_hat, ">=", _err(solve) + _err(lower) + slack,
                            min_gf_point=list(lower.x_hat), **shared),
        CheckRecord.compare("claim1.rank_of_va", smallest_rank, f + 1, "<=", 0.0,
                            values_at_x_a=at_x_a.tolist(), **shared),
    ]


def check_obs1(ensemble: Ensemble, truth: GroundTruth, solve: SolveResult,
               tolerance: Optional[float] = None) -> CheckRecord:
    """At x_hat, at least |H| - f honest values are <= v_hat"""
    truth.validate_for(ensemble)
    if tolerance is None:
        tolerance = FLOAT_SLACK * max(1.0, abs(solve.v_hat))
    honest = truth.honest_indices
    values = profile(ensemble, solve.x_hat).as_array()[columns_for(ensemble.n, honest)]
    bounded = int(np.count_nonzero(values <= solve.v_hat + tolerance))
    above = [i for i, v in zip(honest, values) if v > solve.v_hat + tolerance]
    return CheckRecord.compare("obs1.all_but_f", bounded, len(honest) - ensemble.f, ">=", 0.0,
                               x_hat=list(solve.x_hat), v_hat=solve.v_hat,
                               honest_values=values.tolist(), exceeding=above)


@dataclass
class _GridSweep:
    shape: str
    max_hf_minus_g0: float
    max_g0_minus_hf: float
    max_hf_minus_gf: float
    max_gf_minus_hf: float
    worst_point: Dict


def _sweep(ensemble: Ensemble, truth: GroundTruth, solver: GridSolver) -> _GridSweep:
    """One pass over the oracle grid comparing h_f, g_0, g_f and classifying dominance"""
    grid = solver.grid_for(ensemble.domain)
    honest_cols = columns_for(ensemble.n, truth.honest_set)
    faulty_cols = np.asarray(sorted(i - 1 for i in truth.faulty_set), dtype=int)
    f = ensemble.f
    above = below = faulty_cols.size > 0
    diffs = np.full(4, -np.inf)
    worst: Dict = {}
    for _, points, matrix in iter_grid_values(ensemble, grid, solver.chunk_size):
        honest = matrix[:, honest_cols]
        hf = rank_rows(matrix, f + 1)
        g0 = rank_rows(honest, 1)
        gf = rank_rows(honest, f + 1)
        if faulty_cols.size:
            faulty = matrix[:, faulty_cols]
            above = above and bool(np.all(faulty.min(axis=1) > honest.max(axis=1)))
            below = below and bool(np.all(faulty.max(axis=1) < honest.min(axis=1)))
        chunk = [hf - g0, g0 - hf, hf - gf, gf - hf]
        for slot, delta in enumerate(chunk):
            at = int(np.argmax(delta))
            if delta[at] > diffs[slot]:
                diffs[slot] = float(delta[at])
                if slot in (0, 3):
                    worst[('upper', 'lower')[slot == 3]] = _point(points[at])
    if faulty_cols.size == 0:
        shape = "none"
    elif above:
        # h_f equals g_0 only when all f faulty values sit above the honest ones
        shape = "above" if faulty_cols.size == f else "above_short"
    else:
        shape = "below" if below else "mixed"
    return _GridSweep(shape, *diffs.tolist(), worst_point=worst)


def check_sandwich(ensemble: Ensemble, truth: GroundTruth, resolution: Resolution = None,
                   solver: Optional[GridSolver] = None) -> List[CheckRecord]:
    """g_f <= h_f <= g_0 at every oracle grid node"""
    truth.validate_for(ensemble)
    solver = _solver(resolution, solver)
    try:
        sweep = _sweep(ensemble, truth, solver)
    except BudgetExceededError as e:
        return [CheckRecord.inconclusive(n, str(e)) for n in ("sandwich.lower", "sandwich.upper")]
    return [
        CheckRecord.compare("sandwich.lower", sweep.max_gf_minus_hf, 0.0, "<=", 0.0,
                            worst_point=sweep.worst_point.get('lower')),
        CheckRecord.compare("sandwich.upper", sweep.max_hf_minus_g0, 0.0, "<=", 0.0,
                            worst_point=sweep.worst_point.get('upper')),
    ]


def check_obs2(ensemble: Ensemble, truth: GroundTruth, resolution: Resolution = None,
               solver: Optional[GridSolver] = None) -> List[CheckRecord]:
    """Tightness of the bounds when every faulty function dominates or is dominated"""
    truth.validate_for(ensemble)
    solver = _solver(resolution, solver)
    names = ("obs2.tightness.value", "obs2.tightness.pointwise")
    try:
        sweep = _sweep(ensemble, truth, solver)
        if sweep.shape == "above_short":
            reason = (f"preconditions unmet: {len(truth.faulty_set)} faulty functions lie above all honest "
                      f"ones but f={ensemble.f}; h_f is not g_0")
            return [CheckRecord.skipped(name, reason, shape=sweep.shape) for name in names]
        if sweep.shape not in ("above", "below"):
            reason = f"faulty functions are {sweep.shape}; no dominance precondition holds"
            return [CheckRecord.skipped(name, reason, shape=sweep.shape) for name in names]
        solve = solver.minimize_hf(ensemble)
        rank = 1 if sweep.shape == "above" else ensemble.f + 1
        oracle = solver.minimize_rank_r(ensemble, truth.honest_indices, rank)
    except BudgetExceededError as e:
        return [CheckRecord.inconclusive(name, str(e)) for name in names]
    if not oracle.certificate.certified:
        return [CheckRecord.inconclusive(name, "honest oracle has no Lipschitz certificate") for name in names]

    if sweep.shape == "above":
        pointwise = max(sweep.max_hf_minus_g0, sweep.max_g0_minus_hf)
        bound = "g_0"
    else:
        pointwise = max(sweep.max_hf_minus_gf, sweep.max_gf_minus_hf)
        bound = "g_f"
    return [
        CheckRecord.compare("obs2.tightness.value", solve.v_hat, oracle.v_hat, "==",
                            _err(solve) + _err(oracle), shape=sweep.shape, bound=f"min {bound}",
                            x_hat=list(solve.x_hat)),
        CheckRecord.compare("obs2.tightness.pointwise", pointwise, 0.0, "==", 0.0,
                            shape=sweep.shape, bound=bound),
    ]


def check_obs2_tightness(ensemble_above: Optional[Ensemble], ensemble_below: Optional[Ensemble],
                         truths: Tuple[Optional[GroundTruth], Optional[GroundTruth]],
                         resolution: Resolution = None,
                         solver: Optional[GridSolver] = None) -> List[CheckRecord]:
    """Upper tightness on an above-all scenario and lower tightness on a below-all one"""
    records: List[CheckRecord] = []
    for label, ensemble, truth in (("above", ensemble_above, truths[0]), ("below", ensemble_below, truths[1])):
        if ensemble is None or truth is None:
            continue
        for record in check_obs2(ensemble, truth, resolution, solver):
            renamed = record.name.replace("obs2.", f"obs2.{label}.", 1)
            if record.status in (PASS, FAIL) and record.detail.get('shape') != label:
                record = CheckRecord.skipped(renamed, f"expected {label}-all faulty functions, "
                                             f"found {record.detail.get('shape')}")
            records.append(CheckRecord(name=renamed, status=record.status, lhs=record.lhs, rhs=record.rhs,
                                       relation=record.relation, tolerance=record.tolerance,
                                       detail=record.detail))
    return records


def check_obs3_indistinguishability(tail_specs: Sequence[CostFunctionSpec], f: int, V: float,
                                    domain: Hypercube, resolution: Resolution = None, r: int = 1,
                                    margin: float = 0.5,
                                    solver: Optional[GridSolver] = None) -> List[CheckRecord]:
    """A rank-r estimator with r < f+1 is fooled by gap adversaries by more than V

    Functions 1..f exceed the tail's envelope by V + margin; the tail is
    functions f+1..n. Execution E1 labels the last f faulty, E2 the first f.
    """
    if not 1 <= r < f + 1:
        raise ContractViolation(f"the construction concerns ranks 1 <= r < f+1, got r={r}, f={f}")
    solver = _solver(resolution, solver)
    adversary = make_gap_adversary(tail_specs, V, margin)
    ensemble = Ensemble(specs=(adversary,) * f + tuple(tail_specs), f=f, domain=domain)
    n = ensemble.n
    e1 = GroundTruth(n=n, faulty_set=frozenset(range(n - f + 1, n + 1)))
    e2 = GroundTruth(n=n, faulty_set=frozenset(range(1, f + 1)))
    names = ("obs3.identical_outputs", "obs3.e1_guarantee", "obs3.e2_gap")
    try:
        # One run serves both executions: the estimator sees the same n functions
        estimate = solver.minimize_rank_r(ensemble, None, r)
        oracle = solver.minimize_rank_r(ensemble, e2.honest_indices, 1)
    except BudgetExceededError as e:
        return [CheckRecord.inconclusive(f"{name}[V={V:g}]", str(e)) for name in names]
    outputs = {'E1': {'x_star': list(estimate.x_hat), 'v_star': estimate.v_hat},
               'E2': {'x_star': list(estimate.x_hat), 'v_star': estimate.v_hat}}
    e1_values = profile(ensemble, estimate.x_hat).as_array()[columns_for(n, e1.honest_set)]
    min_g0 = oracle.v_hat
    tolerance = _err(oracle) + _err(estimate)
    return [
        CheckRecord.compare(f"obs3.identical_outputs[V={V:g}]", outputs['E1']['v_star'],
                            outputs['E2']['v_star'], "==", 0.0, outputs=outputs),
        CheckRecord.compare(f"obs3.e1_guarantee[V={V:g}]", estimate.v_hat, rank_k(e1_values, r), ">=",
                            0.0, r=r, honest=list(e1.honest_indices)),
        CheckRecord.compare(f"obs3.e2_gap[V={V:g}]", estimate.v_hat, min_g0 + V, ">", tolerance,
                            V=V, min_g0=min_g0, excess=estimate.v_hat - min_g0,
                            honest=list(e2.honest_indices), x_star=list(estimate.x_hat)),
    ]


def check_obs3_sweep(tail_specs: Sequence[CostFunctionSpec], f: int, gaps: Sequence[float],
                     domain: Hypercube, resolution: Resolution = None, r: int = 1, margin: float = 0.5,
                     solver: Optional[GridSolver] = None) -> List[CheckRecord]:
    """The gap construction for each V, plus the excess growing one-for-one with V"""
    solver = _solver(resolution, solver)
    records: List[CheckRecord] = []
    excess: List[Tuple[float, float]] = []
    for V in sorted(gaps):
        batch = check_obs3_indistinguishability(tail_specs, f, V, domain, r=r, margin=margin, solver=solver)
        records.extend(batch)
        gap_record = batch[-1]
        if gap_record.status in (PASS, FAIL):
            excess.append((V, gap_record.detail['excess']))
    if len(excess) >= 2:
        (v_low, e_low), (v_high, e_high) = excess[0], excess[-1]
        records.append(CheckRecord.compare("obs3.linear_growth", e_high - e_low, v_high - v_low, "==",
                                           FLOAT_SLACK * max(1.0, v_high), excess=[e for _, e in excess],
                                           gaps=[v for v, _ in excess]))
    return records


def check_lipschitz_g0(ensemble: Ensemble, truth: GroundTruth, L: Optional[float] = None,
                       pair_count: int = 10_000, seed: int = 0) -> CheckRecord:
    """Sampled |g_0(x1) - g_0(x2)| <= L ||x1 - x2|| over random pairs in X"""
    truth.validate_for(ensemble)
    honest = truth.honest_indices
    if L is None:
        L = max_lipschitz([ensemble.specs[i - 1] for i in honest], ensemble.domain)
    if not np.isfinite(L):
        return CheckRecord.inconclusive("claim2.lipschitz_g0", "honest functions carry no Lipschitz bound")
    domain = ensemble.domain
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(domain.lower_array, domain.upper_array, size=(pair_count, domain.dimension))
    x2 = rng.uniform(domain.lower_array, domain.upper_array, size=(pair_count, domain.dimension))
    g1 = rank_rows(value_matrix(ensemble, x1, honest), 1)
    g2 = rank_rows(value_matrix(ensemble, x2, honest), 1)
    excess = np.abs(g1 - g2) - L * np.linalg.norm(x1 - x2, axis=1)
    worst = int(np.argmax(excess))
    scale = FLOAT_SLACK * max(1.0, float(np.max(np.abs(np.concatenate([g1, g2])))))
    return CheckRecord.compare("claim2.lipschitz_g0", float(excess[worst]), 0.0, "<=", scale,
                               L=float(L), pairs=pair_count,
                               violations=int(np.count_nonzero(excess > scale)),
                               worst_pair=[_point(x1[worst]), _point(x2[worst])])


def _honest_lipschitz(ensemble: Ensemble, truth: GroundTruth) -> float:
    return max_lipschitz([ensemble.specs[i - 1] for i in truth.honest_indices], ensemble.domain)


def check_approx_lipschitz(ensemble: Ensemble, truth: GroundTruth, approx: ApproxResult) -> CheckRecord:
    """The partition's L must be at least the largest honest Lipschitz bound"""
    truth.validate_for(ensemble)
    honest_L = _honest_lipschitz(ensemble, truth)
    if not np.isfinite(honest_L):
        return CheckRecord.inconclusive("approx.lipschitz", "honest functions carry no Lipschitz bound",
                                        L=approx.lipschitz)
    return CheckRecord.compare("approx.lipschitz", approx.lipschitz, honest_L, ">=",
                               FLOAT_SLACK * max(1.0, honest_L), L=approx.lipschitz, honest_L=honest_L)


def _understated_lipschitz(ensemble: Ensemble, truth: GroundTruth, approx: ApproxResult) -> Optional[str]:
    honest_L = _honest_lipschitz(ensemble, truth)
    if not np.isfinite(honest_L) or _holds(approx.lipschitz, honest_L, ">=", FLOAT_SLACK * max(1.0, honest_L)):
        return None
    return (f"partition used L={approx.lipschitz:g}, below the honest Lipschitz bound {honest_L:g}; "
            "no guarantee claimed")


def check_approx_guarantee(ensemble: Ensemble, truth: GroundTruth, approx: ApproxResult,
                           resolution: Resolution = None,
                           solver: Optional[GridSolver] = None) -> List[CheckRecord]:
    """g_f(x_bar) <= min g_0 / (1 - eps), and at least |H| - f honest values obey the same bound"""
    truth.validate_for(ensemble)
    names = ("approx.guarantee", "approx.count", "approx.center_value")
    if approx.terminated_by == TERMINATED_BY_BUDGET:
        return [CheckRecord.inconclusive(name, "partition stopped on its cell budget; no guarantee claimed")
                for name in names]
    understated = _understated_lipschitz(ensemble, truth, approx)
    if understated:
        return [CheckRecord.inconclusive(name, understated) for name in names]
    solver = _solver(resolution, solver)
    honest = truth.honest_indices
    try:
        oracle = solver.minimize_rank_r(ensemble, honest, 1)
    except BudgetExceededError as e:
        return [CheckRecord.inconclusive(name, str(e)) for name in names]
    if not oracle.certificate.certified:
        return [CheckRecord.inconclusive(name, "honest oracle has no Lipschitz certificate") for name in names]

    bound = approx.factor * oracle.v_hat
    tolerance = approx.factor * _err(oracle) + approx.floor_slack
    values = profile(ensemble, approx.x_bar).as_array()[columns_for(ensemble.n, honest)]
    gf_at_x_bar = rank_k(values, ensemble.f + 1)
    bounded = int(np.count_nonzero(values <= bound + tolerance))
    shared = dict(x_bar=list(approx.x_bar), epsilon=approx.epsilon, factor=approx.factor,
                  min_g0=oracle.v_hat, terminated_by=approx.terminated_by)
    return [
        CheckRecord.compare("approx.guarantee", gf_at_x_bar, bound, "<=", tolerance, **shared),
        CheckRecord.compare("approx.count", bounded, len(honest) - ensemble.f, ">=", 0.0,
                            honest_values=values.tolist(), **shared),
        CheckRecord.compare("approx.center_value", approx.value, bound, "<=", tolerance, **shared),
    ]


def check_partition_tiling(approx: ApproxResult, domain: Hypercube,
                           exhaustive_limit: int = 2000) -> List[CheckRecord]:
    """Cells lie in X, their volumes sum to |X| and no two interiors intersect"""
    cells = approx.cells
    lowers = np.asarray([c.lower for c in cells], dtype=float)
    uppers = np.asarray([c.upper for c in cells], dtype=float)
    total = float(np.sum(np.prod(uppers - lowers, axis=1)))
    records = [
        CheckRecord.compare("partition.volume", total, domain.volume, "==", 1e-9 * domain.volume,
                            cells=len(cells)),
        CheckRecord.compare("partition.contained",
                            int(np.count_nonzero(~(np.all(lowers >= domain.lower_array, axis=1)
                                                   & np.all(uppers <= domain.upper_array, axis=1)))),
                            0, "==", 0.0),
    ]
    if len(cells) > exhaustive_limit:
        records.append(CheckRecord.skipped("partition.overlap",
                                           f"{len(cells)} cells exceed the exhaustive limit {exhaustive_limit}"))
        return records
    low = np.maximum(lowers[:, None, :], lowers[None, :, :])
    high = np.minimum(uppers[:, None, :], uppers[None, :, :])
    overlapping = np.all(high > low, axis=2)
    np.fill_diagonal(overlapping, False)
    pairs = np.argwhere(np.triu(overlapping))
    example = None
    if pairs.size:
        a, b = cells[int(pairs[0][0])], cells[int(pairs[0][1])]
        example = [a.id, b.id] if interiors_overlap(a, b) else None
    records.append(CheckRecord.compare("partition.overlap", int(pairs.shape[0]), 0, "==", 0.0,
                                       example=example))
    return records


def check_derivation_chain(ensemble: Ensemble, truth: GroundTruth, approx: ApproxResult,
                           samples_per_cell: int = 16, seed: int = 0) -> List[CheckRecord]:
    """Per cell: h_f(C_k) <= (h_f(C_j) - L d_j)/(1-eps) and h_f(C_j) <= min_{S_j} g_0 + L d_j"""
    truth.validate_for(ensemble)
    understated = _understated_lipschitz(ensemble, truth, approx)
    if understated:
        return [CheckRecord.inconclusive(name, understated)
                for name in ("derivation.center_bound", "derivation.cell_bound")]
    cells = approx.cells
    L = approx.lipschitz
    values = np.asarray([c.h_value for c in cells], dtype=float)
    diameters = np.asarray([c.diameter for c in cells], dtype=float)
    records: List[CheckRecord] = []

    if approx.terminated_by == TERMINATED_BY_BUDGET:
        records.append(CheckRecord.inconclusive("derivation.center_bound",
                                                "criterion not met; the first inequality is not claimed"))
    else:
        # Cells admitted by the floor are not bound by the first inequality
        strict = L * diameters > approx.tau_abs
        slack = approx.value - approx.factor * (values - L * diameters)
        worst = float(np.max(slack[strict])) if np.any(strict) else -np.inf
        if np.isfinite(worst):
            records.append(CheckRecord.compare("derivation.center_bound", worst, 0.0, "<=",
                                               FLOAT_SLACK * max(1.0, approx.value),
                                               cells=int(np.count_nonzero(strict)),
                                               floor_cells=int(np.count_nonzero(~strict))))
        else:
            records.append(CheckRecord.skipped("derivation.center_bound", "every cell passed by the floor"))

    rng = np.random.default_rng(seed)
    lowers = np.asarray([c.lower for c in cells], dtype=float)
    uppers = np.asarray([c.upper for c in cells], dtype=float)
    unit = rng.uniform(0.0, 1.0, size=(len(cells), samples_per_cell, ensemble.domain.dimension))
    samples = lowers[:, None, :] + unit * (uppers - lowers)[:, None, :]
    centers = ((lowers + uppers) / 2.0)[:, None, :]
    samples = np.concatenate([centers, samples], axis=1)
    flat = samples.reshape(-1, ensemble.domain.dimension)
    g0 = rank_rows(value_matrix(ensemble, flat, truth.honest_indices), 1).reshape(len(cells), -1)
    excess = values - (g0.min(axis=1) + L * diameters)
    worst_cell = int(np.argmax(excess))
    records.append(CheckRecord.compare("derivation.cell_bound", float(excess[worst_cell]), 0.0, "<=",
                                       FLOAT_SLACK * max(1.0, float(np.max(np.abs(values)))),
                                       worst_cell=cells[worst_cell].id,
                                       samples_per_cell=samples_per_cell + 1))
    return records


def verify(ensemble: Ensemble, truth: GroundTruth, scenario_id: str = "scenario",
           solve: Optional[SolveResult] = None, approx: Optional[ApproxResult] = None,
           resolution: Resolution = None, solver: Optional[GridSolver] = None,
           lipschitz: Optional[float] = None, pair_count: int = 10_000, seed: int = 0,
           workers: int = 1) -> VerificationReport:
    """Run every applicable check for one scenario"""
    truth.validate_for(ensemble)
    solver = _solver(resolution, solver)
    honest_specs = [ensemble.specs[i - 1] for i in truth.honest_indices]
    honest_L = max_lipschitz(honest_specs, ensemble.domain)
    grid = solver.grid_for(ensemble.domain)
    report = VerificationReport(scenario_id, oracle={
        'grid_counts': list(grid.counts),
        'grid_step': list(grid.steps),
        'half_cell_diameter': grid.half_cell_diameter,
        'honest_lipschitz': honest_L if np.isfinite(honest_L) else "unbounded",
        'oracle_error_bound': honest_L * grid.half_cell_diameter if np.isfinite(honest_L) else "uncertified",
    })
    if solve is None:
        solve = solver.minimize_hf(ensemble)

    tasks: List[Callable[[], object]] = [
        lambda: check_sandwich(ensemble, truth, solver=solver),
        lambda: check_claim1(ensemble, truth, solver=solver),
        lambda: check_obs1(ensemble, truth, solve),
        lambda: check_obs2(ensemble, truth, solver=solver),
        lambda: check_lipschitz_g0(ensemble, truth, lipschitz, pair_count, seed),
    ]
    if approx is not None:
        tasks += [
            lambda: check_approx_lipschitz(ensemble, truth, approx),
            lambda: check_approx_guarantee(ensemble, truth, approx, solver=solver),
            lambda: check_partition_tiling(approx, ensemble.domain),
            lambda: check_derivation_chain(ensemble, truth, approx, seed=seed),
        ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(lambda task: task(), tasks))
    else:
        outcomes = [task() for task in tasks]
    for outcome in outcomes:
        report.extend(outcome if isinstance(outcome, list) else [outcome])
    logger.info(f"Verified {scenario_id}: {report.counts()}")
    return report
