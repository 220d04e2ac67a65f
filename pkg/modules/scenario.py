"""
Scenario files: loading, validation, expansion into an Ensemble, and seeded generation

A scenario lists honest function specs and adversary directives. Directives
are expanded against the honest specs at build time. Faulty positions are
kept in the scenario and only ever reach the GroundTruth; the Ensemble
handed to solvers does not know them.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from modules.errors import ContractViolation, ScenarioError
from modules.functions import (
    Cone, CostFunctionSpec, Quadratic, certify_nonnegative, make_above_all_adversary,
    make_below_all_adversary, make_gap_adversary, spec_from_dict,
)
from modules.rank_core import Ensemble, GroundTruth, Hypercube

logger = logging.getLogger(__name__)

ADVERSARY_KINDS = ("above_all", "below_all", "gap", "explicit")
GENERATED_KINDS = ("above_all", "below_all", "gap", "random_cone")

# template name -> (dimension, honest family)
TEMPLATES = {
    "cones-1d": (1, "cone"),
    "cones-2d": (2, "cone"),
    "quadratics-1d": (1, "quadratic"),
    "quadratics-2d": (2, "quadratic"),
    "mixed-2d": (2, "mixed"),
}

DECIMALS = 6


class _Mapping(dict):
    """dict that remembers the source line of itself and of each key"""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.line: Optional[int] = None
        self.key_lines: Dict[str, int] = {}


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader: _LineLoader, node: yaml.MappingNode) -> _Mapping:
    mapping = _Mapping()
    mapping.update(loader.construct_mapping(node, deep=True))
    mapping.line = node.start_mark.line + 1
    mapping.key_lines = {key.value: key.start_mark.line + 1 for key, _ in node.value
                         if isinstance(key, yaml.ScalarNode)}
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _line_of(data: Any, key: Optional[str] = None) -> Optional[int]:
    if not isinstance(data, _Mapping):
        return None
    if key is not None and key in data.key_lines:
        return data.key_lines[key]
    return data.line


@dataclass(frozen=True)
class AdversaryDirective:
    """How to build one faulty function from the honest ones"""
    kind: str
    margin: float = 1.0
    V: Optional[float] = None
    spec: Optional[CostFunctionSpec] = None

    def to_dict(self) -> Dict:
        if self.kind == "explicit":
            return {'kind': self.kind, 'spec': self.spec.to_dict()}
        data = {'kind': self.kind, 'margin': self.margin}
        if self.V is not None:
            data['V'] = self.V
        return data

    def expand(self, honest: Sequence[CostFunctionSpec], domain: Hypercube,
               nonnegative: bool) -> CostFunctionSpec:
        if self.kind == "above_all":
            return make_above_all_adversary(honest, self.margin)
        if self.kind == "below_all":
            return make_below_all_adversary(honest, self.margin, domain=domain, nonnegative=nonnegative)
        if self.kind == "gap":
            return make_gap_adversary(honest, self.V, self.margin)
        return self.spec


@dataclass(frozen=True)
class SolverSettings:
    resolution: Union[int, Tuple[int, ...], None] = None
    epsilon: Optional[float] = None
    lipschitz: Optional[float] = None
    max_cells: Optional[int] = None
    grid_budget: Optional[int] = None
    tau_abs: Optional[float] = None

    def to_dict(self) -> Dict:
        data = {}
        for key in ('resolution', 'epsilon', 'lipschitz', 'max_cells', 'grid_budget', 'tau_abs'):
            value = getattr(self, key)
            if value is not None:
                data[key] = list(value) if isinstance(value, tuple) else value
        return data


@dataclass(frozen=True)
class IndistinguishabilitySettings:
    """Parameters of the gap construction run alongside a scenario"""
    V: Tuple[float, ...] = (10.0, 100.0)
    r: int = 1
    margin: float = 0.5

    def to_dict(self) -> Dict:
        return {'V': list(self.V), 'r': self.r, 'margin': self.margin}


@dataclass(frozen=True)
class Scenario:
    name: str
    domain: Hypercube
    f: int
    honest: Tuple[CostFunctionSpec, ...]
    adversaries: Tuple[AdversaryDirective, ...] = ()
    faulty: Optional[Tuple[int, ...]] = None
    nonnegative: bool = False
    seed: Optional[int] = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    indistinguishability: Optional[IndistinguishabilitySettings] = None
    source: Optional[str] = field(default=None, compare=False, repr=False)
    lines: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.honest) + len(self.adversaries)

    @property
    def faulty_indices(self) -> Tuple[int, ...]:
        """1-based faulty positions; the last len(adversaries) by default"""
        if self.faulty is not None:
            return tuple(self.faulty)
        return tuple(range(len(self.honest) + 1, self.n + 1))

    def _error(self, message: str, key: str) -> ScenarioError:
        return ScenarioError(message, line=self.lines.get(key), source=self.source)

    def build(self) -> Tuple[Ensemble, GroundTruth]:
        """Expand directives and return the solver-facing Ensemble and the oracle's GroundTruth"""
        n = self.n
        faulty = self.faulty_indices
        if len(faulty) != len(self.adversaries):
            raise self._error(f"{len(faulty)} faulty positions for {len(self.adversaries)} adversaries", 'faulty')
        if len(set(faulty)) != len(faulty) or any(not 1 <= i <= n for i in faulty):
            raise self._error(f"faulty positions {list(faulty)} must be distinct and within 1..{n}", 'faulty')
        if n < 2 * self.f + 1:
            raise self._error(f"need n >= 2f+1, got n={n}, f={self.f}", 'f')
        if len(faulty) > self.f:
            raise self._error(f"{len(faulty)} adversaries exceed the fault budget f={self.f}", 'adversaries')

        specs: List[Optional[CostFunctionSpec]] = [None] * n
        for position, directive in zip(faulty, self.adversaries):
            try:
                specs[position - 1] = directive.expand(self.honest, self.domain, self.nonnegative)
            except ContractViolation as e:
                raise self._error(f"adversary at position {position}: {e}", f"adversaries[{position}]") from e
        remaining = iter(self.honest)
        specs = [spec if spec is not None else next(remaining) for spec in specs]

        if self.nonnegative:
            ok, lowest = certify_nonnegative(specs, self.domain)
            if not ok:
                raise self._error(f"scenario is flagged non-negative but a function reaches {lowest:.6g}",
                                  'nonnegative')
        try:
            ensemble = Ensemble(specs=tuple(specs), f=self.f, domain=self.domain, nonnegative=self.nonnegative)
        except ContractViolation as e:
            raise self._error(str(e), 'honest') from e
        truth = GroundTruth(n=n, faulty_set=frozenset(faulty))
        logger.info(f"Built scenario {self.name!r}: n={n}, f={self.f}, d={self.domain.dimension}, "
                    f"{len(faulty)} faulty")
        return ensemble, truth

    def to_dict(self) -> Dict:
        data = {'name': self.name}
        if self.seed is not None:
            data['seed'] = self.seed
        data.update({
            'domain': self.domain.to_dict(),
            'n': self.n,
            'f': self.f,
            'nonnegative': self.nonnegative,
        })
        if self.faulty is not None:
            data['faulty'] = list(self.faulty)
        data['honest'] = [spec.to_dict() for spec in self.honest]
        data['adversaries'] = [directive.to_dict() for directive in self.adversaries]
        solver = self.solver.to_dict()
        if solver:
            data['solver'] = solver
        if self.indistinguishability is not None:
            data['indistinguishability'] = self.indistinguishability.to_dict()
        return data


class _Reader:
    """Field access on a parsed mapping with line-anchored errors"""

    def __init__(self, source: Optional[str]):
        self.source = source
        self.lines: Dict[str, int] = {}

    def fail(self, message: str, data: Any = None, key: Optional[str] = None) -> ScenarioError:
        return ScenarioError(message, line=_line_of(data, key), source=self.source)

    def mapping(self, data: Any, what: str, parent: Any = None, key: Optional[str] = None) -> Dict:
        if not isinstance(data, dict):
            raise self.fail(f"{what} must be a mapping", parent, key)
        return data

    def require(self, data: Dict, key: str, what: str = "scenario") -> Any:
        if key not in data:
            raise self.fail(f"{what} is missing required key {key!r}", data)
        return data[key]

    def number(self, data: Dict, key: str, cast=float, default: Any = None, required: bool = False) -> Any:
        if key not in data or data[key] is None:
            if required:
                raise self.fail(f"missing required key {key!r}", data)
            return default
        value = data[key]
        if isinstance(value, bool):
            raise self.fail(f"{key} must be a number, got {value!r}", data, key)
        try:
            converted = cast(value)
        except (TypeError, ValueError):
            raise self.fail(f"{key} must be a number, got {value!r}", data, key)
        if cast is int and converted != value:
            raise self.fail(f"{key} must be an integer, got {value!r}", data, key)
        return converted

    def spec(self, data: Any, where: str, parent: Any, key: Optional[str]) -> CostFunctionSpec:
        self.mapping(data, where, parent, key)
        try:
            return spec_from_dict(dict(data))
        except ContractViolation as e:
            raise self.fail(f"{where}: {e}", data) from e

    def remember(self, key: str, data: Any, field_name: Optional[str] = None) -> None:
        line = _line_of(data, field_name)
        if line is not None:
            self.lines[key] = line


def _parse(data: Any, source: Optional[str]) -> Scenario:
    reader = _Reader(source)
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping at the top level", line=_line_of(data) or 1, source=source)

    name = str(data.get('name') or Path(source or "scenario").stem)
    domain_data = reader.mapping(reader.require(data, 'domain'), "domain", data, 'domain')
    try:
        domain = Hypercube(lower=tuple(reader.require(domain_data, 'lower', "domain")),
                           upper=tuple(reader.require(domain_data, 'upper', "domain")))
    except (ContractViolation, TypeError, ValueError) as e:
        raise reader.fail(f"invalid domain: {e}", domain_data) from e
    f = reader.number(data, 'f', int, required=True)
    if f < 0:
        raise reader.fail(f"f must be >= 0, got {f}", data, 'f')

    honest_data = reader.require(data, 'honest')
    if not isinstance(honest_data, list) or not honest_data:
        raise reader.fail("honest must be a non-empty list of function specs", data, 'honest')
    honest = tuple(reader.spec(item, f"honest[{i}]", data, 'honest') for i, item in enumerate(honest_data))

    adversaries = []
    adversary_data = data.get('adversaries') or []
    if not isinstance(adversary_data, list):
        raise reader.fail("adversaries must be a list", data, 'adversaries')
    for i, item in enumerate(adversary_data):
        reader.mapping(item, f"adversaries[{i}]", data, 'adversaries')
        kind = item.get('kind')
        if kind not in ADVERSARY_KINDS:
            raise reader.fail(f"adversaries[{i}]: unknown kind {kind!r}; expected one of {list(ADVERSARY_KINDS)}",
                              item, 'kind')
        if kind == "explicit":
            spec = reader.spec(reader.require(item, 'spec', f"adversaries[{i}]"), f"adversaries[{i}].spec",
                               item, 'spec')
            directive = AdversaryDirective(kind=kind, spec=spec)
        else:
            margin = reader.number(item, 'margin', float, default=1.0)
            V = reader.number(item, 'V', float, required=(kind == "gap"))
            directive = AdversaryDirective(kind=kind, margin=margin, V=V)
        adversaries.append(directive)

    faulty = data.get('faulty')
    if faulty is not None:
        if not isinstance(faulty, list) or any(isinstance(i, bool) or not isinstance(i, int) for i in faulty):
            raise reader.fail("faulty must be a list of 1-based integer positions", data, 'faulty')
        faulty = tuple(faulty)

    n_total = len(honest) + len(adversaries)
    declared_n = reader.number(data, 'n', int)
    if declared_n is not None and declared_n != n_total:
        raise reader.fail(f"n={declared_n} but the scenario lists {n_total} functions", data, 'n')
    if n_total < 2 * f + 1:
        raise reader.fail(f"need n >= 2f+1, got n={n_total}, f={f}", data, 'f')

    solver_data = data.get('solver') or {}
    reader.mapping(solver_data, "solver", data, 'solver')
    resolution = solver_data.get('resolution')
    if isinstance(resolution, list):
        resolution = tuple(int(m) for m in resolution)
    elif resolution is not None:
        resolution = reader.number(solver_data, 'resolution', int)
    solver = SolverSettings(
        resolution=resolution,
        epsilon=reader.number(solver_data, 'epsilon', float),
        lipschitz=reader.number(solver_data, 'lipschitz', float),
        max_cells=reader.number(solver_data, 'max_cells', int),
        grid_budget=reader.number(solver_data, 'grid_budget', int),
        tau_abs=reader.number(solver_data, 'tau_abs', float),
    )

    indistinguishability = None
    if data.get('indistinguishability') is not None:
        block = reader.mapping(data['indistinguishability'], "indistinguishability", data, 'indistinguishability')
        gaps = block.get('V', [10.0, 100.0])
        gaps = gaps if isinstance(gaps, list) else [gaps]
        try:
            gaps = tuple(float(v) for v in gaps)
        except (TypeError, ValueError):
            raise reader.fail(f"indistinguishability V must be a list of numbers, got {gaps!r}", block, 'V')
        if not gaps or any(not v > 0 for v in gaps):
            raise reader.fail(f"indistinguishability V must be non-empty and > 0, got {list(gaps)}", block, 'V')
        r = reader.number(block, 'r', int, default=1)
        if f == 0:
            raise reader.fail("indistinguishability needs f >= 1", data, 'indistinguishability')
        if not 1 <= r < f + 1:
            raise reader.fail(f"indistinguishability rank r={r} must satisfy 1 <= r < f+1={f + 1}",
                              block, 'r')
        margin = reader.number(block, 'margin', float, default=0.5)
        if not margin > 0:
            raise reader.fail(f"indistinguishability margin must be > 0, got {margin}", block, 'margin')
        indistinguishability = IndistinguishabilitySettings(V=gaps, r=r, margin=margin)

    for key in ('f', 'n', 'faulty', 'honest', 'adversaries', 'nonnegative'):
        reader.remember(key, data, key)
    for i, item in enumerate(adversary_data):
        position = faulty[i] if faulty is not None and i < len(faulty) else len(honest) + i + 1
        reader.remember(f"adversaries[{position}]", item)

    return Scenario(
        name=name,
        domain=domain,
        f=f,
        honest=honest,
        adversaries=tuple(adversaries),
        faulty=faulty,
        nonnegative=bool(data.get('nonnegative', False)),
        seed=reader.number(data, 'seed', int),
        solver=solver,
        indistinguishability=indistinguishability,
        source=source,
        lines=reader.lines,
    )


def loads(text: str, source: Optional[str] = None) -> Scenario:
    """Parse scenario YAML text"""
    try:
        data = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        raise ScenarioError(f"invalid YAML: {getattr(e, 'problem', None) or e}",
                            line=mark.line + 1 if mark is not None else None, source=source) from e
    return _parse(data, source)


def load(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e}", source=str(path)) from e
    return loads(text, source=str(path))


def dump(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None)


def save(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump(scenario), encoding='utf-8')
    logger.info(f"Wrote scenario {scenario.name!r} to {path}")
    return path


def _r(value: float) -> float:
    return round(float(value), DECIMALS)


def _random_center(rng: np.random.Generator, domain: Hypercube) -> Tuple[float, ...]:
    return tuple(_r(v) for v in rng.uniform(domain.lower_array, domain.upper_array))


def _random_honest(rng: np.random.Generator, family: str, domain: Hypercube) -> CostFunctionSpec:
    if family == "mixed":
        family = "cone" if rng.random() < 0.5 else "quadratic"
    center = _random_center(rng, domain)
    # Offsets >= 1 keep the honest minimum away from 0 and admit below-all margins
    offset = _r(rng.uniform(1.0, 3.0))
    if family == "cone":
        return Cone(center=center, slope=_r(rng.uniform(0.5, 2.0)), offset=offset)
    return Quadratic(center=center, scale=_r(rng.uniform(0.2, 1.0)), offset=offset)


def generate(seed: int, template: str) -> Scenario:
    """Deterministic random scenario; the same seed and template give an identical file"""
    if template not in TEMPLATES:
        raise ContractViolation(f"unknown template {template!r}; expected one of {sorted(TEMPLATES)}")
    dimension, family = TEMPLATES[template]
    rng = np.random.default_rng(seed)
    domain = Hypercube(lower=(-2.0,) * dimension, upper=(2.0,) * dimension)

    f = int(rng.integers(1, 8))
    n = int(rng.integers(2 * f + 1, 16))
    honest = tuple(_random_honest(rng, family, domain) for _ in range(n - f))
    kind = GENERATED_KINDS[int(rng.integers(0, len(GENERATED_KINDS)))]

    adversaries = []
    for _ in range(f):
        margin = _r(rng.uniform(0.1, 0.9))
        if kind == "random_cone":
            cone = Cone(center=_random_center(rng, domain), slope=_r(rng.uniform(0.5, 2.0)),
                        offset=_r(rng.uniform(0.0, 3.0)))
            adversaries.append(AdversaryDirective(kind="explicit", spec=cone))
        elif kind == "gap":
            adversaries.append(AdversaryDirective(kind="gap", margin=margin, V=_r(rng.uniform(1.0, 20.0))))
        else:
            adversaries.append(AdversaryDirective(kind=kind, margin=margin))

    scenario = Scenario(
        name=f"{template}-seed{seed}",
        domain=domain,
        f=f,
        honest=honest,
        adversaries=tuple(adversaries),
        nonnegative=True,
        seed=int(seed),
        solver=SolverSettings(epsilon=0.25),
        indistinguishability=IndistinguishabilitySettings() if kind == "gap" else None,
    )
    logger.debug(f"Generated {scenario.name}: n={n}, f={f}, adversary kind {kind}")
    return scenario
