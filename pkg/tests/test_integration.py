"""
Integration tests for the robust min-max toolkit
Tests the acceptance properties over batches of generated scenarios
"""
from pathlib import Path

import numpy as np
import pytest

from modules.approx_solver import TERMINATED_BY_CRITERION, ApproxConfig, interiors_overlap, partition_volume, refine
from modules.cli import Pipeline
from modules.config import Settings
from modules.exact_solver import GridSolver
from modules.functions import Cone, max_lipschitz
from modules.rank_core import rank_k
from modules.report import build_report, write_json
from modules.scenario import generate, loads
from modules.verifier import (
    FAIL, PASS, check_approx_guarantee, check_claim1, check_lipschitz_g0, check_obs2,
    check_obs3_sweep,
)
from fixtures.sample_data import ABOVE_ALL_SCENARIO, TWO_D_SCENARIO

pytestmark = [pytest.mark.integration, pytest.mark.slow]

TEMPLATES_1D = ("cones-1d", "quadratics-1d")
TEMPLATES_2D = ("cones-2d", "quadratics-2d", "mixed-2d")


def _solver(settings):
    """Default resolution: 4001 points per axis in 1-D, 201 in 2-D"""
    return GridSolver(settings=settings)


def _generated(count, templates, start=0):
    for seed in range(start, start + count):
        template = templates[seed % len(templates)]
        yield generate(seed, template)


class TestClaim1Acceptance:
    """Test the sandwich chain on generated scenarios"""

    def test_one_hundred_scenarios(self, settings):
        """Test every inequality of the chain on 100 seeds in one and two dimensions"""
        failures = []
        kinds = set()
        for scenario in _generated(100, TEMPLATES_1D + TEMPLATES_2D):
            ensemble, truth = scenario.build()
            kinds.update(d.kind for d in scenario.adversaries)
            records = check_claim1(ensemble, truth, solver=_solver(settings))
            failures += [(scenario.name, r.name) for r in records if r.status != PASS]
        assert failures == []
        assert kinds == {"above_all", "below_all", "gap", "explicit"}


class TestObs2Acceptance:
    """Test tightness on dominating adversaries"""

    def test_ten_above_and_ten_below(self, settings):
        """Test value and pointwise tightness on at least ten scenarios of each shape"""
        seen = {'above': 0, 'below': 0}
        seed = 0
        while min(seen.values()) < 10 and seed < 500:
            scenario = generate(seed, TEMPLATES_1D[seed % 2])
            seed += 1
            kind = scenario.adversaries[0].kind
            if kind not in ("above_all", "below_all"):
                continue
            shape = kind.split("_")[0]
            if seen[shape] >= 10:
                continue
            ensemble, truth = scenario.build()
            records = check_obs2(ensemble, truth, solver=_solver(settings))
            assert [r.status for r in records] == [PASS, PASS], scenario.name
            assert records[0].detail['shape'] == shape
            seen[shape] += 1
        assert seen == {'above': 10, 'below': 10}


class TestObs3Acceptance:
    """Test the indistinguishability construction"""

    def test_gap_grows_with_v(self, settings, line_domain):
        """Test identical outputs, the E2 gap and linear growth for V in {10, 100}"""
        tail = (Cone(center=(0.0,), offset=1.0), Cone(center=(1.0,), offset=1.0))
        records = check_obs3_sweep(tail, 1, [10.0, 100.0], line_domain, solver=GridSolver(2001, settings=settings))
        assert all(r.status == PASS for r in records)
        assert len(records) == 7

    def test_two_faults_two_dimensions(self, settings):
        """Test the construction with f = 2 and rank 2 on a square"""
        scenario = loads(TWO_D_SCENARIO)
        records = check_obs3_sweep(scenario.honest, 2, [10.0, 100.0], scenario.domain, r=2,
                                   solver=GridSolver(61, settings=settings))
        assert all(r.status == PASS for r in records)


class TestClaim2Acceptance:
    """Test the Lipschitz property of g_0"""

    def test_twenty_scenarios(self):
        """Test 10^4 pairs per scenario and the L/2 self-test"""
        for scenario in _generated(20, TEMPLATES_1D + TEMPLATES_2D):
            ensemble, truth = scenario.build()
            L = max_lipschitz(scenario.honest, scenario.domain)
            assert check_lipschitz_g0(ensemble, truth, L=L).status == PASS, scenario.name
        cones = loads(ABOVE_ALL_SCENARIO)
        ensemble, truth = cones.build()
        assert check_lipschitz_g0(ensemble, truth, L=0.5).status == FAIL


class TestApproximationAcceptance:
    """Test the partition algorithm's guarantee"""

    @pytest.mark.parametrize("epsilon", [0.1, 0.25, 0.5])
    def test_twenty_scenarios(self, epsilon, settings):
        """Test termination by criterion and the value bound"""
        for scenario in _generated(20, ("cones-1d", "quadratics-1d", "cones-2d")):
            ensemble, truth = scenario.build()
            L = max_lipschitz(scenario.honest, scenario.domain)
            approx = refine(ensemble, ApproxConfig(epsilon=epsilon, lipschitz=L), settings=settings)
            assert approx.terminated_by == TERMINATED_BY_CRITERION, scenario.name
            solver = GridSolver(2001 if scenario.domain.dimension == 1 else 101, settings=settings)
            records = check_approx_guarantee(ensemble, truth, approx, solver=solver)
            assert all(r.status == PASS for r in records), scenario.name

    def test_cells_tile_every_round(self, settings):
        """Test volume and overlap after every round on 2-D scenarios"""
        for scenario in _generated(5, ("cones-2d",)):
            ensemble, _ = scenario.build()
            domain = scenario.domain

            def check(round_number, cells):
                assert partition_volume(cells) == pytest.approx(domain.volume, rel=1e-9)
                if len(cells) <= 200:
                    assert not any(interiors_overlap(a, b) for i, a in enumerate(cells) for b in cells[i + 1:])

            L = max_lipschitz(scenario.honest, domain)
            refine(ensemble, ApproxConfig(epsilon=0.5, lipschitz=L), settings=settings, on_round=check)


class TestOracleEquivalence:
    """Test the two minimizers against each other"""

    def test_fifty_scenarios(self, settings):
        """Test minimize_hf == minimize_rank_r over [n] at rank f+1, bit for bit"""
        for scenario in _generated(50, TEMPLATES_1D + TEMPLATES_2D):
            ensemble, _ = scenario.build()
            solver = _solver(settings)
            assert solver.minimize_hf(ensemble) == solver.minimize_rank_r(ensemble, None, ensemble.f + 1)

    def test_rank_against_sort(self):
        """Test rank_k on 10^4 random lists"""
        rng = np.random.default_rng(11)
        for _ in range(10_000):
            values = rng.normal(size=int(rng.integers(1, 16))).round(1)
            k = int(rng.integers(1, values.size + 1))
            assert rank_k(values, k) == sorted(values, reverse=True)[k - 1]


class TestDeterminism:
    """Test that outputs repeat byte for byte"""

    def test_reports_with_parallel_evaluation(self, temp_dir):
        """Test sequential and parallel pipelines writing the same report"""
        scenario = loads(TWO_D_SCENARIO)
        outputs = []
        for workers in (1, 4):
            settings = Settings(workers=workers, chunk_size=512)
            pipeline = Pipeline(scenario, settings)
            solve = pipeline.exact()
            approx = pipeline.approx()
            verification = pipeline.verify(solve, approx)
            report = build_report(scenario.to_dict(), ("exact", "approx", "verify"), solve=solve, approx=approx,
                                  verification=verification, timestamp=False)
            path = write_json(Path(temp_dir) / f"workers{workers}.json", report)
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]
