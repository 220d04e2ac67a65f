"""
Unit tests for the exact_solver module
"""
import pytest
import numpy as np

from modules.config import Settings
from modules.errors import BudgetExceededError, ContractViolation
from modules.exact_solver import Grid, GridSolver, iter_grid_values, minimize_hf, minimize_rank_r
from modules.functions import BlackBox, Cone
from modules.rank_core import Ensemble, Hypercube, rank_rows
from modules.scenario import generate
from fixtures.sample_data import ANCHORS


class TestGrid:
    """Test cases for the tensor grid"""

    def test_counts_from_scalar_resolution(self):
        """Test that a scalar resolution applies to every axis"""
        grid = Grid.from_resolution(Hypercube(lower=(0.0, 0.0), upper=(1.0, 2.0)), 5)
        assert grid.counts == (5, 5)
        assert grid.size == 25
        assert grid.steps == (0.25, 0.5)

    def test_default_resolution_by_dimension(self, settings):
        """Test the per-dimension defaults"""
        assert Grid.from_resolution(Hypercube(lower=(0.0,), upper=(1.0,)), None, settings).counts == (4001,)
        square = Hypercube(lower=(0.0, 0.0), upper=(1.0, 1.0))
        assert Grid.from_resolution(square, None, settings).counts == (201, 201)

    def test_c_order_enumeration(self):
        """Test that the last axis varies fastest"""
        grid = Grid.from_resolution(Hypercube(lower=(0.0, 0.0), upper=(1.0, 1.0)), 2)
        assert grid.points(0, 4).tolist() == [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
        assert grid.multi_index(2) == (1, 0)

    def test_too_few_points_rejected(self):
        """Test that one point per axis is invalid"""
        with pytest.raises(ContractViolation):
            Grid.from_resolution(Hypercube(lower=(0.0,), upper=(1.0,)), 1)

    def test_half_cell_diameter(self):
        """Test half the cell diagonal"""
        grid = Grid.from_resolution(Hypercube(lower=(0.0, 0.0), upper=(3.0, 4.0)), 2)
        assert grid.half_cell_diameter == pytest.approx(2.5)


class TestMinimizeHf:
    """Test cases for the grid minimizer of h_f"""

    def test_three_cones_lexicographic_tie(self, three_cones, solver):
        """Test that the tie between -0.5 and 0.5 goes to -0.5"""
        result = solver.minimize_hf(three_cones)
        assert result.x_hat == pytest.approx((ANCHORS['three_cones_x_hat'],), abs=1e-12)
        assert result.v_hat == pytest.approx(ANCHORS['three_cones_v_hat'], abs=result.certificate.error_bound)
        assert result.rank == 2
        assert result.certificate.error_bound == pytest.approx(0.0005)

    def test_single_cone_with_no_faults(self, line_domain):
        """Test that f = 0 with one cone finds its center"""
        ensemble = Ensemble(specs=(Cone(center=(0.3,)),), f=0, domain=line_domain)
        result = minimize_hf(ensemble, resolution=4001)
        assert result.x_hat[0] == pytest.approx(0.3, abs=1e-3)
        assert result.v_hat == pytest.approx(0.0, abs=1e-3)

    def test_above_all_upper_tightness(self, above_all_ensemble, solver):
        """Test that v_hat equals min max(|x|, |x-1|)"""
        result = solver.minimize_hf(above_all_ensemble)
        assert result.v_hat == pytest.approx(ANCHORS['above_all_v_hat'], abs=1e-9)
        assert result.x_hat[0] == pytest.approx(ANCHORS['above_all_x_hat'], abs=1e-9)

    def test_matches_rank_r_over_all(self, three_cones, solver):
        """Test bit-exact agreement with rank_{f+1} over [n]"""
        direct = solver.minimize_hf(three_cones)
        general = solver.minimize_rank_r(three_cones, None, three_cones.f + 1)
        assert direct == general

    def test_matches_brute_force(self, settings):
        """Test a 2-D solve against an explicit grid evaluation"""
        domain = Hypercube(lower=(-1.0, -1.0), upper=(1.0, 1.0))
        specs = (Cone(center=(0.2, 0.1)), Cone(center=(-0.4, 0.5)), Cone(center=(0.6, -0.3), slope=2.0))
        ensemble = Ensemble(specs=specs, f=1, domain=domain)
        solver = GridSolver(resolution=41, chunk_size=97, settings=settings)
        result = solver.minimize_hf(ensemble)
        grid = solver.grid_for(domain)
        points = grid.points(0, grid.size)
        values = rank_rows(np.stack([s.values(points) for s in specs], axis=1), 2)
        assert result.v_hat == values.min()
        assert result.x_hat == tuple(points[int(np.argmin(values))])

    def test_parallel_scan_matches_sequential(self, three_cones, settings):
        """Test that workers do not change the result"""
        sequential = GridSolver(resolution=4001, chunk_size=128, workers=1, settings=settings)
        parallel = GridSolver(resolution=4001, chunk_size=128, workers=4, settings=settings)
        assert sequential.minimize_hf(three_cones) == parallel.minimize_hf(three_cones)

    def test_budget_exceeded(self, three_cones, settings):
        """Test that a grid larger than the budget raises"""
        solver = GridSolver(resolution=4001, budget=1000, settings=settings)
        with pytest.raises(BudgetExceededError) as exc_info:
            solver.minimize_hf(three_cones)
        assert exc_info.value.required == 4001

    def test_boundary_minimizer_flagged(self, line_domain, mocker):
        """Test that a minimizer on the edge of X is flagged and logged"""
        ensemble = Ensemble(specs=(Cone(center=(5.0,)),), f=0, domain=line_domain)
        warning = mocker.patch('modules.exact_solver.logger.warning')
        result = minimize_hf(ensemble, resolution=101)
        assert result.on_boundary
        assert result.x_hat == (2.0,)
        warning.assert_called_once()

    def test_black_box_uncertified(self, line_domain):
        """Test that an undeclared Lipschitz constant leaves the result uncertified"""
        box = BlackBox(func=lambda p: abs(p[0] - 0.25) + 3.0, dimension=1)
        ensemble = Ensemble(specs=(Cone(center=(0.0,)), Cone(center=(1.0,)), box), f=1, domain=line_domain)
        result = minimize_hf(ensemble, resolution=401)
        assert not result.certificate.certified
        assert result.to_dict()['certificate']['error_bound'] == "uncertified"


class TestMinimizeRankR:
    """Test cases for rank_r over an index subset"""

    def test_honest_maximum(self, three_cones, solver):
        """Test min over x of max(|x|, |x-1|)"""
        result = solver.minimize_rank_r(three_cones, [1, 2], 1)
        assert result.v_hat == pytest.approx(0.5, abs=1e-9)
        assert result.x_hat[0] == pytest.approx(0.5, abs=1e-9)

    def test_honest_second_largest_tie(self, three_cones, solver):
        """Test that min(|x|, |x-1|) = 0 is found at x = 0 first"""
        result = solver.minimize_rank_r(three_cones, [1, 2], 2)
        assert result.v_hat == 0.0
        assert result.x_hat[0] == pytest.approx(0.0, abs=1e-12)
        assert result.subset == (1, 2)

    def test_rank_larger_than_subset(self, three_cones):
        """Test that r > |subset| is rejected"""
        with pytest.raises(ContractViolation):
            minimize_rank_r(three_cones, [1, 2], 3, resolution=11)

    def test_custom_settings(self, three_cones):
        """Test that resolution defaults come from the settings"""
        solver = GridSolver(settings=Settings(resolution_1d=11))
        assert solver.minimize_hf(three_cones).evaluations == 11


class TestIterGridValues:
    """Test cases for chunked grid streaming"""

    def test_chunks_cover_grid_in_order(self, three_cones):
        """Test that chunks concatenate to the full grid"""
        grid = Grid.from_resolution(three_cones.domain, 25)
        starts, rows = [], 0
        for start, points, matrix in iter_grid_values(three_cones, grid, chunk_size=10):
            starts.append(start)
            assert matrix.shape == (points.shape[0], 3)
            rows += points.shape[0]
        assert starts == [0, 10, 20]
        assert rows == 25


class TestSolverInvariants:
    """Test cases for properties that hold on any ensemble"""

    @pytest.mark.parametrize("seed,template,resolution", [
        (0, "cones-1d", 2001), (1, "quadratics-1d", 2001), (2, "cones-2d", 61), (3, "mixed-2d", 61),
    ])
    def test_value_non_increasing_in_f(self, seed, template, resolution, settings):
        """Test that the minimum of rank_{f+1} never grows as f grows"""
        ensemble = generate(seed, template).build()[0]
        specs, domain = ensemble.specs, ensemble.domain
        solver = GridSolver(resolution=resolution, settings=settings)
        values = [solver.minimize_hf(Ensemble(specs=specs, f=f, domain=domain)).v_hat
                  for f in range((len(specs) - 1) // 2 + 1)]
        assert all(later <= earlier for earlier, later in zip(values, values[1:]))

    def test_value_non_increasing_in_f_cones(self, line_domain, solver):
        """Test seven cones with f from 0 to 3"""
        specs = tuple(Cone(center=(c,)) for c in (-1.5, -1.0, -0.25, 0.0, 0.5, 1.0, 1.75))
        values = [solver.minimize_hf(Ensemble(specs=specs, f=f, domain=line_domain)).v_hat for f in range(4)]
        assert values == sorted(values, reverse=True)
        assert values[-1] < values[0]

    @pytest.mark.parametrize("seed,template,coarse", [
        (4, "cones-1d", 101), (5, "quadratics-1d", 401), (6, "cones-1d", 1001), (7, "cones-2d", 31),
        (8, "quadratics-2d", 31),
    ])
    def test_certificate_sound_under_refinement(self, seed, template, coarse, settings):
        """Test that doubling the grid moves v_hat by at most the coarse error bound"""
        ensemble = generate(seed, template).build()[0]
        rough = GridSolver(resolution=coarse, settings=settings).minimize_hf(ensemble)
        fine = GridSolver(resolution=2 * coarse, settings=settings).minimize_hf(ensemble)
        assert rough.certificate.certified
        assert fine.certificate.error_bound < rough.certificate.error_bound
        assert abs(fine.v_hat - rough.v_hat) <= rough.certificate.error_bound + 1e-9
