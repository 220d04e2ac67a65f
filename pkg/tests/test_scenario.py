"""
Unit tests for the scenario module
"""
import pytest

from modules.errors import ContractViolation, ScenarioError
from modules.functions import Cone, EnvelopePlus
from modules.scenario import TEMPLATES, AdversaryDirective, _Mapping, dump, generate, load, loads, save
from fixtures.sample_data import (
    ABOVE_ALL_SCENARIO, BROKEN_YAML, GAP_SCENARIO, THREE_CONES_SCENARIO, TOO_MANY_FAULTS_SCENARIO,
    UNKNOWN_ADVERSARY_LINE, UNKNOWN_ADVERSARY_SCENARIO,
)


class TestLoad:
    """Test cases for reading scenario files"""

    def test_above_all_fields(self):
        """Test the parsed fields of the cone scenario"""
        scenario = loads(ABOVE_ALL_SCENARIO)
        assert scenario.name == "cones-above-all"
        assert scenario.n == 3 and scenario.f == 1
        assert scenario.nonnegative
        assert scenario.honest == (Cone(center=(0.0,)), Cone(center=(1.0,)))
        assert scenario.adversaries == (AdversaryDirective(kind="above_all", margin=1.0),)
        assert scenario.solver.resolution == 4001
        assert scenario.solver.epsilon == 0.1

    def test_default_faulty_positions_are_last(self):
        """Test that adversaries go after the honest functions"""
        assert loads(ABOVE_ALL_SCENARIO).faulty_indices == (3,)

    def test_load_from_file(self, scenario_file):
        """Test that the file path becomes the error source"""
        scenario = load(scenario_file)
        assert scenario.source == str(scenario_file)
        assert scenario.name == "cones-above-all"

    def test_missing_file(self, temp_dir):
        """Test that an unreadable file is a scenario error"""
        with pytest.raises(ScenarioError):
            load(f"{temp_dir}/missing.yaml")

    def test_indistinguishability_block(self):
        """Test the gap sweep parameters"""
        block = loads(GAP_SCENARIO).indistinguishability
        assert block.V == (10.0, 100.0)
        assert block.r == 1
        assert block.margin == 0.5


    def test_line_maps_not_shared(self):
        """Test that each parsed mapping keeps its own key lines"""
        first, second = _Mapping(), _Mapping()
        first.key_lines['f'] = 5
        assert second.key_lines == {}
        assert second.line is None
        assert loads(ABOVE_ALL_SCENARIO).lines['f'] == 6


class TestValidation:
    """Test cases for line-anchored scenario errors"""

    def test_too_many_faults_rejected_at_load(self):
        """Test that n=4, f=2 fails before any solver runs"""
        with pytest.raises(ScenarioError, match="2f\\+1") as exc_info:
            loads(TOO_MANY_FAULTS_SCENARIO, source="faults.yaml")
        assert exc_info.value.line == 3
        assert str(exc_info.value).startswith("faults.yaml:3:")

    def test_unknown_adversary_names_line(self):
        """Test that an unknown adversary kind points at its line"""
        with pytest.raises(ScenarioError, match="unknown kind") as exc_info:
            loads(UNKNOWN_ADVERSARY_SCENARIO)
        assert exc_info.value.line == UNKNOWN_ADVERSARY_LINE

    def test_broken_yaml_has_line(self):
        """Test that a syntax error carries a position"""
        with pytest.raises(ScenarioError, match="invalid YAML") as exc_info:
            loads(BROKEN_YAML)
        assert exc_info.value.line is not None

    def test_declared_n_must_match(self):
        """Test that n disagrees with the listed functions"""
        text = ABOVE_ALL_SCENARIO.replace("n: 3", "n: 5")
        with pytest.raises(ScenarioError, match="n=5") as exc_info:
            loads(text)
        assert exc_info.value.line == 5

    def test_missing_domain(self):
        """Test that domain is required"""
        with pytest.raises(ScenarioError, match="domain"):
            loads("f: 0\nhonest:\n  - {kind: cone, center: [0.0]}\n")

    def test_unknown_function_kind(self):
        """Test that an unknown honest family is rejected"""
        text = ABOVE_ALL_SCENARIO.replace("{kind: cone, center: [1.0]}", "{kind: sine, center: [1.0]}")
        with pytest.raises(ScenarioError, match="unknown function kind"):
            loads(text)

    def test_non_integer_f(self):
        """Test that f must be an integer"""
        with pytest.raises(ScenarioError, match="integer"):
            loads(ABOVE_ALL_SCENARIO.replace("f: 1", "f: 1.5"))

    def test_gap_needs_v(self):
        """Test that a gap adversary without V is rejected"""
        with pytest.raises(ScenarioError, match="V"):
            loads(GAP_SCENARIO.replace("{kind: gap, V: 10.0, margin: 0.5}", "{kind: gap, margin: 0.5}"))

    def test_indistinguishability_rank_too_large(self):
        """Test that r = f+1 is rejected at load, on the line of r"""
        with pytest.raises(ScenarioError, match="1 <= r < f\+1=2") as exc_info:
            loads(GAP_SCENARIO.replace("  r: 1", "  r: 2"), source="gap.yaml")
        assert exc_info.value.line == 14
        assert str(exc_info.value).startswith("gap.yaml:14:")

    def test_indistinguishability_without_faults(self):
        """Test that f = 0 admits no indistinguishability block"""
        text = GAP_SCENARIO.replace("f: 1", "f: 0")
        with pytest.raises(ScenarioError, match="f >= 1") as exc_info:
            loads(text)
        assert exc_info.value.line == 12

    def test_indistinguishability_gap_positive(self):
        """Test that a non-positive V is rejected"""
        with pytest.raises(ScenarioError, match="V must be") as exc_info:
            loads(GAP_SCENARIO.replace("V: [10.0, 100.0]", "V: [10.0, -1.0]"))
        assert exc_info.value.line == 13

    def test_top_level_must_be_mapping(self):
        """Test that a bare list is rejected"""
        with pytest.raises(ScenarioError, match="mapping"):
            loads("- 1\n- 2\n")


class TestBuild:
    """Test cases for expanding a scenario"""

    def test_above_all_build(self):
        """Test the expanded ensemble and labels"""
        ensemble, truth = loads(ABOVE_ALL_SCENARIO).build()
        assert ensemble.n == 3 and ensemble.f == 1
        assert isinstance(ensemble.specs[2], EnvelopePlus)
        assert truth.faulty_set == frozenset({3})
        assert truth.honest_indices == (1, 2)

    def test_explicit_faulty_position(self):
        """Test that faulty: [3] keeps the explicit cone at position 3"""
        ensemble, truth = loads(THREE_CONES_SCENARIO).build()
        assert ensemble.specs[2] == Cone(center=(-1.0,))
        assert truth.faulty_set == frozenset({3})

    def test_faulty_position_in_the_middle(self):
        """Test that honest specs fill the remaining positions in order"""
        text = THREE_CONES_SCENARIO.replace("faulty: [3]", "faulty: [1]")
        ensemble, truth = loads(text).build()
        assert ensemble.specs == (Cone(center=(-1.0,)), Cone(center=(0.0,)), Cone(center=(1.0,)))
        assert truth.honest_indices == (2, 3)

    def test_faulty_out_of_range(self):
        """Test that a faulty position beyond n is rejected"""
        scenario = loads(THREE_CONES_SCENARIO.replace("faulty: [3]", "faulty: [7]"))
        with pytest.raises(ScenarioError, match="within 1..3"):
            scenario.build()

    def test_nonnegative_flag_certified(self):
        """Test that a negative explicit adversary breaks the non-negative flag"""
        text = THREE_CONES_SCENARIO.replace("spec: {kind: cone, center: [-1.0]}",
                                            "spec: {kind: envelope_minus, delta: 1.0, base: "
                                            "[{kind: cone, center: [-1.0]}]}")
        scenario = loads(text.replace("f: 1", "f: 1\nnonnegative: true"))
        with pytest.raises(ScenarioError, match="non-negative"):
            scenario.build()

    def test_below_all_without_room(self):
        """Test that a floored below-all adversary under |x| fails with its position"""
        text = ABOVE_ALL_SCENARIO.replace("above_all", "below_all")
        with pytest.raises(ScenarioError, match="adversary at position 3"):
            loads(text).build()


class TestDumpAndGenerate:
    """Test cases for writing and generating scenarios"""

    def test_dump_then_load(self):
        """Test that a written scenario reads back equal"""
        scenario = loads(GAP_SCENARIO)
        assert loads(dump(scenario)) == scenario

    def test_save(self, temp_dir):
        """Test writing a scenario file"""
        path = save(loads(THREE_CONES_SCENARIO), f"{temp_dir}/nested/three.yaml")
        assert load(path) == loads(THREE_CONES_SCENARIO)

    def test_same_seed_same_file(self):
        """Test byte-identical output for a repeated seed"""
        assert dump(generate(42, "cones-2d")) == dump(generate(42, "cones-2d"))

    def test_different_seeds_differ(self):
        """Test that the seed matters"""
        assert dump(generate(1, "cones-1d")) != dump(generate(2, "cones-1d"))

    def test_generated_scenario_reads_back(self):
        """Test that a generated file parses to the same scenario"""
        scenario = generate(7, "mixed-2d")
        assert loads(dump(scenario)) == scenario

    @pytest.mark.parametrize("template", sorted(TEMPLATES))
    def test_generated_scenarios_build(self, template):
        """Test that 100 seeds per template satisfy n >= 2f+1 and build"""
        for seed in range(100):
            scenario = generate(seed, template)
            assert scenario.n >= 2 * scenario.f + 1
            ensemble, truth = scenario.build()
            assert ensemble.nonnegative
            assert len(truth.faulty_set) == scenario.f

    def test_unknown_template(self):
        """Test that an unknown template raises"""
        with pytest.raises(ContractViolation):
            generate(0, "spheres-3d")
