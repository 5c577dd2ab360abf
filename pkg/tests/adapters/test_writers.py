import numpy as np
import pytest

from scardo.adapters import get_writer, read_trajectory, write_trajectory
from scardo.adapters.graph import load_edge_list
from scardo.adapters.report import ReportJsonWriter
from scardo.errors import ValidationFailure
from scardo.models.report import ConfigSummary
from scardo.services import meanfield, simulator


@pytest.fixture
def sim_trajectory(example_space, adoption_tensor, example_ranking):
    population = simulator.build_population(example_space, counts=[8, 2, 2, 8])
    return simulator.run(
        example_space, adoption_tensor, example_ranking, population, 60, 20, seed=3
    )


class TestTrajectoryCsv:
    def test_sim_header(self, sim_trajectory, tmp_path):
        """t, tau, then counts, fractions and opinion fractions."""
        path = write_trajectory(sim_trajectory, tmp_path / "run.csv")
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "t,tau,Y_1,Y_2,Y_3,Y_4,y_1,y_2,y_3,y_4,yo_1,yo_2"

    def test_sim_round_trip(self, sim_trajectory, tmp_path):
        """Reading the file back gives the stored doubles exactly."""
        table = read_trajectory(write_trajectory(sim_trajectory, tmp_path / "run.csv"))
        assert table.values.shape == (4, 12)
        np.testing.assert_array_equal(table.column("t"), [0, 20, 40, 60])
        np.testing.assert_array_equal(table.values[:, 2:6], sim_trajectory.counts)
        np.testing.assert_array_equal(table.values[:, 6:10], sim_trajectory.fractions())
        np.testing.assert_array_equal(
            table.values[:, 10:], sim_trajectory.opinion_fractions()
        )

    def test_integer_columns(self, sim_trajectory, tmp_path):
        path = write_trajectory(sim_trajectory, tmp_path / "run.csv")
        first = path.read_text(encoding="utf-8").splitlines()[1].split(",")
        assert first[:6] == ["0", "0", "8", "2", "2", "8"]

    def test_zero_iterations(self, example_space, adoption_tensor, example_ranking, tmp_path):
        """A run without iterations still writes its initial sample."""
        population = simulator.build_population(example_space, counts=[1, 1, 1, 1])
        trajectory = simulator.run(
            example_space, adoption_tensor, example_ranking, population, 0, 1, seed=0
        )
        path = write_trajectory(trajectory, tmp_path / "empty.csv")
        assert len(path.read_text(encoding="utf-8").splitlines()) == 2
        assert read_trajectory(path).values.shape == (1, 12)

    def test_meanfield_layout(self, example_space, adoption_tensor, example_ranking, tmp_path):
        solution = meanfield.integrate(
            np.array([0.4, 0.1, 0.1, 0.4]),
            adoption_tensor,
            example_ranking,
            1.0,
            0.05,
            sample_interval=0.25,
        )
        table = read_trajectory(write_trajectory(solution, tmp_path / "mf" / "ode.csv"))
        assert table.columns == ["tau", "y_1", "y_2", "y_3", "y_4", "yo_1", "yo_2"]
        np.testing.assert_array_equal(table.column("tau"), solution.taus)
        np.testing.assert_array_equal(table.values[:, 1:5], solution.states)

    def test_only_csv_for_trajectories(self, sim_trajectory, tmp_path):
        with pytest.raises(ValidationFailure, match="only be written as csv"):
            write_trajectory(sim_trajectory, tmp_path / "run.json", format="json")

    def test_mismatched_columns(self, tmp_path):
        path = tmp_path / "broken.csv"
        path.write_text("tau,y_1\n0.0,1.0,2.0\n", encoding="utf-8")
        with pytest.raises(ValidationFailure, match="3 value columns but 2 headers"):
            read_trajectory(path)


class TestReportJson:
    def test_round_trip(self, tmp_path):
        summary = ConfigSummary(
            cardinalities=[2, 2],
            corteges=4,
            agents=10,
            iterations=100,
            horizon=10.0,
            seed=1,
            replicas=2,
            tensor_storage="dense",
            config_digest="abc",
        )
        path = ReportJsonWriter().write(summary, tmp_path / "summary.json")
        assert ReportJsonWriter(ConfigSummary).read(path) == summary

    def test_unknown_format(self):
        with pytest.raises(ValidationFailure, match="Unknown output format: parquet"):
            get_writer("parquet")


class TestEdgeList:
    def test_self_loops_and_isolation(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("1 3\n3 3\n", encoding="utf-8")
        graph = load_edge_list(path, 4)
        assert graph.neighbors == ((2,), (), (0,), ())
        assert graph.isolated() == [1, 3]

    def test_agent_out_of_range(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("1 5\n", encoding="utf-8")
        with pytest.raises(ValidationFailure, match="agent id 5 is outside 1..4"):
            load_edge_list(path, 4)

    def test_malformed(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("1 x\n", encoding="utf-8")
        with pytest.raises(ValidationFailure, match="malformed"):
            load_edge_list(path, 4)
