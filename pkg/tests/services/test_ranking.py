import numpy as np
import pytest

from scardo.errors import ValidationFailure
from scardo.services.attribute_space import build_space
from scardo.services.ranking import (
    build_additive_penalty_ranking,
    build_threshold_ranking,
    uniform_ranking,
    validate_ranking,
)
from tests.conftest import EXAMPLE_RANKING


class TestValidateRanking:
    def test_all_ones(self, example_space):
        """The all-ones matrix disables the ranking gate."""
        ranking = validate_ranking(example_space, np.ones((4, 4)))
        np.testing.assert_array_equal(ranking.entries, uniform_ranking(example_space).entries)

    def test_example_matrix(self, example_ranking):
        """The shared-attribute matrix is valid and keeps its entries."""
        assert example_ranking.probability(1, 4) == 0.4
        assert example_ranking.probability(1, 2) == 0.8
        assert example_ranking.is_symmetric()
        assert example_ranking.is_antidiagonal_symmetric()

    def test_entry_above_one(self, example_space):
        """Entries above 1 are rejected with their position."""
        raw = np.ones((4, 4))
        raw[2, 0] = 1.2
        with pytest.raises(ValidationFailure, match=r"\(s=3, l=1\) = 1\.2"):
            validate_ranking(example_space, raw)

    def test_dimension_mismatch(self, example_space):
        with pytest.raises(ValidationFailure, match="expected \\(4, 4\\)"):
            validate_ranking(example_space, np.ones((3, 3)))

    def test_asymmetric_allowed(self, example_space):
        """F need not be symmetric."""
        raw = np.ones((4, 4))
        raw[0, 1] = 0.1
        assert not validate_ranking(example_space, raw).is_symmetric()


class TestThresholdRanking:
    def test_wide_threshold_is_all_ones(self):
        """Nothing is too distant when the threshold spans every opinion."""
        space = build_space([4, 2])
        ranking = build_threshold_ranking(space, 3, 0.9)
        np.testing.assert_array_equal(ranking.entries, np.ones((8, 8)))

    def test_hard_bounded_confidence(self):
        """delta = 1 and threshold 0 keep only same-opinion pairs."""
        space = build_space([3])
        np.testing.assert_array_equal(
            build_threshold_ranking(space, 0, 1.0).entries, np.eye(3)
        )

    def test_example_cross_opinion_pairs(self, example_space):
        """Cross-opinion cortege pairs get exactly 1 - delta."""
        entries = build_threshold_ranking(example_space, 0, 0.3).entries
        cross = {(0, 2), (0, 3), (1, 2), (1, 3)}
        cross |= {(l, s) for s, l in cross}  # noqa: E741
        for s in range(4):
            for l in range(4):  # noqa: E741
                assert entries[s, l] == (0.7 if (s, l) in cross else 1.0)

    def test_zero_delta(self):
        """delta = 0 never blocks."""
        space = build_space([5, 3])
        np.testing.assert_array_equal(
            build_threshold_ranking(space, 0, 0.0).entries, np.ones((15, 15))
        )

    def test_delta_out_of_range(self, example_space):
        with pytest.raises(ValidationFailure, match="outside \\[0, 1\\]"):
            build_threshold_ranking(example_space, 0, 1.5)


class TestAdditivePenaltyRanking:
    def test_reproduces_example_matrix(self, example_space):
        """Penalties 0.4 for opinion and 0.2 for age give the shared-attribute matrix."""
        ranking = build_additive_penalty_ranking(example_space, [0.4, 0.2])
        np.testing.assert_allclose(ranking.entries, EXAMPLE_RANKING, atol=1e-15)
        np.testing.assert_array_equal(np.diag(ranking.entries), np.ones(4))

    def test_zero_penalties(self):
        space = build_space([2, 3, 2])
        ranking = build_additive_penalty_ranking(space, [0, 0, 0])
        np.testing.assert_array_equal(ranking.entries, np.ones((12, 12)))

    def test_clamped_at_zero(self):
        """Fully distinct pairs with penalties above 1 are clamped."""
        space = build_space([2, 2])
        ranking = build_additive_penalty_ranking(space, [0.7, 0.6])
        assert ranking.probability(1, 4) == 0.0
        assert ranking.probability(1, 3) == pytest.approx(0.3)

    def test_symmetry(self):
        """The additive matrix is symmetric with a unit diagonal."""
        space = build_space([3, 2, 2])
        ranking = build_additive_penalty_ranking(space, [0.3, 0.1, 0.25])
        assert ranking.is_symmetric()
        np.testing.assert_array_equal(np.diag(ranking.entries), np.ones(12))

    def test_antidiagonal_symmetry(self, example_space):
        """On the two-opinion space the matrix mirrors across the secondary diagonal."""
        ranking = build_additive_penalty_ranking(example_space, [0.4, 0.2])
        assert ranking.is_antidiagonal_symmetric()

    def test_negative_penalty(self, example_space):
        with pytest.raises(ValidationFailure, match="attribute 2 is negative"):
            build_additive_penalty_ranking(example_space, [0.1, -0.2])

    def test_wrong_length(self, example_space):
        with pytest.raises(ValidationFailure, match="for 2 attributes"):
            build_additive_penalty_ranking(example_space, [0.1])
