import math
from fractions import Fraction
from random import Random

import pytest

from pbstages.core import Caps, ResourceLimitError, ValidationError
from pbstages.oracles import equal_representation_oracle, k_median_oracle
from pbstages.preferences import ideal_set
from pbstages.shortlisting import (
    Metric,
    equal_representation,
    euclidean_metric,
    geometric_median,
    k_median,
    k_median_outcome,
    minimal_ell,
    nomination,
    representation_score,
    table_metric,
)
from pbstages.suites import random_instance, random_proposals

from conftest import fs, make_instance, ranking_from, unit_instance


def example_proposals(instance):
    prefixes = ([1, 4, 5, 10], [1, 2, 6, 4], [1, 2, 7, 4], [1, 3, 8, 5], [1, 3, 9, 5])
    awareness = (fs(1, 4, 5, 10), fs(2, 6), fs(2, 7), fs(3, 8), fs(3, 9))
    return tuple(
        ideal_set(instance, ranking_from(prefix, 10), aware)
        for prefix, aware in zip(prefixes, awareness)
    )


class TestNomination:
    def test_union_of_proposals(self, ten_project_instance):
        proposals = example_proposals(ten_project_instance)
        assert nomination(ten_project_instance, proposals) == fs(*range(1, 10))

    def test_all_empty(self, ten_project_instance):
        assert nomination(ten_project_instance, (fs(), fs())) == fs()

    def test_deduplicates(self, ten_project_instance):
        assert nomination(ten_project_instance, (fs(1), fs(1))) == fs(1)


class TestRepresentationScore:
    def test_empty_set_scores_agent_count(self):
        proposals = (fs(1), fs(2), fs(1, 2), fs(2), fs(1))
        assert representation_score(fs(), proposals) == Fraction(5)

    def test_tie_between_recorded_and_computed(self):
        proposals = (fs(3, 4), fs(1, 2), fs(2))
        assert representation_score(fs(2), proposals) == Fraction(11, 3)
        assert representation_score(fs(1, 3), proposals) == Fraction(11, 3)

    def test_requires_subset_of_union(self):
        with pytest.raises(ValidationError):
            representation_score(fs(9), (fs(1),))

    def test_exact_arithmetic(self):
        proposals = tuple(fs(1, 2, 3) for _ in range(7))
        got = representation_score(fs(1, 2, 3), proposals)
        assert got == 7 * (1 + Fraction(1, 7) + Fraction(1, 49) + Fraction(1, 343))


class TestEqualRepresentation:
    def test_example_with_doubled_budget(self, ten_project_instance):
        proposals = example_proposals(ten_project_instance)
        got = equal_representation(ten_project_instance, proposals, 2)
        assert got == fs(1, 2, 3, 4, 6, 7)

    def test_single_agent_single_project(self):
        instance = unit_instance(3, 1)
        assert equal_representation(instance, (fs(2),), 1) == fs(2)

    def test_tie_resolved_by_family_tiebreak(self):
        instance = make_instance([1, 2, 1, 1], 2)
        proposals = (fs(3, 4), fs(1, 2), fs(2))
        got = equal_representation(instance, proposals, 1)
        assert got == equal_representation_oracle(instance, proposals, 1)
        assert got == fs(1, 3)

    def test_k_must_be_positive(self, ten_project_instance):
        with pytest.raises(ValidationError):
            equal_representation(ten_project_instance, (fs(1),), 0)

    def test_cap_enforced(self, ten_project_instance):
        with pytest.raises(ResourceLimitError):
            equal_representation(
                ten_project_instance, (fs(*range(1, 10)),), 1, Caps(subset_search=5)
            )

    def test_matches_oracle_on_random_instances(self):
        rng = Random(11)
        for _ in range(120):
            instance = random_instance(rng, max_projects=6, max_cost=4)
            proposals = random_proposals(rng, instance, rng.randint(1, 4))
            k = rng.randint(1, 2)
            assert equal_representation(instance, proposals, k) == (
                equal_representation_oracle(instance, proposals, k)
            )


class TestMetric:
    def test_euclidean_from_coords(self, triangle_coords):
        instance = make_instance([1] * 7, 3, [triangle_coords[i] for i in range(1, 8)])
        metric = euclidean_metric(instance)
        assert metric.distance(1, 2) == pytest.approx(2.0)
        assert metric.distance(5, 6) == pytest.approx(1.0)
        assert metric.distance(1, 4) == metric.distance(2, 4)

    def test_table_metric_roundtrip(self):
        metric = table_metric([1, 2, 3], [(1, 2, 1.0), (1, 3, 2.0), (2, 3, 1.5)])
        assert metric.distance(2, 1) == 1.0
        assert metric.distance(1, 1) == 0.0

    def test_asymmetric_table_rejected(self):
        with pytest.raises(ValidationError):
            table_metric([1, 2], [(1, 2, 1.0), (2, 1, 2.0)])

    def test_triangle_violation_rejected(self):
        with pytest.raises(ValidationError):
            table_metric([1, 2, 3], [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 9.0)])

    def test_negative_distance_rejected(self):
        with pytest.raises(ValidationError):
            table_metric([1, 2], [(1, 2, -1.0)])

    def test_missing_pair_rejected(self):
        with pytest.raises(ValidationError):
            table_metric([1, 2, 3], [(1, 2, 1.0)])

    def test_colocated_projects_allowed(self):
        metric = table_metric([1, 2], [(1, 2, 0.0)])
        assert metric.distance(1, 2) == 0.0


class TestGeometricMedian:
    def test_triangle_with_perimeter_point(self, triangle_coords):
        instance = make_instance([1] * 7, 3, [triangle_coords[i] for i in range(1, 8)])
        metric = euclidean_metric(instance)
        assert geometric_median(fs(5, 6, 7), metric) == 5

    def test_tie_breaks_to_lowest_index(self, triangle_coords):
        instance = make_instance([1] * 7, 3, [triangle_coords[i] for i in range(1, 8)])
        metric = euclidean_metric(instance)
        assert geometric_median(fs(2, 4), metric) == 2

    def test_singleton(self):
        metric = table_metric([3], [])
        assert geometric_median(fs(3), metric) == 3

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            geometric_median(fs(), table_metric([1], []))


class TestMinimalRadius:
    def test_single_project(self):
        instance = unit_instance(1, 1)
        metric = table_metric([1], [])
        assert minimal_ell(instance, fs(1), 1, metric) == 0.0

    def test_colocated_projects(self):
        instance = unit_instance(3, 1)
        metric = table_metric([1, 2, 3], [(1, 2, 0.0), (1, 3, 0.0), (2, 3, 0.0)])
        assert minimal_ell(instance, fs(1, 2, 3), 1, metric) == 0.0

    def test_triangle_scenario(self, triangle_coords):
        instance = make_instance([1] * 7, 3, [triangle_coords[i] for i in range(1, 8)])
        metric = euclidean_metric(instance)
        got = minimal_ell(instance, fs(1, 2, 3, 4, 6, 7), 1, metric)
        assert got == pytest.approx(2 / math.sqrt(3.0))

    def test_cap_enforced(self):
        instance = unit_instance(4, 1)
        metric = table_metric(
            [1, 2, 3, 4],
            [(a, b, 1.0) for a in range(1, 5) for b in range(a + 1, 5)],
        )
        with pytest.raises(ResourceLimitError):
            minimal_ell(instance, instance.ids, 1, metric, Caps(partitions=3))


class TestPartitionEnumerators:
    # both partition generators are load-bearing for the oracle equivalence
    # tests, so pin their counts to the known partition numbers
    BELL = {1: 1, 2: 2, 3: 5, 4: 15, 5: 52, 6: 203}

    def test_pruned_recursive_counts(self):
        from pbstages.shortlisting import _set_partitions

        for n, expected in self.BELL.items():
            assert sum(1 for _ in _set_partitions(list(range(n)))) == expected

    def test_flat_oracle_counts(self):
        from pbstages.oracles import _flat_partitions

        for n, expected in self.BELL.items():
            got = list(_flat_partitions(list(range(1, n + 1))))
            assert len(got) == expected
            seen = {tuple(sorted(tuple(sorted(b)) for b in part)) for part in got}
            assert len(seen) == expected
            for part in got:
                assert sorted(x for block in part for x in block) == list(range(1, n + 1))


class TestKMedian:
    def test_truthful_clustering(self, triangle_coords):
        instance = make_instance([1] * 7, 3, [triangle_coords[i] for i in range(1, 8)])
        metric = euclidean_metric(instance)
        proposals = (fs(1, 2, 3), fs(4, 6, 7))
        outcome = k_median_outcome(instance, proposals, 1, metric)
        assert outcome.shortlist == fs(4, 6, 7)
        assert len(outcome.partitions) == 1
        assert set(outcome.partitions[0].clusters) == {fs(1, 2, 3, 4), fs(6), fs(7)}

    def test_deviating_clustering(self, triangle_coords):
        instance = make_instance([1] * 7, 3, [triangle_coords[i] for i in range(1, 8)])
        metric = euclidean_metric(instance)
        proposals = (fs(1, 2, 5), fs(4, 6, 7))
        assert k_median(instance, proposals, 1, metric) == fs(1, 2, 5)

    def test_single_proposed_project(self):
        instance = unit_instance(5, 2)
        metric = table_metric(
            [1, 2, 3, 4, 5],
            [(a, b, 1.0) for a in range(1, 6) for b in range(a + 1, 6)],
        )
        assert k_median(instance, (fs(4),), 1, metric) == fs(4)

    def test_empty_profile(self):
        instance = unit_instance(2, 1)
        metric = table_metric([1, 2], [(1, 2, 1.0)])
        assert k_median(instance, (fs(), fs()), 1, metric) == fs()

    def test_partition_invariants_hold(self, triangle_coords):
        instance = make_instance([1] * 7, 3, [triangle_coords[i] for i in range(1, 8)])
        metric = euclidean_metric(instance)
        outcome = k_median_outcome(instance, (fs(1, 2, 5), fs(4, 6, 7)), 1, metric)
        for partition in outcome.partitions:
            assert partition.is_valid(instance, 1, outcome.ell, metric)
            recomputed = tuple(geometric_median(c, metric) for c in partition.clusters)
            assert recomputed == partition.medians

    def test_matches_oracle_on_random_coordinate_instances(self):
        rng = Random(23)
        for _ in range(60):
            instance = random_instance(rng, max_projects=6, max_cost=3, coord_range=6)
            proposals = random_proposals(rng, instance, rng.randint(1, 3))
            metric = euclidean_metric(instance)
            k = rng.randint(1, 2)
            assert k_median(instance, proposals, k, metric) == (
                k_median_oracle(instance, proposals, k, metric)
            )
