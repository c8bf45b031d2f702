"""Shortlisting rules: nomination, equal representation, and clustering.

All rules map a proposal profile (one project set per agent) to a subset of
the union of proposals.  The budget is a soft constraint at this stage: the
optimisation-based rules may spend up to ``k`` times the budget.

Scores for the equal-representation family are exact rationals; clustering
rules enumerate set partitions exactly and fail loudly beyond their cap
rather than approximating.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

from pbstages.core import (
    Caps,
    Instance,
    NoPartitionError,
    ResourceLimitError,
    ValidationError,
    tiebreak_family,
    tiebreak_project,
)

# Slack used only when validating float metrics and pre-filtering cluster
# candidates; rule decisions always compare stored distances directly.
_METRIC_TOLERANCE = 1e-9


def proposal_union(proposals: Sequence[Iterable[int]]) -> frozenset[int]:
    union: set[int] = set()
    for block in proposals:
        union.update(block)
    return frozenset(union)


def check_proposals(
    instance: Instance, proposals: Sequence[Iterable[int]]
) -> tuple[frozenset[int], ...]:
    return tuple(
        instance.check_subset(block, f"proposal of agent {i + 1}")
        for i, block in enumerate(proposals)
    )


def nomination(instance: Instance, proposals: Sequence[Iterable[int]]) -> frozenset[int]:
    """Shortlist every proposed project: the union of all proposals."""
    return proposal_union(check_proposals(instance, proposals))


def representation_score(
    subset: Iterable[int], proposals: Sequence[Iterable[int]]
) -> Fraction:
    """Exact representation score of a candidate shortlist.

    Each agent contributes a geometric series in 1/n, one term per project
    the shortlist shares with her proposal (plus the constant leading term),
    so agents with fewer selected proposals always have the next-heaviest
    marginal weight.  Evaluated with exact rational arithmetic; equality of
    scores is decided exactly, never by epsilon.
    """
    subset = frozenset(subset)
    proposals = tuple(frozenset(block) for block in proposals)
    union = proposal_union(proposals)
    if not subset <= union:
        raise ValidationError("scored set must be drawn from the union of proposals")
    n = len(proposals)
    step = Fraction(1, n) if n else Fraction(0)
    total = Fraction(0)
    for block in proposals:
        hits = len(subset & block)
        total += sum((step**level for level in range(hits + 1)), Fraction(0))
    return total


def equal_representation(
    instance: Instance,
    proposals: Sequence[Iterable[int]],
    k: int,
    caps: Caps = Caps(),
) -> frozenset[int]:
    """Representation-score maximiser among affordable shortlists.

    Searches subsets of the proposal union costing at most ``k * budget``,
    maximising :func:`representation_score`; exact score ties are broken by
    canonical family tie-breaking.

    Uses branch and bound over projects in ascending index order.  The
    optimistic bound charges every remaining individually-affordable
    project its proposers' next marginal weight at the current counts,
    which can only overestimate the true gain, so no maximiser is pruned.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    proposals = check_proposals(instance, proposals)
    union = sorted(proposal_union(proposals))
    if not union:
        return frozenset()
    if len(union) > caps.subset_search:
        raise ResourceLimitError(
            f"equal-representation search over {len(union)} proposed projects "
            f"exceeds the cap of {caps.subset_search}"
        )
    limit = k * instance.budget
    n = len(proposals)
    step = Fraction(1, n)
    proposers = {pid: [i for i, block in enumerate(proposals) if pid in block] for pid in union}
    costs = {pid: instance.cost(pid) for pid in union}

    best_score = Fraction(-1)
    best_sets: list[frozenset[int]] = []
    counts = [0] * n
    chosen: list[int] = []

    def marginal(pid: int) -> Fraction:
        return sum((step ** (counts[i] + 1) for i in proposers[pid]), Fraction(0))

    def walk(pos: int, spent: int, score: Fraction) -> None:
        nonlocal best_score, best_sets
        bound = score
        for pid in union[pos:]:
            if spent + costs[pid] <= limit:
                bound += marginal(pid)
        if bound < best_score:
            return
        if pos == len(union):
            if score > best_score:
                best_score = score
                best_sets = [frozenset(chosen)]
            elif score == best_score:
                best_sets.append(frozenset(chosen))
            return
        pid = union[pos]
        if spent + costs[pid] <= limit:
            gain = marginal(pid)
            chosen.append(pid)
            for i in proposers[pid]:
                counts[i] += 1
            walk(pos + 1, spent + costs[pid], score + gain)
            for i in proposers[pid]:
                counts[i] -= 1
            chosen.pop()
        walk(pos + 1, spent, score)

    walk(0, 0, Fraction(n))
    return tiebreak_family(best_sets)


# ---------------------------------------------------------------------------
# Metrics and clustering rules


class Metric:
    """A validated distance function over a finite set of project ids.

    Distances are stored per unordered pair, so symmetry holds by
    construction and equal distances compare equal exactly.  Validation
    checks non-negativity and the triangle inequality (with a small float
    tolerance); distinct projects at distance zero are allowed, which
    covers co-located projects.
    """

    def __init__(self, ids: Iterable[int], pair_distances: dict[tuple[int, int], float]):
        self.ids = tuple(sorted(set(ids)))
        self._dist: dict[tuple[int, int], float] = {}
        for a, b in itertools.combinations(self.ids, 2):
            key = (a, b)
            if key not in pair_distances:
                raise ValidationError(f"metric is missing the distance for pair {key}")
            value = float(pair_distances[key])
            if value < 0:
                raise ValidationError(f"negative distance {value} for pair {key}")
            self._dist[key] = value
        self._validate_triangle()

    def _validate_triangle(self) -> None:
        for a, b, c in itertools.combinations(self.ids, 3):
            ab, bc, ac = self.distance(a, b), self.distance(b, c), self.distance(a, c)
            for direct, via in ((ac, ab + bc), (ab, ac + bc), (bc, ab + ac)):
                if direct > via + _METRIC_TOLERANCE:
                    raise ValidationError(
                        f"triangle inequality violated on projects {(a, b, c)}: "
                        f"{direct} > {via}"
                    )

    def distance(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        key = (a, b) if a < b else (b, a)
        try:
            return self._dist[key]
        except KeyError:
            raise ValidationError(f"metric does not cover the pair {key}") from None

    def pairwise(self, pids: Iterable[int]) -> list[float]:
        return [self.distance(a, b) for a, b in itertools.combinations(sorted(set(pids)), 2)]


def euclidean_metric(instance: Instance) -> Metric:
    """Euclidean distance over the projects' coordinates."""
    coords = {}
    for project in instance.projects:
        if project.coords is None:
            raise ValidationError(
                f"project p{project.index} has no coordinates; "
                "a euclidean metric needs coordinates on every project"
            )
        coords[project.index] = project.coords
    dims = {len(c) for c in coords.values()}
    if len(dims) > 1:
        raise ValidationError("projects have coordinates of mixed dimension")
    pairs = {
        (a, b): math.dist(coords[a], coords[b])
        for a, b in itertools.combinations(sorted(coords), 2)
    }
    return Metric(coords, pairs)


def table_metric(ids: Iterable[int], entries: Iterable[tuple[int, int, float]]) -> Metric:
    """Metric from an explicit distance table.

    Entries may list each pair once in either orientation; listing both
    orientations with different values is a symmetry violation.
    """
    pairs: dict[tuple[int, int], float] = {}
    for a, b, value in entries:
        if a == b:
            if float(value) != 0.0:
                raise ValidationError(f"distance of project {a} to itself must be 0")
            continue
        key = (a, b) if a < b else (b, a)
        if key in pairs and pairs[key] != float(value):
            raise ValidationError(
                f"asymmetric distance table: pair {key} listed as both "
                f"{pairs[key]} and {float(value)}"
            )
        pairs[key] = float(value)
    return Metric(ids, pairs)


def geometric_median(pids: Iterable[int], metric: Metric) -> int:
    """The project minimising the summed distance to the set, ties to lowest index."""
    pids = sorted(set(pids))
    if not pids:
        raise ValidationError("geometric median of an empty set is undefined")
    sums = {p: sum(metric.distance(p, q) for q in pids) for p in pids}
    best = min(sums.values())
    return tiebreak_project([p for p in pids if sums[p] == best])


@dataclass(frozen=True)
class VoronoiPartition:
    """A clustering together with its geometric medians.

    Valid (for a given ``k`` and radius ``ell``) when the medians cost at
    most ``k * budget`` in total, every project sits with its closest
    median, and every project is within ``ell`` of its own median.
    """

    clusters: tuple[frozenset[int], ...]
    medians: tuple[int, ...]

    @property
    def median_set(self) -> frozenset[int]:
        return frozenset(self.medians)

    def radius(self, metric: Metric) -> float:
        return max(
            (metric.distance(p, m) for cluster, m in zip(self.clusters, self.medians) for p in cluster),
            default=0.0,
        )

    def is_valid(self, instance: Instance, k: int, ell: float, metric: Metric) -> bool:
        if instance.total_cost(self.medians) > k * instance.budget:
            return False
        for cluster, median in zip(self.clusters, self.medians):
            for p in cluster:
                own = metric.distance(p, median)
                if own > ell:
                    return False
                if any(own > metric.distance(p, other) for other in self.medians):
                    return False
        return True


def _set_partitions(items: Sequence[int], compatible=None):
    """All set partitions of ``items``, in a deterministic order.

    ``compatible(block, item)`` may veto growing an existing block; new
    singleton blocks are always allowed, so vetoes only prune, never
    invent, partitions.
    """
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partial in _set_partitions(rest, compatible):
        for i, block in enumerate(partial):
            if compatible is None or compatible(block, first):
                yield partial[:i] + [[first, *block]] + partial[i + 1 :]
        yield [[first], *partial]


def _make_partition(blocks: Iterable[Iterable[int]], metric: Metric) -> VoronoiPartition:
    clusters = tuple(sorted((frozenset(b) for b in blocks), key=lambda c: min(c)))
    medians = tuple(geometric_median(c, metric) for c in clusters)
    return VoronoiPartition(clusters, medians)


def voronoi_partitions(
    instance: Instance,
    pids: Iterable[int],
    k: int,
    ell: float,
    metric: Metric,
    caps: Caps = Caps(),
) -> list[VoronoiPartition]:
    """All valid clusterings of ``pids`` for the given ``k`` and radius.

    Enumerates raw set partitions, so a project equidistant from two
    medians may appear in either cluster; both assignments are produced
    when both validate.  Blocks whose diameter already exceeds twice the
    radius are pruned during enumeration (the triangle inequality makes
    them hopeless).
    """
    pids = sorted(instance.check_subset(pids, "clustered set"))
    if len(pids) > caps.partitions:
        raise ResourceLimitError(
            f"partition enumeration over {len(pids)} projects exceeds "
            f"the cap of {caps.partitions}"
        )
    diameter_limit = 2 * ell + _METRIC_TOLERANCE

    def compatible(block: list[int], item: int) -> bool:
        return all(metric.distance(item, other) <= diameter_limit for other in block)

    found = []
    for blocks in _set_partitions(pids, compatible):
        partition = _make_partition(blocks, metric)
        if partition.is_valid(instance, k, ell, metric):
            found.append(partition)
    return found


def radius_candidates(pids: Iterable[int], metric: Metric) -> list[float]:
    """The radii at which clustering feasibility can change.

    Validity constraints compare the radius only against pairwise
    distances, and shrinking the radius only removes partitions, so the
    minimum feasible radius is always 0 or some pairwise distance.
    """
    return sorted({0.0, *metric.pairwise(pids)})


def minimal_ell(
    instance: Instance,
    pids: Iterable[int],
    k: int,
    metric: Metric,
    caps: Caps = Caps(),
) -> float:
    """Smallest radius admitting a valid clustering of ``pids``."""
    ell, _ = _minimal_partitions(instance, pids, k, metric, caps)
    return ell


def _minimal_partitions(
    instance: Instance,
    pids: Iterable[int],
    k: int,
    metric: Metric,
    caps: Caps,
) -> tuple[float, list[VoronoiPartition]]:
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    pids = sorted(instance.check_subset(pids, "clustered set"))
    if not pids:
        return 0.0, [VoronoiPartition((), ())]
    for ell in radius_candidates(pids, metric):
        partitions = voronoi_partitions(instance, pids, k, ell, metric, caps)
        if partitions:
            return ell, partitions
    raise NoPartitionError(
        f"no valid clustering of {len(pids)} projects within {k} budgets at any radius"
    )


@dataclass(frozen=True)
class ClusteringOutcome:
    """Full result of a clustering rule: radius, partitions, and shortlist."""

    ell: float
    partitions: tuple[VoronoiPartition, ...]
    shortlist: frozenset[int]


def k_median_outcome(
    instance: Instance,
    proposals: Sequence[Iterable[int]],
    k: int,
    metric: Metric,
    caps: Caps = Caps(),
) -> ClusteringOutcome:
    """The clustering shortlist with its minimal radius and valid partitions.

    Every valid partition at the minimal radius contributes its median set;
    the shortlist is the canonical tie-break over that family of median
    sets.
    """
    proposals = check_proposals(instance, proposals)
    union = proposal_union(proposals)
    if not union:
        return ClusteringOutcome(0.0, (), frozenset())
    ell, partitions = _minimal_partitions(instance, union, k, metric, caps)
    shortlist = tiebreak_family([p.median_set for p in partitions])
    return ClusteringOutcome(ell, tuple(partitions), shortlist)


def k_median(
    instance: Instance,
    proposals: Sequence[Iterable[int]],
    k: int,
    metric: Metric,
    caps: Caps = Caps(),
) -> frozenset[int]:
    """Cluster the proposed projects and shortlist one median per cluster."""
    return k_median_outcome(instance, proposals, k, metric, caps).shortlist
