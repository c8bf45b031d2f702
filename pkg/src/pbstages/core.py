"""Projects, budget instances, greedy selection, and canonical tie-breaking.

Everything downstream is built from three deterministic primitives defined
here: the greedy selection scan, and the canonical tie-breaking rule in its
three overloads (single project, weak order, family of project sets).
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field


class ValidationError(ValueError):
    """An input violates a documented precondition."""


class ResourceLimitError(RuntimeError):
    """An exact computation would exceed its configured cap.

    Raised instead of silently approximating: downstream verdicts must be
    exact, so oversized inputs fail loudly.
    """


class NoPartitionError(RuntimeError):
    """No clustering satisfies the constraints at any radius."""


@dataclass(frozen=True)
class Caps:
    """Size limits for the exact (exponential) searches.

    Attributes
    ----------
    subset_search : int
        Maximum union-of-proposals size for the equal-representation rule.
    partitions : int
        Maximum union size for clustering-rule partition enumeration.
    domination : int
        Maximum union size for the representative-domination search.
    ballots : int
        Maximum shortlist size for best-response ballot enumeration.
    profiles : int
        Maximum number of approval profiles enumerated by a single
        strategyproofness search (counted per side of a comparison).
    maximisers : int
        Maximum shortlist size when all score maximisers must be listed
        explicitly (only needed for priority tie-breaking).
    """

    subset_search: int = 20
    partitions: int = 12
    domination: int = 15
    ballots: int = 12
    profiles: int = 2**20
    maximisers: int = 15


@dataclass(frozen=True, order=True)
class Project:
    """A project with a positive integer index and cost.

    The index doubles as the tie-breaking priority: lower index wins every
    tie in the whole pipeline.  Coordinates are optional and only used by
    metric-based shortlisting.
    """

    index: int
    cost: int
    coords: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValidationError(f"project index must be >= 1, got {self.index}")
        if self.cost < 1:
            raise ValidationError(
                f"project p{self.index} has cost {self.cost}; costs must be >= 1"
            )
        if self.coords is not None:
            object.__setattr__(self, "coords", tuple(float(x) for x in self.coords))


class Instance:
    """A set of projects with integer costs and a budget limit.

    Used both for the proposal stage (the full project universe) and for
    the voting stage (a shortlist); :meth:`restrict` derives the latter
    from the former.
    """

    def __init__(self, projects: Iterable[Project], budget: int):
        projects = sorted(projects, key=lambda p: p.index)
        if budget < 1:
            raise ValidationError(f"budget must be >= 1, got {budget}")
        self._projects: dict[int, Project] = {}
        for project in projects:
            if project.index in self._projects:
                raise ValidationError(f"duplicate project index {project.index}")
            if project.cost > budget:
                raise ValidationError(
                    f"project p{project.index} costs {project.cost}, "
                    f"exceeding the budget {budget}"
                )
            self._projects[project.index] = project
        self.budget = budget

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(self._projects)

    @property
    def projects(self) -> tuple[Project, ...]:
        return tuple(self._projects.values())

    def __contains__(self, pid: int) -> bool:
        return pid in self._projects

    def __len__(self) -> int:
        return len(self._projects)

    def project(self, pid: int) -> Project:
        try:
            return self._projects[pid]
        except KeyError:
            raise ValidationError(f"unknown project id {pid}") from None

    def cost(self, pid: int) -> int:
        return self.project(pid).cost

    def total_cost(self, pids: Iterable[int]) -> int:
        """Summed cost of a set of project ids; empty sets cost 0."""
        return sum(self.cost(pid) for pid in set(pids))

    def restrict(self, pids: Iterable[int]) -> "Instance":
        """The sub-instance on ``pids``, keeping the same budget."""
        return Instance((self.project(pid) for pid in set(pids)), self.budget)

    def check_subset(self, pids: Iterable[int], what: str = "set") -> frozenset[int]:
        pids = frozenset(pids)
        unknown = [pid for pid in pids if pid not in self._projects]
        if unknown:
            raise ValidationError(f"{what} contains unknown project ids {sorted(unknown)}")
        return pids

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.budget == other.budget and self._projects == other._projects

    def __repr__(self) -> str:
        return f"Instance({len(self._projects)} projects, budget={self.budget})"


def greedy_select(
    instance: Instance,
    subset: Iterable[int],
    order: Sequence[int],
    budget: int | None = None,
) -> frozenset[int]:
    """Scan ``subset`` in the given order, taking each project that still fits.

    A project is selected iff adding it keeps the running total within the
    budget; skipped projects are never revisited.

    Parameters
    ----------
    instance : Instance
        Supplies the costs and the default budget.
    subset : iterable of int
        The project ids to select from.
    order : sequence of int
        A strict order covering exactly ``subset``.
    budget : int, optional
        Overrides the instance budget (used when scanning a sub-instance).
    """
    subset = instance.check_subset(subset, "selection set")
    if budget is None:
        budget = instance.budget
    if len(order) != len(set(order)) or set(order) != subset:
        raise ValidationError("order must cover exactly the candidate set, no repeats")
    selected = []
    spent = 0
    for pid in order:
        cost = instance.cost(pid)
        if spent + cost <= budget:
            selected.append(pid)
            spent += cost
    return frozenset(selected)


def tiebreak_project(pids: Iterable[int]) -> int:
    """Canonical tie-breaking on projects: the member with minimal index."""
    pids = list(pids)
    if not pids:
        raise ValidationError("cannot tie-break an empty set of projects")
    return min(pids)


def tiebreak_order(
    classes: Sequence[Iterable[int]], universe: Iterable[int] | None = None
) -> tuple[int, ...]:
    """Refine ranked indifference classes into a strict order.

    Classes keep their rank; within each class projects are ordered by
    ascending index.  If ``universe`` is given, the classes must partition
    exactly that set.
    """
    result: list[int] = []
    seen: set[int] = set()
    for cls in classes:
        members = sorted(cls)
        for pid in members:
            if pid in seen:
                raise ValidationError(f"project {pid} appears in more than one class")
            seen.add(pid)
        result.extend(members)
    if universe is not None:
        universe = set(universe)
        if seen != universe:
            missing = sorted(universe - seen)
            extra = sorted(seen - universe)
            raise ValidationError(
                f"classes do not partition the project set "
                f"(missing {missing}, extraneous {extra})"
            )
    return tuple(result)


def tiebreak_family(family: Iterable[frozenset[int]]) -> frozenset[int]:
    """Canonical tie-breaking on a family of project sets.

    Selects the unique member such that, for every other member, the
    lowest-index project on which the two differ belongs to the selected
    one.  Equivalently: the member whose characteristic sequence over the
    family's union, read in ascending index order with present > absent,
    is lexicographically maximal.
    """
    members = {frozenset(s) for s in family}
    if not members:
        raise ValidationError("cannot tie-break an empty family of sets")
    union = sorted(set().union(*members))
    return max(members, key=lambda s: tuple(pid in s for pid in union))


def subsets_ascending(pids: Iterable[int]) -> list[frozenset[int]]:
    """All subsets of ``pids`` in the canonical enumeration order.

    Bit ``j`` of the mask toggles the ``j``-th smallest id, and masks run
    from 0 upward, so the order is deterministic and starts with the empty
    set.  Every exhaustive search in the package reports the first hit in
    this order.
    """
    items = sorted(set(pids))
    out = []
    for mask in range(1 << len(items)):
        out.append(frozenset(items[j] for j in range(len(items)) if mask >> j & 1))
    return out
