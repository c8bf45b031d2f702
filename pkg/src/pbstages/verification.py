"""Axiom checkers and second-stage strategyproofness search.

Verdicts distinguish exhaustive evidence from sampled evidence: a verdict
is *exact* when the declared search space was fully enumerated, in which
case "holds" is a proof for that space.  Sampled runs can only refute.
Every counterexample witness carries enough data to be replayed.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from random import Random

from pbstages.core import (
    Caps,
    Instance,
    Project,
    ResourceLimitError,
    ValidationError,
    subsets_ascending,
)
from pbstages.allocation import EXHAUSTIVE, classify_allocation
from pbstages.preferences import allocation_value, check_model, ideal_set
from pbstages.shortlisting import check_proposals, proposal_union

HOLDS = "holds-on-suite"
COUNTEREXAMPLE = "counterexample-found"

AllocationRule = Callable[[Instance, Sequence[frozenset[int]]], frozenset[int]]
ShortlistRule = Callable[[Instance, Sequence[frozenset[int]]], frozenset[int]]


@dataclass
class PropertyVerdict:
    """Outcome of a property check over one case or a whole suite."""

    status: str
    witness: dict | None = None
    exact: bool = True
    checked: int = 0
    params: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    def to_jsonable(self) -> dict:
        return {
            "status": self.status,
            "exact": self.exact,
            "checked": self.checked,
            "params": self.params,
            "witness": self.witness,
        }


def aggregate(verdicts: Iterable[PropertyVerdict], params: dict | None = None) -> PropertyVerdict:
    """Combine per-case verdicts; the first counterexample wins."""
    total = 0
    exact = True
    for verdict in verdicts:
        total += max(verdict.checked, 1)
        exact = exact and verdict.exact
        if not verdict.holds:
            return PropertyVerdict(
                COUNTEREXAMPLE, verdict.witness, verdict.exact, total, params or {}
            )
    return PropertyVerdict(HOLDS, None, exact, total, params or {})


def ids_list(pids: Iterable[int]) -> list[int]:
    return sorted(pids)


def instance_payload(instance: Instance) -> dict:
    data = {
        "budget": instance.budget,
        "costs": {str(p.index): p.cost for p in instance.projects},
    }
    if any(p.coords is not None for p in instance.projects):
        data["coords"] = {
            str(p.index): list(p.coords)
            for p in instance.projects
            if p.coords is not None
        }
    return data


# ---------------------------------------------------------------------------
# Shortlisting axioms


def check_non_wasteful(
    rule: ShortlistRule, instance: Instance, proposals: Sequence[Iterable[int]]
) -> PropertyVerdict:
    """One-case check: the shortlist exhausts the budget or takes everything."""
    proposals = check_proposals(instance, proposals)
    shortlist = rule(instance, proposals)
    if instance.total_cost(shortlist) >= instance.budget or shortlist == proposal_union(proposals):
        return PropertyVerdict(HOLDS, checked=1)
    witness = {
        "kind": "non-wasteful",
        "instance": instance_payload(instance),
        "proposals": [ids_list(p) for p in proposals],
        "shortlist": ids_list(shortlist),
        "shortlist_cost": instance.total_cost(shortlist),
        "budget": instance.budget,
    }
    return PropertyVerdict(COUNTEREXAMPLE, witness, checked=1)


def find_representative_domination(
    instance: Instance,
    proposals: Sequence[Iterable[int]],
    shortlist: Iterable[int],
    caps: Caps = Caps(),
    search_universe: bool = False,
) -> frozenset[int] | None:
    """A no-costlier set giving every agent weakly more proposals, someone strictly more.

    The search space is the union of proposals: projects outside it
    intersect no proposal and every project costs at least 1, so adding
    them can never help.  ``search_universe=True`` scans all projects
    instead, which exists to validate that argument on small instances.
    """
    proposals = check_proposals(instance, proposals)
    shortlist = instance.check_subset(shortlist, "shortlist")
    space = frozenset(instance.ids) if search_universe else proposal_union(proposals)
    if len(space) > caps.domination:
        raise ResourceLimitError(
            f"domination search over {len(space)} projects exceeds the cap "
            f"of {caps.domination}"
        )
    limit = instance.total_cost(shortlist)
    baseline = [len(shortlist & p) for p in proposals]
    for candidate in subsets_ascending(space):
        if instance.total_cost(candidate) > limit:
            continue
        hits = [len(candidate & p) for p in proposals]
        if all(h >= b for h, b in zip(hits, baseline)) and any(
            h > b for h, b in zip(hits, baseline)
        ):
            return candidate
    return None


def check_representation_efficiency(
    rule: ShortlistRule,
    instance: Instance,
    proposals: Sequence[Iterable[int]],
    caps: Caps = Caps(),
) -> PropertyVerdict:
    """One-case check: the rule's shortlist is not representatively dominated."""
    proposals = check_proposals(instance, proposals)
    shortlist = rule(instance, proposals)
    dominating = find_representative_domination(instance, proposals, shortlist, caps)
    if dominating is None:
        return PropertyVerdict(HOLDS, checked=1)
    witness = {
        "kind": "representative-domination",
        "instance": instance_payload(instance),
        "proposals": [ids_list(p) for p in proposals],
        "shortlist": ids_list(shortlist),
        "dominating_set": ids_list(dominating),
    }
    return PropertyVerdict(COUNTEREXAMPLE, witness, checked=1)


# ---------------------------------------------------------------------------
# Allocation axioms

ALLOCATION_AXIOMS = ("exhaustive", "unanimous", "strongly-unanimous")


def check_allocation_axiom(rule: AllocationRule, axiom: str, cases: Iterable) -> PropertyVerdict:
    """Check an allocation-rule axiom over generated cases.

    Case shapes by axiom:

    - ``"exhaustive"``: ``(instance, ballots)``; the outcome must be a
      feasible allocation that no leftover project still fits.
    - ``"unanimous"``: ``(instance, shared, n)``; when all ``n`` agents
      submit the feasible set ``shared``, the outcome must contain it.
    - ``"strongly-unanimous"``: ``(instance, shared, n, deviant, ballot)``;
      with ``n >= 3`` agents, all but the deviant submitting ``shared``,
      the outcome must still contain it.
    """
    if axiom not in ALLOCATION_AXIOMS:
        raise ValidationError(f"unknown allocation axiom {axiom!r}")
    checked = 0
    for case in cases:
        checked += 1
        if axiom == "exhaustive":
            instance, ballots = case
            outcome = rule(instance, ballots)
            label = classify_allocation(instance, outcome)
            if label != EXHAUSTIVE:
                witness = {
                    "kind": "exhaustive",
                    "instance": instance_payload(instance),
                    "ballots": [ids_list(b) for b in ballots],
                    "outcome": ids_list(outcome),
                    "classification": label,
                }
                return PropertyVerdict(COUNTEREXAMPLE, witness, checked=checked)
            continue
        if axiom == "unanimous":
            instance, shared, n = case
            shared = instance.check_subset(shared, "shared ballot")
            if instance.total_cost(shared) > instance.budget:
                raise ValidationError("unanimity cases need a feasible shared ballot")
            ballots = (shared,) * n
            deviant = None
        else:
            instance, shared, n, deviant, deviant_ballot = case
            if n < 3:
                raise ValidationError("strong unanimity is only defined for 3+ agents")
            shared = instance.check_subset(shared, "shared ballot")
            if instance.total_cost(shared) > instance.budget:
                raise ValidationError("strong unanimity cases need a feasible shared ballot")
            ballots = tuple(
                instance.check_subset(deviant_ballot) if i == deviant else shared
                for i in range(n)
            )
        outcome = rule(instance, ballots)
        if not shared <= outcome:
            witness = {
                "kind": axiom,
                "instance": instance_payload(instance),
                "shared": ids_list(shared),
                "agents": n,
                "deviant": None if deviant is None else deviant + 1,
                "ballots": [ids_list(b) for b in ballots],
                "outcome": ids_list(outcome),
            }
            return PropertyVerdict(COUNTEREXAMPLE, witness, checked=checked)
    return PropertyVerdict(HOLDS, checked=checked)


# ---------------------------------------------------------------------------
# Second-stage strategyproofness


class OutcomeCache:
    """Memoises an allocation rule per ballot profile.

    Rules flagged ``score_based`` depend on ballots only through the
    approval score vector, which collapses the key space dramatically
    during profile enumeration.
    """

    def __init__(self, rule: AllocationRule, instance: Instance):
        self.rule = rule
        self.instance = instance
        self._ids = instance.ids
        self._score_based = bool(getattr(rule, "score_based", False))
        self._store: dict[tuple, frozenset[int]] = {}

    def _key(self, ballots: tuple[frozenset[int], ...]) -> tuple:
        if not self._score_based:
            return ballots
        scores = [0] * len(self._ids)
        lookup = {pid: i for i, pid in enumerate(self._ids)}
        for ballot in ballots:
            for pid in ballot:
                scores[lookup[pid]] += 1
        return tuple(scores)

    def __call__(self, ballots: tuple[frozenset[int], ...]) -> frozenset[int]:
        key = self._key(ballots)
        try:
            return self._store[key]
        except KeyError:
            outcome = self.rule(self.instance, ballots)
            self._store[key] = outcome
            return outcome


def repaired_value(
    model: str, ideal: frozenset[int], outcome: frozenset[int], instance: Instance
) -> int:
    """Best value of the outcome augmented with one arbitrary project."""
    base = allocation_value(model, ideal, outcome, instance)
    best = base
    for pid in instance.ids:
        value = allocation_value(model, ideal, outcome | {pid}, instance)
        if value > best:
            best = value
    return best


def _sp_witness(
    instance: Instance,
    agent: int,
    profile: tuple[frozenset[int], ...],
    ideal: frozenset[int],
    truthful_outcome: frozenset[int],
    manipulated_outcome: frozenset[int],
    model: str,
    approximate: bool,
) -> dict:
    truthful_value = allocation_value(model, ideal, truthful_outcome, instance)
    return {
        "kind": "second-stage-manipulation",
        "instance": instance_payload(instance),
        "agent": agent + 1,
        "model": model,
        "approximate": approximate,
        "profile": [ids_list(b) for b in profile],
        "ideal": ids_list(ideal),
        "truthful_outcome": ids_list(truthful_outcome),
        "manipulated_outcome": ids_list(manipulated_outcome),
        "truthful_value": truthful_value,
        "repaired_value": repaired_value(model, ideal, truthful_outcome, instance),
        "manipulated_value": allocation_value(model, ideal, manipulated_outcome, instance),
    }


def check_second_stage_sp(
    rule: AllocationRule,
    instance: Instance,
    rankings: Sequence[Sequence[int]],
    model: str,
    approximate: bool = False,
    search: str = "auto",
    caps: Caps = Caps(),
    ballots: Sequence[Iterable[int]] | None = None,
    agents: Sequence[int] | None = None,
    deviations: Sequence[Iterable[int]] | None = None,
    samples: int = 2000,
    seed: int = 0,
) -> PropertyVerdict:
    """Search for a ballot manipulation that beats voting truthfully.

    A manipulation succeeds when the rule's outcome under some profile is
    strictly better for the manipulator than the outcome with her ballot
    replaced by her ideal set; in approximate mode the truthful outcome
    may first be augmented with any single project.

    Search modes:

    - ``"full"``: enumerate every profile and manipulator (exact; capped).
    - ``"fixed-others"``: other agents keep the scenario ballots (their
      truthful ideal sets unless ``ballots`` is given) while the
      manipulator's ballot is enumerated exhaustively (exact for that
      slice of the space).
    - ``"sample"``: seeded random profiles; can only refute, never prove.
    - ``"auto"``: ``"full"`` when the profile space fits the cap,
      otherwise ``"fixed-others"``.
    """
    check_model(model)
    n = len(rankings)
    if n == 0:
        raise ValidationError("strategyproofness needs at least one agent")
    ids = instance.ids
    tops = [ideal_set(instance, _restrict_ranking(ranking, instance)) for ranking in rankings]
    agent_pool = list(range(n)) if agents is None else [a for a in agents]
    full_space = (2 ** len(ids)) ** n
    if search == "auto":
        search = "full" if full_space <= caps.profiles else "fixed-others"
    if search == "full" and full_space > caps.profiles:
        raise ResourceLimitError(
            f"full profile enumeration needs {full_space} profiles, "
            f"exceeding the cap of {caps.profiles}"
        )
    outcome = OutcomeCache(rule, instance)
    params = {
        "search": search,
        "model": model,
        "approximate": approximate,
        "agents": [a + 1 for a in agent_pool],
    }

    def violates(agent: int, profile: tuple[frozenset[int], ...]) -> dict | None:
        truthful_profile = profile[:agent] + (tops[agent],) + profile[agent + 1 :]
        truthful = outcome(truthful_profile)
        manipulated = outcome(profile)
        ideal = tops[agent]
        bar = (
            repaired_value(model, ideal, truthful, instance)
            if approximate
            else allocation_value(model, ideal, truthful, instance)
        )
        if allocation_value(model, ideal, manipulated, instance) > bar:
            return _sp_witness(
                instance, agent, profile, ideal, truthful, manipulated, model, approximate
            )
        return None

    checked = 0
    if search == "full":
        all_ballots = subsets_ascending(ids)
        for profile in itertools.product(all_ballots, repeat=n):
            for agent in agent_pool:
                checked += 1
                witness = violates(agent, profile)
                if witness:
                    return PropertyVerdict(COUNTEREXAMPLE, witness, True, checked, params)
        return PropertyVerdict(HOLDS, None, True, checked, params)

    if search == "fixed-others":
        base = list(tops) if ballots is None else [
            instance.check_subset(b) for b in ballots
        ]
        if len(base) != n:
            raise ValidationError("fixed ballots must cover every agent")
        pool = (
            subsets_ascending(ids)
            if deviations is None
            else [instance.check_subset(d, "deviation") for d in deviations]
        )
        for agent in agent_pool:
            for deviation in pool:
                checked += 1
                profile = tuple(
                    deviation if i == agent else base[i] for i in range(n)
                )
                witness = violates(agent, profile)
                if witness:
                    return PropertyVerdict(COUNTEREXAMPLE, witness, True, checked, params)
        # Exact for the searched slice only: other agents' ballots stayed fixed.
        return PropertyVerdict(HOLDS, None, False, checked, params)

    if search == "sample":
        rng = Random(seed)
        params["samples"] = samples
        params["seed"] = seed
        items = sorted(ids)
        for _ in range(samples):
            profile = tuple(
                frozenset(pid for pid in items if rng.random() < 0.5) for _ in range(n)
            )
            for agent in agent_pool:
                checked += 1
                witness = violates(agent, profile)
                if witness:
                    return PropertyVerdict(COUNTEREXAMPLE, witness, True, checked, params)
        return PropertyVerdict(HOLDS, None, False, checked, params)

    raise ValidationError(f"unknown search mode {search!r}")


def _restrict_ranking(ranking: Sequence[int], instance: Instance) -> tuple[int, ...]:
    return tuple(pid for pid in ranking if pid in instance)


def check_sp_over_unit_class(
    rule: AllocationRule,
    model: str,
    max_projects: int = 4,
    max_agents: int = 3,
    unit_costs: tuple[int, ...] = (1, 2),
    approximate: bool = False,
    caps: Caps = Caps(),
) -> PropertyVerdict:
    """Exhaustively check strategyproofness over small equal-cost instances.

    Enumerates every instance size, shared cost, budget, agent count,
    manipulator ideal set, and full ballot profile.  Both allocation rules
    are anonymous (they only read approval scores), so fixing the
    manipulator position while quantifying over ideal sets and full
    profiles covers every agent position; with equal costs every
    fixed-size subset arises as the greedy ideal of some ranking, so
    quantifying ideal sets covers every preference order.
    """
    check_model(model)
    checked = 0
    params = {
        "class": "unit-cost",
        "max_projects": max_projects,
        "max_agents": max_agents,
        "unit_costs": list(unit_costs),
        "model": model,
        "approximate": approximate,
    }
    for m in range(1, max_projects + 1):
        for cost in unit_costs:
            for slots in range(1, m + 1):
                budget = cost * slots
                instance = Instance(
                    [Project(i + 1, cost) for i in range(m)], budget
                )
                ids = instance.ids
                all_ballots = subsets_ascending(ids)
                size = min(slots, m)
                for n in range(1, max_agents + 1):
                    outcome = OutcomeCache(rule, instance)
                    for ideal_members in itertools.combinations(ids, size):
                        ideal = frozenset(ideal_members)
                        for others in itertools.product(all_ballots, repeat=n - 1):
                            truthful = outcome((ideal, *others))
                            bar = (
                                repaired_value(model, ideal, truthful, instance)
                                if approximate
                                else allocation_value(model, ideal, truthful, instance)
                            )
                            for ballot in all_ballots:
                                checked += 1
                                manipulated = outcome((ballot, *others))
                                if allocation_value(model, ideal, manipulated, instance) > bar:
                                    witness = _sp_witness(
                                        instance,
                                        0,
                                        (ballot, *others),
                                        ideal,
                                        truthful,
                                        manipulated,
                                        model,
                                        approximate,
                                    )
                                    return PropertyVerdict(
                                        COUNTEREXAMPLE, witness, True, checked, params
                                    )
    return PropertyVerdict(HOLDS, None, True, checked, params)


def check_rules_coincide_on_unit_class(
    first: AllocationRule,
    second: AllocationRule,
    max_projects: int = 4,
    max_agents: int = 3,
    unit_costs: tuple[int, ...] = (1, 2),
) -> PropertyVerdict:
    """Exhaustively compare two rules over small equal-cost instances.

    Enumerates realizable score vectors directly (any vector with entries
    between 0 and the agent count arises from some ballot profile, and
    both rules are anonymous).
    """
    checked = 0
    params = {
        "class": "unit-cost",
        "max_projects": max_projects,
        "max_agents": max_agents,
        "unit_costs": list(unit_costs),
    }
    for m in range(1, max_projects + 1):
        for cost in unit_costs:
            for slots in range(1, m + 1):
                instance = Instance([Project(i + 1, cost) for i in range(m)], cost * slots)
                ids = instance.ids
                for n in range(1, max_agents + 1):
                    for scores in itertools.product(range(n + 1), repeat=m):
                        # One agent per score unit keeps the profile well formed.
                        ballots = tuple(
                            frozenset(pid for pid, s in zip(ids, scores) if s > level)
                            for level in range(n)
                        )
                        checked += 1
                        a = first(instance, ballots)
                        b = second(instance, ballots)
                        if a != b:
                            witness = {
                                "kind": "rules-differ",
                                "instance": {"costs": [cost] * m, "budget": instance.budget},
                                "ballots": [ids_list(x) for x in ballots],
                                "first_outcome": ids_list(a),
                                "second_outcome": ids_list(b),
                            }
                            return PropertyVerdict(COUNTEREXAMPLE, witness, True, checked, params)
    return PropertyVerdict(HOLDS, None, True, checked, params)


# ---------------------------------------------------------------------------
# Unit split


@dataclass(frozen=True)
class UnitSplitMap:
    """Bidirectional mapping between projects and their unit-cost pieces.

    Piece ids are assigned in ascending order of the parent index, with
    consecutive ids inside each parent, so the canonical tie-breaking
    order on pieces refines the order on parents.
    """

    forward: dict[int, tuple[int, ...]]
    backward: dict[int, int]

    def split_set(self, pids: Iterable[int]) -> frozenset[int]:
        pieces: set[int] = set()
        for pid in pids:
            pieces.update(self.forward[pid])
        return frozenset(pieces)

    def merge(self, pieces: Iterable[int]) -> tuple[frozenset[int], frozenset[int]]:
        """Parents fully covered by ``pieces``, and parents only partially covered."""
        pieces = set(pieces)
        full, partial = set(), set()
        for parent, units in self.forward.items():
            hits = sum(1 for u in units if u in pieces)
            if hits == len(units):
                full.add(parent)
            elif hits:
                partial.add(parent)
        return frozenset(full), frozenset(partial)


def unit_split(
    instance: Instance, ballots: Sequence[Iterable[int]] = ()
) -> tuple[Instance, tuple[frozenset[int], ...], UnitSplitMap]:
    """Split every project into unit-cost pieces, ballots included.

    A ballot approving a project approves all of its pieces.  Merging the
    pieces back (see :meth:`UnitSplitMap.merge`) is the left inverse of
    the split.
    """
    ballots = tuple(instance.check_subset(b) for b in ballots)
    forward: dict[int, tuple[int, ...]] = {}
    pieces: list[Project] = []
    next_id = 1
    for project in instance.projects:
        unit_ids = tuple(range(next_id, next_id + project.cost))
        next_id += project.cost
        forward[project.index] = unit_ids
        pieces.extend(Project(uid, 1, project.coords) for uid in unit_ids)
    backward = {uid: parent for parent, units in forward.items() for uid in units}
    split_map = UnitSplitMap(forward, backward)
    unit_instance = Instance(pieces, instance.budget)
    unit_ballots = tuple(split_map.split_set(b) for b in ballots)
    return unit_instance, unit_ballots, split_map
