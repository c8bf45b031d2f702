"""First-stage strategyproofness: best responses and manipulation search.

A manipulator misreports her *proposals*, changing which projects reach
the vote, and reasons about the voting stage under one of three modes:
``pessimistic`` (her deviation must pay off against every pair of ballot
profiles on the two shortlists), ``optimistic`` (against at least one
pair), or ``anticipative`` (everyone votes their truthful ideal sets).
In all modes her own ballot is replaced by her best response, and
outcomes are compared by her ideal set on the union of both shortlists.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from random import Random

from pbstages.core import (
    Caps,
    Instance,
    Project,
    ResourceLimitError,
    ValidationError,
    subsets_ascending,
    tiebreak_family,
)
from pbstages.preferences import (
    allocation_value,
    best_allocations,
    check_model,
    check_ranking,
    ideal_set,
)
from pbstages.shortlisting import check_proposals, proposal_union
from pbstages.verification import (
    COUNTEREXAMPLE,
    HOLDS,
    AllocationRule,
    OutcomeCache,
    PropertyVerdict,
    ShortlistRule,
    ids_list,
)

MODES = ("pessimistic", "optimistic", "anticipative")
VARIANTS = ("restricted", "unrestricted")

SUCCESSFUL = "successful"
UNSUCCESSFUL = "unsuccessful"
UNKNOWN = "unknown"


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValidationError(f"unknown manipulation mode {mode!r}; expected one of {MODES}")
    return mode


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return variant


@dataclass(frozen=True)
class StageGame:
    """Everything a two-stage manipulation check needs.

    ``proposals`` is the baseline proposal profile; when omitted, every
    agent proposes the ideal set of her awareness set.
    """

    instance: Instance
    shortlist_rule: ShortlistRule
    allocation_rule: AllocationRule
    rankings: tuple[tuple[int, ...], ...]
    awareness: tuple[frozenset[int], ...]
    model: str
    proposals: tuple[frozenset[int], ...] | None = None

    def __post_init__(self) -> None:
        check_model(self.model)
        if len(self.rankings) != len(self.awareness):
            raise ValidationError("one ranking and one awareness set per agent")
        for ranking in self.rankings:
            check_ranking(self.instance, ranking)
        for aware in self.awareness:
            self.instance.check_subset(aware, "awareness set")
        # Unrestricted baselines may legitimately propose projects outside
        # the agent's own awareness set, so only universe membership is
        # checked here; scenario files are validated more strictly.
        if self.proposals is not None:
            check_proposals(self.instance, self.proposals)

    @property
    def agents(self) -> int:
        return len(self.rankings)

    def base_proposals(self) -> tuple[frozenset[int], ...]:
        if self.proposals is not None:
            return self.proposals
        return tuple(
            ideal_set(self.instance, ranking, aware)
            for ranking, aware in zip(self.rankings, self.awareness)
        )

    def truthful_proposal(self, agent: int, variant: str) -> frozenset[int]:
        """The proposal an honest agent submits, per deviation variant."""
        pool = self.awareness[agent]
        if check_variant(variant) == "unrestricted":
            pool = pool | proposal_union(self.base_proposals())
        return ideal_set(self.instance, self.rankings[agent], pool)

    def deviation_pool(self, agent: int, variant: str) -> frozenset[int]:
        if check_variant(variant) == "restricted":
            return self.awareness[agent]
        return self.awareness[agent] | proposal_union(self.base_proposals())

    def top_on(self, agent: int, shortlist: Iterable[int]) -> frozenset[int]:
        shortlist = self.instance.check_subset(shortlist, "shortlist")
        return ideal_set(self.instance, self.rankings[agent], shortlist)


def best_response(
    rule: AllocationRule,
    instance: Instance,
    ballots: Sequence[frozenset[int]],
    agent: int,
    ideal: frozenset[int],
    model: str,
    caps: Caps = Caps(),
    cache: OutcomeCache | None = None,
) -> tuple[frozenset[int], frozenset[int]]:
    """Best ballot for ``agent`` against the others' fixed ballots.

    Enumerates every ballot, keeps the outcomes the agent likes best under
    her ideal set, canonically tie-breaks to a single target outcome, and
    returns a canonical ballot achieving it together with that outcome.
    """
    if len(instance) > caps.ballots:
        raise ResourceLimitError(
            f"best-response enumeration over {len(instance)} projects exceeds "
            f"the cap of {caps.ballots}"
        )
    if cache is None:
        cache = OutcomeCache(rule, instance)
    achieved: dict[frozenset[int], list[frozenset[int]]] = {}
    for ballot in subsets_ascending(instance.ids):
        profile = tuple(
            ballot if i == agent else ballots[i] for i in range(len(ballots))
        )
        achieved.setdefault(cache(profile), []).append(ballot)
    target = tiebreak_family(best_allocations(model, ideal, achieved, instance))
    return tiebreak_family(achieved[target]), target


def f_star(
    rule: AllocationRule,
    instance: Instance,
    ballots: Sequence[frozenset[int]],
    agent: int,
    ranking: Sequence[int],
    model: str,
    caps: Caps = Caps(),
    cache: OutcomeCache | None = None,
) -> frozenset[int]:
    """The rule's outcome after the agent swaps in her best response.

    The best response is computed against the ideal set on this instance's
    own shortlist; the agent's submitted ballot is irrelevant because it
    is always replaced.
    """
    ideal = ideal_set(instance, [pid for pid in ranking if pid in instance])
    _, outcome = best_response(rule, instance, ballots, agent, ideal, model, caps, cache)
    return outcome


def _fstar_outcomes(
    rule: AllocationRule,
    instance: Instance,
    agents: int,
    agent: int,
    ideal: frozenset[int],
    model: str,
    caps: Caps,
) -> dict[frozenset[int], tuple[frozenset[int], ...]]:
    """Every best-response outcome over all ballot profiles of the others.

    The manipulator's own ballot never matters (it is replaced by her best
    response), so profiles are quantified through the other agents only.
    Returns each distinct outcome with the first full profile realising it,
    the manipulator's slot holding her ideal set for readability.
    """
    others = agents - 1
    space = (2 ** len(instance)) ** others
    if space > caps.profiles:
        raise ResourceLimitError(
            f"profile enumeration needs {space} profiles per side, "
            f"exceeding the cap of {caps.profiles}"
        )
    cache = OutcomeCache(rule, instance)
    out: dict[frozenset[int], tuple[frozenset[int], ...]] = {}
    all_ballots = subsets_ascending(instance.ids)
    for rest in itertools.product(all_ballots, repeat=others):
        ballots = rest[:agent] + (ideal,) + rest[agent:]
        _, outcome = best_response(rule, instance, ballots, agent, ideal, model, caps, cache)
        out.setdefault(outcome, ballots)
    return out


@dataclass
class ManipulationResult:
    """Verdict for one (agent, deviation) pair, with a replayable witness."""

    verdict: str
    witness: dict | None
    exact: bool
    details: dict = field(default_factory=dict)

    @property
    def successful(self) -> bool:
        return self.verdict == SUCCESSFUL


def _manipulation_witness(
    game: StageGame,
    agent: int,
    deviation: frozenset[int],
    mode: str,
    base_shortlist: frozenset[int],
    dev_shortlist: frozenset[int],
    ideal: frozenset[int],
    base_profile: tuple[frozenset[int], ...] | None,
    dev_profile: tuple[frozenset[int], ...] | None,
    base_outcome: frozenset[int],
    dev_outcome: frozenset[int],
) -> dict:
    return {
        "kind": "first-stage-manipulation",
        "agent": agent + 1,
        "mode": mode,
        "model": game.model,
        "deviation": ids_list(deviation),
        "baseline_proposal": ids_list(game.base_proposals()[agent]),
        "baseline_shortlist": ids_list(base_shortlist),
        "deviation_shortlist": ids_list(dev_shortlist),
        "comparison_ideal": ids_list(ideal),
        "baseline_profile": None if base_profile is None else [ids_list(b) for b in base_profile],
        "deviation_profile": None if dev_profile is None else [ids_list(b) for b in dev_profile],
        "baseline_outcome": ids_list(base_outcome),
        "deviation_outcome": ids_list(dev_outcome),
        "baseline_value": allocation_value(game.model, ideal, base_outcome, game.instance),
        "deviation_value": allocation_value(game.model, ideal, dev_outcome, game.instance),
    }


def check_manipulation(
    game: StageGame,
    agent: int,
    deviation: Iterable[int],
    mode: str,
    caps: Caps = Caps(),
    sample: int | None = None,
    seed: int = 0,
) -> ManipulationResult:
    """Decide whether one proposal deviation is a successful manipulation.

    Builds the baseline shortlist from the game's proposals and the
    deviation shortlist with the agent's proposal swapped out, then
    compares best-response outcomes per the mode.  Pessimistic and
    optimistic verdicts are exact when the profile spaces fit the cap;
    with ``sample`` set, oversized spaces are sampled instead (which can
    refute a pessimistic claim or confirm an optimistic one, but proves
    neither, leaving the verdict ``"unknown"``).
    """
    check_mode(mode)
    deviation = game.instance.check_subset(deviation, "deviation")
    proposals = game.base_proposals()
    base_shortlist = game.shortlist_rule(game.instance, proposals)
    deviated = tuple(deviation if i == agent else p for i, p in enumerate(proposals))
    dev_shortlist = game.shortlist_rule(game.instance, deviated)
    base_instance = game.instance.restrict(base_shortlist)
    dev_instance = game.instance.restrict(dev_shortlist)
    ideal = game.top_on(agent, base_shortlist | dev_shortlist)

    def value(outcome: frozenset[int]) -> int:
        return allocation_value(game.model, ideal, outcome, game.instance)

    details = {
        "baseline_shortlist": ids_list(base_shortlist),
        "deviation_shortlist": ids_list(dev_shortlist),
        "comparison_ideal": ids_list(ideal),
    }

    def witness(base_prof, dev_prof, base_out, dev_out):
        return _manipulation_witness(
            game, agent, deviation, mode, base_shortlist, dev_shortlist,
            ideal, base_prof, dev_prof, base_out, dev_out,
        )

    if mode == "anticipative":
        base_profile = tuple(game.top_on(i, base_shortlist) for i in range(game.agents))
        dev_profile = tuple(game.top_on(i, dev_shortlist) for i in range(game.agents))
        base_out = f_star(
            game.allocation_rule, base_instance, base_profile, agent,
            game.rankings[agent], game.model, caps,
        )
        dev_out = f_star(
            game.allocation_rule, dev_instance, dev_profile, agent,
            game.rankings[agent], game.model, caps,
        )
        result = witness(base_profile, dev_profile, base_out, dev_out)
        if value(dev_out) > value(base_out):
            return ManipulationResult(SUCCESSFUL, result, True, details)
        return ManipulationResult(UNSUCCESSFUL, result, True, details)

    # Identical shortlists draw both sides' outcomes from one set, so no
    # strict pair can coexist with universal weak improvement.
    if mode == "pessimistic" and base_shortlist == dev_shortlist:
        return ManipulationResult(UNSUCCESSFUL, None, True, details)

    base_ideal = game.top_on(agent, base_shortlist)
    dev_ideal = game.top_on(agent, dev_shortlist)
    others = game.agents - 1
    space = (2 ** len(base_instance)) ** others + (2 ** len(dev_instance)) ** others
    if space > caps.profiles:
        if sample is None:
            raise ResourceLimitError(
                f"manipulation check needs {space} profiles; enable sampling "
                f"or raise the cap of {caps.profiles}"
            )
        return _sampled_manipulation(
            game, agent, deviation, mode, caps, sample, seed,
            base_instance, dev_instance, base_ideal, dev_ideal, ideal, witness, details,
        )

    base_outs = _fstar_outcomes(
        game.allocation_rule, base_instance, game.agents, agent, base_ideal, game.model, caps
    )
    dev_outs = _fstar_outcomes(
        game.allocation_rule, dev_instance, game.agents, agent, dev_ideal, game.model, caps
    )
    base_min = min(base_outs, key=value)
    base_max = max(base_outs, key=value)
    dev_min = min(dev_outs, key=value)
    dev_max = max(dev_outs, key=value)
    details["baseline_value_range"] = [value(base_min), value(base_max)]
    details["deviation_value_range"] = [value(dev_min), value(dev_max)]

    if mode == "optimistic":
        if value(dev_max) > value(base_min):
            return ManipulationResult(
                SUCCESSFUL,
                witness(base_outs[base_min], dev_outs[dev_max], base_min, dev_max),
                True,
                details,
            )
        return ManipulationResult(UNSUCCESSFUL, None, True, details)

    # Pessimistic: every deviation-side outcome at least as good as every
    # baseline-side outcome, with at least one strictly better pair.
    if value(dev_min) < value(base_max):
        return ManipulationResult(
            UNSUCCESSFUL,
            witness(base_outs[base_max], dev_outs[dev_min], base_max, dev_min),
            True,
            details,
        )
    if value(dev_max) > value(base_min):
        return ManipulationResult(
            SUCCESSFUL,
            witness(base_outs[base_min], dev_outs[dev_max], base_min, dev_max),
            True,
            details,
        )
    return ManipulationResult(UNSUCCESSFUL, None, True, details)


def _sampled_manipulation(
    game, agent, deviation, mode, caps, sample, seed,
    base_instance, dev_instance, base_ideal, dev_ideal, ideal, witness, details,
):
    rng = Random(seed)
    details["sampled"] = sample
    base_cache = OutcomeCache(game.allocation_rule, base_instance)
    dev_cache = OutcomeCache(game.allocation_rule, dev_instance)

    def value(outcome):
        return allocation_value(game.model, ideal, outcome, game.instance)

    def draw(instance, own_ideal, cache):
        ballots = tuple(
            own_ideal
            if i == agent
            else frozenset(p for p in instance.ids if rng.random() < 0.5)
            for i in range(game.agents)
        )
        _, outcome = best_response(
            game.allocation_rule, instance, ballots, agent, own_ideal,
            game.model, caps, cache,
        )
        return ballots, outcome

    strict_seen = None
    for _ in range(sample):
        base_prof, base_out = draw(base_instance, base_ideal, base_cache)
        dev_prof, dev_out = draw(dev_instance, dev_ideal, dev_cache)
        if mode == "pessimistic" and value(dev_out) < value(base_out):
            return ManipulationResult(
                UNSUCCESSFUL, witness(base_prof, dev_prof, base_out, dev_out), False, details
            )
        if mode == "optimistic" and value(dev_out) > value(base_out):
            return ManipulationResult(
                SUCCESSFUL, witness(base_prof, dev_prof, base_out, dev_out), False, details
            )
        if value(dev_out) > value(base_out):
            strict_seen = witness(base_prof, dev_prof, base_out, dev_out)
    if mode == "optimistic":
        return ManipulationResult(UNKNOWN, None, False, details)
    return ManipulationResult(UNKNOWN, strict_seen, False, details)


def check_fssp(
    game: StageGame,
    variant: str,
    mode: str,
    caps: Caps = Caps(),
    sample: int | None = None,
    seed: int = 0,
) -> PropertyVerdict:
    """Search every agent and admissible proposal deviation for a manipulation.

    Restricted agents may propose any subset of their awareness set;
    unrestricted agents may also propose anything already proposed by
    others, and their honest baseline is the ideal set of that larger
    pool.  Reports the first successful deviation in canonical order.
    """
    check_variant(variant)
    check_mode(mode)
    proposals = game.base_proposals()
    checked = 0
    exact = True
    params = {"variant": variant, "mode": mode, "model": game.model}
    for agent in range(game.agents):
        truthful = game.truthful_proposal(agent, variant)
        baseline = tuple(truthful if i == agent else p for i, p in enumerate(proposals))
        agent_game = replace(game, proposals=baseline)
        pool = game.deviation_pool(agent, variant)
        if len(pool) > caps.ballots:
            raise ResourceLimitError(
                f"deviation enumeration over {len(pool)} projects exceeds "
                f"the cap of {caps.ballots}"
            )
        for deviation in subsets_ascending(pool):
            if deviation == truthful:
                continue
            checked += 1
            result = check_manipulation(agent_game, agent, deviation, mode, caps, sample, seed)
            if result.successful:
                witness = dict(result.witness)
                witness["variant"] = variant
                witness["truthful_proposal"] = ids_list(truthful)
                return PropertyVerdict(
                    COUNTEREXAMPLE, witness, result.exact, checked, params
                )
            exact = exact and result.exact
    return PropertyVerdict(HOLDS, None, exact, checked, params)


def fssp_cells(
    game: StageGame, caps: Caps = Caps()
) -> dict[tuple[str, str], PropertyVerdict]:
    """All six first-stage strategyproofness verdicts for one game."""
    return {
        (variant, mode): check_fssp(game, variant, mode, caps)
        for variant in VARIANTS
        for mode in MODES
    }


@dataclass
class ImplicationReport:
    violations: list[dict]
    tables: int

    @property
    def consistent(self) -> bool:
        return not self.violations


def verify_fssp_implications(
    tables: Iterable[tuple[str, dict[tuple[str, str], PropertyVerdict], bool]],
) -> ImplicationReport:
    """Check verdict tables against the logical implication lattice.

    Each table is ``(name, cells, awareness_covers_proposals)`` with one
    verdict per (variant, mode) cell.  A successful pessimistic or
    anticipative manipulation is in particular a successful optimistic
    one, so an exact optimistic "holds" together with a pessimistic or
    anticipative witness is contradictory.  When every agent's awareness
    covers all proposals, the restricted and unrestricted checks coincide
    and their cells must agree.  All cells must be exact.
    """
    violations = []
    count = 0
    for name, cells, saturated in tables:
        count += 1
        for variant in VARIANTS:
            for mode in MODES:
                if (variant, mode) not in cells:
                    raise ValidationError(f"table {name!r} is missing cell {(variant, mode)}")
                if not cells[(variant, mode)].exact:
                    raise ValidationError(
                        f"table {name!r} cell {(variant, mode)} is not exact"
                    )
        for variant in VARIANTS:
            optimistic = cells[(variant, "optimistic")]
            for implied in ("pessimistic", "anticipative"):
                if optimistic.holds and not cells[(variant, implied)].holds:
                    violations.append(
                        {
                            "table": name,
                            "scope": variant,
                            "violation": f"optimistic holds but {implied} has a witness",
                        }
                    )
        if saturated:
            for mode in MODES:
                if cells[("restricted", mode)].holds != cells[("unrestricted", mode)].holds:
                    violations.append(
                        {
                            "table": name,
                            "scope": mode,
                            "violation": "awareness covers all proposals but restricted "
                            "and unrestricted verdicts differ",
                        }
                    )
    return ImplicationReport(violations, count)


# ---------------------------------------------------------------------------
# Exhaustive class-level check for the nomination rule


def check_nomination_fssp_class(
    allocation_rule: AllocationRule,
    model: str,
    mode: str = "pessimistic",
    max_projects: int = 3,
    max_agents: int = 3,
    costs: tuple[int, ...] = (1, 2),
    max_budget: int = 3,
    caps: Caps = Caps(),
) -> PropertyVerdict:
    """Exhaustive unrestricted-manipulation check for the nomination rule.

    Enumerates every instance in the class (project count, cost vector,
    budget), every agent count, every preference order of the manipulator,
    every union of the other agents' proposals, every awareness pool, and
    every deviation.  The nomination shortlist depends on the others'
    proposals only through their union, the allocation rules read only
    score vectors (so the manipulator's position is irrelevant), and the
    other agents' preference orders never enter an exact pessimistic or
    optimistic verdict, which makes this reduced enumeration exhaustive
    for the full class.
    """
    check_model(model)
    check_mode(mode)
    if mode == "anticipative":
        raise ValidationError(
            "the class-level check quantifies ballot profiles; anticipative "
            "verdicts depend on the other agents' preference orders"
        )
    checked = 0
    params = {
        "rule": "nomination",
        "variant": "unrestricted",
        "mode": mode,
        "model": model,
        "max_projects": max_projects,
        "max_agents": max_agents,
        "costs": list(costs),
        "max_budget": max_budget,
    }

    def value(ideal, outcome, instance):
        return allocation_value(model, ideal, outcome, instance)

    for m in range(1, max_projects + 1):
        for cost_vector in itertools.product(costs, repeat=m):
            for budget in range(max(cost_vector), max_budget + 1):
                instance = Instance(
                    [Project(i + 1, c) for i, c in enumerate(cost_vector)], budget
                )
                ids = instance.ids
                pool_cache: dict[tuple, dict] = {}

                def outcomes_for(shortlist, ideal, n):
                    key = (shortlist, ideal, n)
                    if key not in pool_cache:
                        pool_cache[key] = _fstar_outcomes(
                            allocation_rule, instance.restrict(shortlist),
                            n, 0, ideal, model, caps,
                        )
                    return pool_cache[key]

                for n in range(1, max_agents + 1):
                    other_unions = subsets_ascending(ids) if n > 1 else [frozenset()]
                    for ranking in itertools.permutations(ids):
                        for union in other_unions:
                            for pool in subsets_ascending(frozenset(ids) - union):
                                aware = pool | union
                                truthful = ideal_set(instance, ranking, aware)
                                base_short = union | truthful
                                base_ideal = ideal_set(
                                    instance, ranking, base_short
                                )
                                for deviation in subsets_ascending(aware):
                                    if deviation == truthful:
                                        continue
                                    checked += 1
                                    dev_short = union | deviation
                                    ideal = ideal_set(
                                        instance, ranking, base_short | dev_short
                                    )
                                    base = outcomes_for(base_short, base_ideal, n)
                                    dev_ideal = ideal_set(instance, ranking, dev_short)
                                    dev = outcomes_for(dev_short, dev_ideal, n)
                                    base_values = [value(ideal, o, instance) for o in base]
                                    dev_values = [value(ideal, o, instance) for o in dev]
                                    if mode == "pessimistic":
                                        success = (
                                            min(dev_values) >= max(base_values)
                                            and max(dev_values) > min(base_values)
                                        )
                                    else:
                                        success = max(dev_values) > min(base_values)
                                    if success:
                                        witness = {
                                            "kind": "first-stage-manipulation",
                                            "rule": "nomination",
                                            "mode": mode,
                                            "model": model,
                                            "instance": {
                                                "costs": list(cost_vector),
                                                "budget": budget,
                                            },
                                            "agents": n,
                                            "ranking": list(ranking),
                                            "others_union": ids_list(union),
                                            "awareness_pool": ids_list(aware),
                                            "truthful_proposal": ids_list(truthful),
                                            "deviation": ids_list(deviation),
                                            "baseline_shortlist": ids_list(base_short),
                                            "deviation_shortlist": ids_list(dev_short),
                                        }
                                        return PropertyVerdict(
                                            COUNTEREXAMPLE, witness, True, checked, params
                                        )
    return PropertyVerdict(HOLDS, None, True, checked, params)
