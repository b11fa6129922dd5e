"""Single-iteration timeline simulation of gradient communication strategies.

Time 0 is the start of the forward pass.  Backward runs layer L down to
layer 1 without gaps, so layer l's backward starts at

    tau_b[L] = t_f                tau_b[l] = tau_b[l+1] + t_b[l+1]

and its gradient is ready at tau_b[l] + t_b[l].  All-reduces share one
channel and are issued in gradient order (descending layer index), so a
layer's communication starts no earlier than the previous one ends:

    tau_c[L] = tau_b[L] + t_b[L]
    tau_c[l] = max(tau_c[l+1] + t_c[l+1], tau_b[l] + t_b[l])

The iteration ends when layer 1's communication ends (next forward needs
every reduced gradient), which the same recursion yields as
tau_c[1] + t_c[1].

Four strategies are simulated, differing only in which messages exist:

    naive:     per-layer messages, all communication after backward ends
    wfbp:      per-layer messages, each issued as its gradient is ready
    synceasgd: one message of the whole model, after backward ends
    mgwfbp:    per-group messages given a merge plan, wait-free

Layers (or merged groups) with zero parameters send nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

from .comm_model import CollectiveParams, CommModel, allreduce_time, derive_ab
from .model_profile import ModelProfile

if TYPE_CHECKING:  # import only for annotations; merge_planner imports us at runtime
    from .merge_planner import MergePlan


class Strategy(Enum):
    NAIVE = "naive"
    WFBP = "wfbp"
    SYNC_EASGD = "synceasgd"
    MGWFBP = "mgwfbp"


class OverlapCase(Enum):
    """How WFBP-style overlap plays out for a profile and cost model.

    CASE_1: every message is hidden by the next backward computation.
    CASE_2: some message outlasts its window, but the accumulated slack
            still lets layer 1's message start as soon as it is ready, so
            only that final message is exposed.
    CASE_3: communication backlogs past the end of backward.
    """

    CASE_1 = "case1"
    CASE_2 = "case2"
    CASE_3 = "case3"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class Timeline:
    """Per-layer schedule of one iteration.  Position i holds layer i+1.

    tau_b: backward start times.
    tau_c: communication start times (notional for layers that send nothing).
    t_c:   per-layer communication durations (0 for non-senders).
    comm_end: tau_c + t_c, elementwise.
    t_iter: iteration span, comm_end of layer 1.
    compute_time: forward plus backward span, tau_b[1] + t_b[1].
    t_c_no: non-overlapped communication, t_iter - compute_time.
    """

    strategy: Strategy
    tau_b: tuple[float, ...]
    tau_c: tuple[float, ...]
    t_c: tuple[float, ...]
    comm_end: tuple[float, ...]
    t_iter: float
    compute_time: float
    t_c_no: float
    case: OverlapCase

    def events(self, profile: ModelProfile) -> list[tuple[int, str, float, float]]:
        """Flatten to (layer, kind, start_s, end_s) rows, kind in {backward, comm}."""
        if profile.num_layers != len(self.tau_b):
            raise ValueError("profile does not match timeline length")
        rows: list[tuple[int, str, float, float]] = []
        t_b = profile.backward_times()
        for i in range(len(self.tau_b) - 1, -1, -1):
            rows.append((i + 1, "backward", self.tau_b[i], self.tau_b[i] + t_b[i]))
        for i in range(len(self.tau_c) - 1, -1, -1):
            if self.t_c[i] > 0.0:
                rows.append((i + 1, "comm", self.tau_c[i], self.comm_end[i]))
        rows.sort(key=lambda r: (r[2], r[0]))
        return rows


def backward_start_times(profile: ModelProfile) -> list[float]:
    """tau_b per layer: layer L starts backward when forward ends, no gaps after."""
    t_b = profile.backward_times()
    n = profile.num_layers
    tau = [0.0] * n
    tau[n - 1] = profile.forward_time
    for i in range(n - 2, -1, -1):
        tau[i] = tau[i + 1] + t_b[i + 1]
    return tau


def comm_start_times(t_c: Sequence[float], t_b: Sequence[float], tau_b: Sequence[float]) -> list[float]:
    """tau_c per layer: gradient readiness vs. the single serialized channel."""
    n = len(t_c)
    if not (n == len(t_b) == len(tau_b)):
        raise ValueError("t_c, t_b, tau_b must have equal lengths")
    if n == 0:
        raise ValueError("need at least one layer")
    tau = [0.0] * n
    tau[n - 1] = tau_b[n - 1] + t_b[n - 1]
    for i in range(n - 2, -1, -1):
        ready = tau_b[i] + t_b[i]
        freed = tau[i + 1] + t_c[i + 1]
        tau[i] = freed if freed > ready else ready
    return tau


def layer_comm_times(profile: ModelProfile, model: CommModel) -> list[float]:
    """Per-layer all-reduce durations; zero-parameter layers send nothing."""
    eb = profile.element_bytes
    return [allreduce_time(eb * p, model) if p > 0 else 0.0 for p in profile.param_counts()]


def _merged_set(plan: "MergePlan | Iterable[int] | None") -> frozenset[int]:
    if plan is None:
        return frozenset()
    merged = getattr(plan, "merged_layers", plan)
    return frozenset(merged)


def group_comm_times(profile: ModelProfile, model: CommModel, plan) -> list[float]:
    """Per-layer durations after merging: a layer in the plan hands its
    message to its predecessor and sends nothing itself."""
    merged = _merged_set(plan)
    n = profile.num_layers
    if merged and (min(merged) < 2 or max(merged) > n):
        raise ValueError(f"merged layers {sorted(merged)} outside 2..{n}")
    masses = profile.param_counts()
    for l in range(n, 1, -1):
        if l in merged:
            masses[l - 2] += masses[l - 1]
            masses[l - 1] = 0
    eb = profile.element_bytes
    return [allreduce_time(eb * m, model) if m > 0 else 0.0 for m in masses]


def _finish(
    strategy: Strategy,
    profile: ModelProfile,
    t_c: list[float],
    *,
    overlap: bool,
) -> Timeline:
    t_b = profile.backward_times()
    tau_b = backward_start_times(profile)
    compute_time = tau_b[0] + t_b[0]
    if overlap:
        tau_c = comm_start_times(t_c, t_b, tau_b)
    else:
        # everything queues after backward fully drains
        n = profile.num_layers
        tau_c = [0.0] * n
        tau_c[n - 1] = compute_time
        for i in range(n - 2, -1, -1):
            tau_c[i] = tau_c[i + 1] + t_c[i + 1]
    comm_end = [s + d for s, d in zip(tau_c, t_c)]
    t_iter = comm_end[0]
    t_c_no = t_iter - compute_time
    if not overlap:
        case = OverlapCase.NOT_APPLICABLE
    elif all(t_c[i] <= t_b[i - 1] for i in range(1, profile.num_layers)):
        case = OverlapCase.CASE_1
    elif tau_c[0] == tau_b[0] + t_b[0]:
        case = OverlapCase.CASE_2
    else:
        case = OverlapCase.CASE_3
    return Timeline(
        strategy=strategy,
        tau_b=tuple(tau_b),
        tau_c=tuple(tau_c),
        t_c=tuple(t_c),
        comm_end=tuple(comm_end),
        t_iter=t_iter,
        compute_time=compute_time,
        t_c_no=t_c_no,
        case=case,
    )


def simulate_naive(profile: ModelProfile, model: CommModel) -> Timeline:
    """Per-layer messages with no overlap: communication starts after backward."""
    return _finish(Strategy.NAIVE, profile, layer_comm_times(profile, model), overlap=False)


def simulate_wfbp(profile: ModelProfile, model: CommModel) -> Timeline:
    """Wait-free backward propagation: each layer's message goes out as soon
    as its gradient exists and the channel is free."""
    return _finish(Strategy.WFBP, profile, layer_comm_times(profile, model), overlap=True)


def simulate_sync_easgd(profile: ModelProfile, model: CommModel) -> Timeline:
    """Single whole-model message issued when backward ends.

    Pays one startup total, but forfeits all overlap.
    """
    n = profile.num_layers
    t_c = [0.0] * n
    total = profile.total_params
    if total > 0:
        t_c[0] = allreduce_time(profile.element_bytes * total, model)
    return _finish(Strategy.SYNC_EASGD, profile, t_c, overlap=True)


def simulate_mgwfbp(profile: ModelProfile, model: CommModel, plan) -> Timeline:
    """Wait-free schedule over merged groups.

    ``plan`` is a MergePlan (or bare iterable of layer indices): each listed
    layer folds its message into the next-lower layer's, so a group is sent
    once, when its lowest layer's gradient is ready.  An empty plan is
    exactly WFBP; merging every layer from 2 up is exactly the single
    whole-model message.
    """
    return _finish(Strategy.MGWFBP, profile, group_comm_times(profile, model, plan), overlap=True)


def classify_case(profile: ModelProfile, model: CommModel) -> OverlapCase:
    """Which overlap regime per-layer wait-free communication lands in."""
    return simulate_wfbp(profile, model).case


def speedup(n_nodes: int, profile: ModelProfile, timeline: Timeline) -> float:
    """Throughput of n_nodes workers under this schedule, relative to one
    worker that only computes.  Ranges (0, n_nodes]; the compute baseline
    comes from the timeline so a communication-free schedule scores exactly
    n_nodes."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if profile.num_layers != len(timeline.tau_b):
        raise ValueError("profile does not match timeline length")
    return n_nodes * timeline.compute_time / timeline.t_iter


_ALL_STRATEGIES = (Strategy.NAIVE, Strategy.WFBP, Strategy.SYNC_EASGD, Strategy.MGWFBP)


@dataclass(frozen=True)
class SweepRow:
    n_nodes: int
    strategy: Strategy
    t_iter: float
    speedup: float
    t_c_no: float


@dataclass(frozen=True)
class SweepResult:
    profile_name: str
    rows: tuple[SweepRow, ...]

    def t_iter(self, n_nodes: int, strategy: Strategy) -> float:
        for row in self.rows:
            if row.n_nodes == n_nodes and row.strategy is strategy:
                return row.t_iter
        raise KeyError(f"no row for n_nodes={n_nodes}, strategy={strategy.value}")


def sweep(
    profile: ModelProfile,
    params: CollectiveParams,
    n_nodes_list: Sequence[int],
    strategies: Sequence[Strategy] = _ALL_STRATEGIES,
    *,
    freeze_plan: bool = False,
) -> SweepResult:
    """Simulate strategies across cluster sizes.

    (a, b) is derived from ``params`` at each node count.  The merge plan
    is likewise recomputed per node count, because the startup cost that
    drives merging grows with the cluster; pass ``freeze_plan=True`` to
    plan once at the first node count and reuse it, which is how one
    measures what a stale plan costs.
    """
    from .merge_planner import find_merge_plan  # here to avoid an import cycle

    if not n_nodes_list:
        raise ValueError("n_nodes_list must be non-empty")
    frozen = None
    rows: list[SweepRow] = []
    for n in n_nodes_list:
        model = derive_ab(params.with_nodes(n))
        plan = None
        if Strategy.MGWFBP in strategies:
            if freeze_plan:
                if frozen is None:
                    frozen = find_merge_plan(profile, model)
                plan = frozen
            else:
                plan = find_merge_plan(profile, model)
        for strategy in strategies:
            if strategy is Strategy.NAIVE:
                tl = simulate_naive(profile, model)
            elif strategy is Strategy.WFBP:
                tl = simulate_wfbp(profile, model)
            elif strategy is Strategy.SYNC_EASGD:
                tl = simulate_sync_easgd(profile, model)
            elif strategy is Strategy.MGWFBP:
                tl = simulate_mgwfbp(profile, model, plan)
            else:
                raise ValueError(f"unknown strategy {strategy!r}")
            rows.append(
                SweepRow(
                    n_nodes=n,
                    strategy=strategy,
                    t_iter=tl.t_iter,
                    speedup=speedup(n, profile, tl),
                    t_c_no=tl.t_c_no,
                )
            )
    return SweepResult(profile_name=profile.name, rows=tuple(rows))


def crossing_node_count(result: SweepResult) -> int | None:
    """Smallest swept node count where the whole-model message beats
    per-layer wait-free messages, or None if the ordering never flips.

    Startup grows with the cluster while per-byte cost saturates, so
    per-layer messaging wins small clusters and loses large ones; this
    reports where the balance tips within the swept range.
    """
    n_values = sorted({row.n_nodes for row in result.rows})
    previous_wfbp_ahead = None
    for n in n_values:
        try:
            wfbp = result.t_iter(n, Strategy.WFBP)
            sync = result.t_iter(n, Strategy.SYNC_EASGD)
        except KeyError:
            continue
        if sync < wfbp and previous_wfbp_ahead:
            return n
        previous_wfbp_ahead = wfbp <= sync
    return None
