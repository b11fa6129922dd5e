"""Merged-gradient planning: which layers should share one all-reduce.

Sending layer l's gradient separately costs a startup ``a`` that merging
into layer l-1's message would spare.  Merging is worthwhile exactly when
the channel would anyway sit on layer l's message past the moment layer
l-1's gradient shows up, give or take that startup:

    merge l into l-1  iff  tau_b[l-2] - tau_c[l] < a

where tau_b[l-2] is when layer l-1's gradient is ready (the backward start
of the layer below it, extended to a virtual tau_b[0] for l = 2) and
tau_c[l] is when layer l's message could start.  The planner sweeps l from
L down to 2 applying that test, folding merged messages downward and
recomputing communication starts after every acceptance, so each decision
sees the schedule the earlier ones produced.  The sweep is O(L^2).

Every accepted merge is a strict local improvement, so the result never
iterates slower than plain per-layer wait-free communication.  It is not
always the global minimum, though: a locally sound merge drags its mass
along every later group, and when some later group start is bound by the
compute schedule rather than the channel, the carried bytes surface as
pure added time while the startup they were supposed to save is absorbed
into waiting anyway.  ``brute_force_plan`` enumerates all plans to expose
such gaps on small instances; see the planner tests for archived cases.

Merging strictly ties when the startup is zero or the layer has nothing
pending to send, so those merges are declined: plans stay minimal and a
zero-startup model always yields the empty plan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .comm_model import CommModel, allreduce_time
from .model_profile import ModelProfile
from .schedule_sim import (
    backward_start_times,
    comm_start_times,
    layer_comm_times,
)

calculate_comm_start = comm_start_times


@dataclass(frozen=True)
class MergePlan:
    """Layers whose gradients ride along with the next-lower layer.

    merged_layers is a subset of {2..num_layers}: layer 1 terminates the
    backward pass, so it always heads its own message and never merges.
    The empty plan is valid and means plain per-layer communication.
    """

    merged_layers: frozenset[int]
    num_layers: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "merged_layers", frozenset(self.merged_layers))
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        for l in self.merged_layers:
            if not isinstance(l, int) or l < 2 or l > self.num_layers:
                raise ValueError(f"merged layer {l!r} outside 2..{self.num_layers}")

    def groups(self) -> list[tuple[int, int]]:
        """Contiguous (low, high) layer ranges that communicate together,
        ascending by layer; the low layer is the one that sends."""
        out: list[tuple[int, int]] = []
        low = 1
        for l in range(1, self.num_layers + 1):
            if l + 1 > self.num_layers or (l + 1) not in self.merged_layers:
                out.append((low, l))
                low = l + 1
        return out

    def head_of(self, layer: int) -> int:
        """Lowest layer of the group containing ``layer`` (the sender)."""
        if not 1 <= layer <= self.num_layers:
            raise ValueError(f"layer {layer} outside 1..{self.num_layers}")
        while layer in self.merged_layers:
            layer -= 1
        return layer


def save_plan(plan: MergePlan, dest) -> None:
    """Write a plan as a sorted JSON list of merged layer indices."""
    text = json.dumps(sorted(plan.merged_layers)) + "\n"
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


def load_plan(source, num_layers: int) -> MergePlan:
    """Read a plan written by ``save_plan``; the layer count comes from the
    profile the plan belongs to."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        raw = source.read()
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        data = json.loads(raw)
    if not isinstance(data, list) or not all(isinstance(x, int) for x in data):
        raise ValueError("plan file must hold a JSON list of integers")
    return MergePlan(merged_layers=frozenset(data), num_layers=num_layers)


@dataclass
class PlannerState:
    """Working arrays the sweep mutates: pending message mass per layer and
    the communication time each layer currently pays.  Position i holds
    layer i+1."""

    model: CommModel
    element_bytes: int
    params: list[int]
    t_c: list[float]

    @classmethod
    def from_profile(cls, profile: ModelProfile, model: CommModel) -> "PlannerState":
        return cls(
            model=model,
            element_bytes=profile.element_bytes,
            params=profile.param_counts(),
            t_c=layer_comm_times(profile, model),
        )


def apply_merge(state: PlannerState, layer: int) -> None:
    """Fold layer's pending message into the layer below it.

    The layer itself stops communicating; the layer below re-prices its
    message with the combined mass.  Caller recomputes tau_c afterwards.
    """
    i = layer - 1
    if i < 1 or i >= len(state.params):
        raise ValueError(f"cannot merge layer {layer} of {len(state.params)}")
    state.params[i - 1] += state.params[i]
    state.params[i] = 0
    state.t_c[i] = 0.0
    mass = state.params[i - 1]
    state.t_c[i - 1] = allreduce_time(state.element_bytes * mass, state.model) if mass > 0 else 0.0


def find_merge_plan(profile: ModelProfile, model: CommModel) -> MergePlan:
    """Sweep layers L..2, merging whenever waiting for the next gradient
    would cost less than another startup.

    A zero startup makes every merge a tie at best, so the plan is empty by
    construction; likewise a layer with no pending mass has nothing to
    merge and is skipped rather than recorded.  Merging into a layer that
    sends nothing is also skipped: no message exists below, so there is no
    startup to save, and re-heading the message at the silent layer can
    only delay its start.
    """
    n = profile.num_layers
    if model.a == 0.0:
        return MergePlan(frozenset(), n)
    t_b = profile.backward_times()
    tau_b = backward_start_times(profile)
    # the merge test needs tau_b of layer l-2, which for l = 2 is a virtual
    # layer 0 whose backward would start when layer 1's ends
    virtual_tau_b0 = tau_b[0] + t_b[0]
    state = PlannerState.from_profile(profile, model)
    tau_c = comm_start_times(state.t_c, t_b, tau_b)
    merged: set[int] = set()
    for layer in range(n, 1, -1):
        if state.params[layer - 1] == 0 or state.params[layer - 2] == 0:
            continue
        below_ready = tau_b[layer - 3] if layer >= 3 else virtual_tau_b0
        if below_ready - tau_c[layer - 1] < model.a:
            apply_merge(state, layer)
            merged.add(layer)
            tau_c = comm_start_times(state.t_c, t_b, tau_b)
    return MergePlan(frozenset(merged), n)


def _iteration_time(
    ready: list[float],
    params: list[int],
    element_bytes: int,
    a: float,
    b: float,
    mask: int,
) -> float:
    """Iteration span for the merge set encoded in ``mask`` (bit l-2 set
    means layer l merges).  Collapsed single pass over group heads; agrees
    bit for bit with the full timeline recursion because intermediate
    readiness maxima are absorbed by the head's (readiness grows toward
    layer 1) and float max is exact."""
    prev_end = 0.0
    mass = 0
    for i in range(len(params) - 1, 0, -1):
        mass += params[i]
        if (mask >> (i - 1)) & 1:
            continue
        if mass:
            start = prev_end if prev_end > ready[i] else ready[i]
            prev_end = start + (a + b * (element_bytes * mass))
            mass = 0
    mass += params[0]
    start = prev_end if prev_end > ready[0] else ready[0]
    if mass:
        return start + (a + b * (element_bytes * mass))
    return start


def brute_force_plan(profile: ModelProfile, model: CommModel, max_layers: int = 16) -> MergePlan:
    """Exhaustive reference: try every subset of {2..L} and keep the best.

    Exponential (2^(L-1) schedules), hence the guard; raise ``max_layers``
    deliberately if you must.  Ties go to the plan that merges fewer
    layers, then to the lexicographically smallest set, so the result is
    deterministic and never merges without profit.
    """
    n = profile.num_layers
    if n > max_layers:
        raise ValueError(f"{n} layers need 2^{n - 1} schedules; raise max_layers past {max_layers} to allow")
    t_b = profile.backward_times()
    tau_b = backward_start_times(profile)
    ready = [tb + s for tb, s in zip(t_b, tau_b)]
    params = profile.param_counts()
    eb = profile.element_bytes
    a, b = model.a, model.b
    best_mask = 0
    best_key: tuple[float, int, tuple[int, ...]] | None = None
    for mask in range(1 << (n - 1)):
        t = _iteration_time(ready, params, eb, a, b, mask)
        if best_key is not None and t > best_key[0]:
            continue
        layers = tuple(k + 2 for k in range(n - 1) if (mask >> k) & 1)
        key = (t, len(layers), layers)
        if best_key is None or key < best_key:
            best_key = key
            best_mask = mask
    merged = frozenset(k + 2 for k in range(n - 1) if (best_mask >> k) & 1)
    return MergePlan(merged, n)
