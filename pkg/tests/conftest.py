"""Shared builders for the test suite.

The random-instance generators are frozen: the acceptance suite archives
counterexamples it finds, so the distribution (and the seeds used by the
tests) must stay put for those archives to stay reproducible.
"""

import math
import random

from mgwfbp import CommModel, LayerProfile, ModelProfile

ACCEPTANCE_SEED = 20260818

_criterion_lines: dict[int, str] = {}


def record_criterion(num: int, ok: bool, detail: str) -> None:
    """One verdict line per acceptance criterion, echoed into the run's
    terminal summary so the lines survive pytest's output capture."""
    line = f"CRITERION {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    _criterion_lines[num] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for num in sorted(_criterion_lines):
            terminalreporter.write_line(_criterion_lines[num])


def log_uniform(rng: random.Random, lo: float, hi: float) -> float:
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def make_profile(params, t_b, t_f, element_bytes=4, name="case") -> ModelProfile:
    layers = tuple(
        LayerProfile(index=i + 1, params=p, backward_time=t)
        for i, (p, t) in enumerate(zip(params, t_b))
    )
    return ModelProfile(name=name, layers=layers, forward_time=t_f, element_bytes=element_bytes)


def draw_instance(rng: random.Random, max_layers: int = 12):
    """One random planning instance: positive layer sizes spanning four
    orders of magnitude, backward times from 0.1 ms to 20 ms, and (a, b)
    wide enough to produce fully hidden, partially hidden, and
    channel-bound schedules."""
    n = rng.randint(2, max_layers)
    params = [max(1, round(log_uniform(rng, 1e2, 5e6))) for _ in range(n)]
    t_b = [log_uniform(rng, 1e-4, 2e-2) for _ in range(n)]
    t_f = log_uniform(rng, 1e-3, 5e-2)
    profile = make_profile(params, t_b, t_f, name=f"rand-{n}")
    model = CommModel(a=log_uniform(rng, 1e-6, 1e-2), b=log_uniform(rng, 1e-10, 1e-8))
    return profile, model


def draw_mixed_instance(rng: random.Random, max_layers: int = 12):
    """Like draw_instance but roughly a quarter of the layers carry no
    parameters, exercising the silent-layer paths."""
    profile, model = draw_instance(rng, max_layers)
    params = [0 if rng.random() < 0.25 else p for p in profile.param_counts()]
    if sum(params) == 0:
        params[rng.randrange(len(params))] = 1000
    return make_profile(params, profile.backward_times(), profile.forward_time), model


def worked_instance():
    """Four equal layers: t_f=4, each backward 2, each message 2.5 seconds
    (1.5 startup + 1.0 transfer).  Hand-checkable end to end: iteration
    times are naive 22, per-layer wait-free 16, single message 17.5, and
    merging layer 2 alone gives the 15.5 minimum."""
    profile = make_profile([1, 1, 1, 1], [2.0, 2.0, 2.0, 2.0], 4.0, name="worked-4")
    return profile, CommModel(a=1.5, b=0.25)


# A five-layer instance where the greedy sweep is beaten by exhaustive
# search: merging {3,4,5} looks locally sound, but dragging the two heavy
# top layers down past layer 2 surfaces their transfer as pure tail time,
# while {2,3,4} keeps layer 5 solo and hides more.  Found by randomized
# search against the brute-force oracle; kept as a regression pin.
GREEDY_GAP_WITNESS = dict(
    params=[12855, 221, 596, 2428895, 3315117],
    t_b=[
        0.002519027849492765,
        0.001506512706693733,
        0.0006124641463250938,
        0.0009339864222867493,
        0.0001508714477365246,
    ],
    t_f=0.008874705779014651,
    a=0.0023296062054062156,
    b=4.332181912040887e-09,
)


def greedy_gap_instance():
    w = GREEDY_GAP_WITNESS
    return make_profile(w["params"], w["t_b"], w["t_f"], name="greedy-gap"), CommModel(a=w["a"], b=w["b"])
