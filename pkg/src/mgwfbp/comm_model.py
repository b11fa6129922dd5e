"""Linear cost model for synchronized all-reduce operations.

The time to all-reduce a message of M bytes across a fixed set of nodes is
modeled as

    T(M) = a + b * M

where ``a`` (seconds) is the startup overhead of one collective and ``b``
(seconds per byte) is the combined transfer and reduction cost.  The model
is deliberately size-additive in a useful way: sending two messages costs
one extra startup compared with sending their concatenation,

    T(M1) + T(M2) - T(M1 + M2) = a

which is what makes merging small gradient messages attractive in the
first place.

(a, b) can be obtained three ways, all provided here:

1. analytically, from the alpha/beta/gamma parameters of a concrete
   collective algorithm (``derive_ab``),
2. by ordinary least squares over timing measurements (``fit_ab``),
3. by writing the two numbers down (``CommModel(a, b)``).
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence


class Collective(Enum):
    """Collective all-reduce algorithms with known cost decompositions."""

    BINARY_TREE = "bt"
    RECURSIVE_DOUBLING = "rd"
    RECURSIVE_HALVING_DOUBLING = "rhd"
    RING = "ring"


def _check_nonneg(name: str, value: float) -> None:
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class CommModel:
    """Linear all-reduce cost model T(M) = a + b * M.

    a: startup seconds per collective, independent of message size.
    b: seconds per message byte.
    """

    a: float
    b: float

    def __post_init__(self) -> None:
        _check_nonneg("a", self.a)
        _check_nonneg("b", self.b)

    def allreduce_time(self, nbytes: int | float) -> float:
        return allreduce_time(nbytes, self)

    def dumps(self) -> str:
        """Serialize as a one-line key-value record, e.g. ``{a: 0.0012, b: 1.5e-09}``."""
        return "{a: %s, b: %s}" % (repr(self.a), repr(self.b))

    @classmethod
    def loads(cls, text: str) -> "CommModel":
        m = re.fullmatch(r"\s*\{\s*a\s*:\s*([^,\s}]+)\s*,\s*b\s*:\s*([^,\s}]+)\s*\}\s*", text)
        if m is None:
            raise ValueError(f"not a comm model record: {text!r}")
        return cls(a=float(m.group(1)), b=float(m.group(2)))


def allreduce_time(nbytes: int | float, model: CommModel) -> float:
    """Predicted seconds to all-reduce a message of ``nbytes`` bytes.

    Zero-size messages are allowed and cost the bare startup ``a``.  Whether
    a zero-size message is sent at all is the caller's decision; the model
    only prices messages it is asked about.
    """
    if nbytes < 0:
        raise ValueError(f"message size must be >= 0, got {nbytes!r}")
    return model.a + model.b * nbytes


def p2p_time(alpha: float, beta: float, nbytes: int | float) -> float:
    """Point-to-point transfer time alpha + beta * nbytes."""
    _check_nonneg("alpha", alpha)
    _check_nonneg("beta", beta)
    if nbytes < 0:
        raise ValueError(f"message size must be >= 0, got {nbytes!r}")
    return alpha + beta * nbytes


def gamma_per_byte(gamma_per_element: float, element_bytes: int = 4) -> float:
    """Convert a per-element reduction cost to the per-byte form used here.

    All per-byte coefficients in this module price raw bytes.  Reduction
    cost is often quoted per element; divide by the element width once, at
    ingestion, rather than remembering to do it at every call site.
    """
    if element_bytes <= 0:
        raise ValueError("element_bytes must be positive")
    return gamma_per_element / element_bytes


@dataclass(frozen=True)
class CollectiveParams:
    """alpha/beta/gamma parameterization of one collective on n_nodes workers.

    alpha: per-message startup latency between a pair of nodes (seconds).
    beta:  per-byte transfer time between a pair of nodes (seconds/byte).
    gamma: per-byte local reduction time (seconds/byte).  See
           ``gamma_per_byte`` if your gamma is quoted per element.
    """

    algorithm: Collective
    n_nodes: int
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        if not isinstance(self.n_nodes, int) or self.n_nodes < 2:
            raise ValueError(f"n_nodes must be an int >= 2, got {self.n_nodes!r}")
        _check_nonneg("alpha", self.alpha)
        _check_nonneg("beta", self.beta)
        _check_nonneg("gamma", self.gamma)
        if self.algorithm is not Collective.RING and self.n_nodes & (self.n_nodes - 1):
            raise ValueError(
                f"{self.algorithm.value} requires a power-of-two node count, got {self.n_nodes}"
            )

    def with_nodes(self, n_nodes: int) -> "CollectiveParams":
        return replace(self, n_nodes=n_nodes)


def derive_ab(params: CollectiveParams) -> CommModel:
    """Collapse a collective's alpha/beta/gamma costs into (a, b).

    Per-algorithm decomposition of one all-reduce over N nodes:

        binary tree:                a = 2*log2(N)*alpha   b = log2(N)*(2*beta + gamma)
        recursive doubling:         a = log2(N)*alpha     b = log2(N)*(beta + gamma)
        recursive halving+doubling: a = 2*log2(N)*alpha   b = 2*beta - (2*beta + gamma)/N + gamma
        ring:                       a = 2*(N-1)*alpha     b = (2*(N-1)/N)*beta + ((N-1)/N)*gamma

    The integer factor is computed first so each coefficient is a single
    rounding away from its exact value.
    """
    n = params.n_nodes
    alpha, beta, gamma = params.alpha, params.beta, params.gamma
    if params.algorithm is Collective.RING:
        a = (2 * (n - 1)) * alpha
        b = (2 * (n - 1) / n) * beta + ((n - 1) / n) * gamma
        return CommModel(a=a, b=b)
    steps = n.bit_length() - 1  # exact log2 for power-of-two n
    if params.algorithm is Collective.BINARY_TREE:
        return CommModel(a=(2 * steps) * alpha, b=steps * (2 * beta + gamma))
    if params.algorithm is Collective.RECURSIVE_DOUBLING:
        return CommModel(a=steps * alpha, b=steps * (beta + gamma))
    if params.algorithm is Collective.RECURSIVE_HALVING_DOUBLING:
        return CommModel(a=(2 * steps) * alpha, b=2 * beta - (2 * beta + gamma) / n + gamma)
    raise ValueError(f"unknown collective {params.algorithm!r}")


@dataclass(frozen=True)
class Measurement:
    """One timed all-reduce: message size in bytes, elapsed seconds, node count."""

    nbytes: int
    seconds: float
    n_nodes: int

    def __post_init__(self) -> None:
        if not isinstance(self.nbytes, int) or self.nbytes <= 0:
            raise ValueError(f"nbytes must be an int > 0, got {self.nbytes!r}")
        if not math.isfinite(self.seconds) or self.seconds <= 0:
            raise ValueError(f"seconds must be finite and > 0, got {self.seconds!r}")
        if not isinstance(self.n_nodes, int) or self.n_nodes < 2:
            raise ValueError(f"n_nodes must be an int >= 2, got {self.n_nodes!r}")


def fit_ab(samples: Sequence[Measurement]) -> CommModel:
    """Least-squares fit of T(M) = a + b * M over timing samples.

    Requires at least two samples with distinct sizes, all taken on the
    same node count (one model describes one cluster size).  A negative
    fitted slope means the data contradicts the model, so it is refused
    rather than clamped; a slightly negative intercept is measurement
    noise around zero startup and is clamped to 0.
    """
    if len(samples) < 2:
        raise ValueError("need at least two measurements to fit (a, b)")
    node_counts = {s.n_nodes for s in samples}
    if len(node_counts) != 1:
        raise ValueError(f"measurements span several node counts {sorted(node_counts)}; fit one at a time")
    xs = [float(s.nbytes) for s in samples]
    ys = [s.seconds for s in samples]
    if len(set(xs)) < 2:
        raise ValueError("need measurements at two or more distinct sizes")
    n = len(xs)
    xbar = math.fsum(xs) / n
    ybar = math.fsum(ys) / n
    sxx = math.fsum((x - xbar) ** 2 for x in xs)
    sxy = math.fsum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    b = sxy / sxx
    if b < 0:
        raise ValueError(f"fitted per-byte cost is negative ({b!r}); timings shrink with size")
    a = ybar - b * xbar
    return CommModel(a=max(0.0, a), b=b)


_CSV_HEADER = ["bytes", "seconds", "n_nodes"]


def save_measurements(samples: Iterable[Measurement], dest) -> None:
    """Write measurements as CSV with header ``bytes,seconds,n_nodes``."""
    own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
    fh = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for s in samples:
            writer.writerow([s.nbytes, repr(s.seconds), s.n_nodes])
    finally:
        if own:
            fh.close()


def load_measurements(source) -> list[Measurement]:
    """Read measurements from CSV produced by ``save_measurements``."""
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    fh = open(source, "r", newline="") if own else source
    try:
        if isinstance(fh.read(0), bytes):  # tolerate binary file objects
            fh = io.TextIOWrapper(fh, encoding="utf-8")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _CSV_HEADER:
            raise ValueError(f"expected header {','.join(_CSV_HEADER)!r}, got {header!r}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                out.append(
                    Measurement(nbytes=int(row[0]), seconds=float(row[1]), n_nodes=int(row[2]))
                )
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        return out
    finally:
        if own:
            fh.close()
