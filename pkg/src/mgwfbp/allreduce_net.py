"""Multi-process ring all-reduce over loopback TCP, and a wall-clock
emulation of the overlapped training iteration it serves.

Workers are separate processes.  They meet at a rank-0 rendezvous socket
that hands every rank the full table of data addresses, then each rank
connects to its right neighbor and accepts its left one, forming a single
cycle.  A collective is 2(N-1) rounds: N-1 reduce-scatter rounds, each
rank summing the segment it receives into its own vector, then N-1
all-gather rounds circulating the reduced segments.  Segmentation is
contiguous and near-equal, remainder elements going to the lowest ranks.

Frames on the wire are a 12-byte little-endian header

    iteration: u32, group_low_layer: u16, segment: u16, payload_bytes: u32

followed by raw little-endian float32 payload.  Both sides derive the
expected frame sizes from their own buffer length, so a length mismatch
between ranks surfaces as a header mismatch, not silent corruption.

The emulation plays one worker of a training loop: a compute thread burns
the profile's forward and per-layer backward delays and enqueues layer
indices as their gradients become ready; the main thread drains the queue
in strictly descending layer order, packs layer payloads into their merge
group's buffer, and all-reduces each group when its lowest layer arrives.
The wall time from forward start to the last group's completion is the
measured iteration time.
"""

from __future__ import annotations

import math
import queue
import select
import socket
import statistics
import struct
import sys
import threading
import time
import traceback
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import get_context

import numpy as np

from .comm_model import Measurement
from .merge_planner import MergePlan
from .model_profile import ModelProfile

_HEADER = struct.Struct("<IHHI")
_F32 = np.dtype("<f4")
_IO_CHUNK = 1 << 20
_DEFAULT_TIMEOUT = 60.0


class ProtocolError(RuntimeError):
    """Wire-level disagreement: bad header, wrong size, or a dead peer."""


@dataclass(frozen=True)
class WorkerConfig:
    """One worker's view of the ring.

    ring_addresses lists every rank's data endpoint in rank order; the
    ring wires rank r to rank (r+1) mod N.  chunk_elements caps the
    payload of a single frame, so oversized segments travel as several
    frames within the same round.
    """

    rank: int
    n_workers: int
    ring_addresses: tuple[tuple[str, int], ...]
    chunk_elements: int = 1 << 22

    def __post_init__(self) -> None:
        if not isinstance(self.n_workers, int) or self.n_workers < 2:
            raise ValueError(f"n_workers must be an int >= 2, got {self.n_workers!r}")
        if not isinstance(self.rank, int) or not 0 <= self.rank < self.n_workers:
            raise ValueError(f"rank must lie in [0, {self.n_workers}), got {self.rank!r}")
        object.__setattr__(self, "ring_addresses", tuple((h, int(p)) for h, p in self.ring_addresses))
        if len(self.ring_addresses) != self.n_workers:
            raise ValueError("need exactly one address per rank")
        if len(set(self.ring_addresses)) != self.n_workers:
            raise ValueError("ring addresses must be unique")
        if not isinstance(self.chunk_elements, int) or self.chunk_elements < 1:
            raise ValueError(f"chunk_elements must be an int >= 1, got {self.chunk_elements!r}")

    @property
    def right_rank(self) -> int:
        return (self.rank + 1) % self.n_workers

    @property
    def left_rank(self) -> int:
        return (self.rank - 1) % self.n_workers


class GradientBuffer:
    """Flat float32 payload covering the layer span [layer_low, layer_high]."""

    __slots__ = ("layer_low", "layer_high", "values")

    def __init__(self, layer_low: int, layer_high: int, values) -> None:
        if not 1 <= layer_low <= layer_high:
            raise ValueError(f"bad layer range [{layer_low}, {layer_high}]")
        self.layer_low = layer_low
        self.layer_high = layer_high
        self.values = np.ascontiguousarray(values, dtype=_F32)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def for_group(cls, profile: ModelProfile, layer_low: int, layer_high: int) -> "GradientBuffer":
        """Zero-filled buffer sized exactly to the group's parameter count."""
        if layer_high > profile.num_layers:
            raise ValueError(f"layer {layer_high} outside profile of {profile.num_layers}")
        counts = profile.param_counts()
        total = sum(counts[layer_low - 1 : layer_high])
        return cls(layer_low, layer_high, np.zeros(total, dtype=_F32))


@dataclass
class TransportCounters:
    """What this worker put on and took off the wire."""

    rounds: int = 0
    frames_sent: int = 0
    frames_received: int = 0
    payload_bytes_sent: int = 0
    payload_bytes_received: int = 0


@dataclass(frozen=True)
class EmulationReport:
    """One worker's measured emulation outcome.

    group_comm_seconds maps each sending group's lowest layer to the mean
    wall time of its all-reduce.  verified is True only if every reduced
    element matched the expected cross-rank sum in every iteration.
    """

    rank: int
    n_workers: int
    iteration_seconds: tuple[float, ...]
    mean_seconds: float
    stddev_seconds: float
    group_comm_seconds: dict[int, float]
    verified: bool
    allreduce_count: int


def _free_port(host: str) -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind((host, 0))
        return s.getsockname()[1]


def _recv_exact(sock: socket.socket, n: int, who: str) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProtocolError(f"{who}: peer closed the connection")
        buf.extend(chunk)
    return bytes(buf)


def _connect_retry(address: tuple[str, int], timeout: float, who: str) -> socket.socket:
    deadline = time.monotonic() + timeout
    while True:
        try:
            return socket.create_connection(address, timeout=2.0)
        except OSError:
            if time.monotonic() > deadline:
                raise ProtocolError(f"{who}: cannot reach {address[0]}:{address[1]}")
            time.sleep(0.02)


def rendezvous(
    rank: int,
    n_workers: int,
    host: str,
    base_port: int,
    data_port: int,
    *,
    timeout: float = 30.0,
) -> tuple[tuple[str, int], ...]:
    """Exchange data ports through a rank-0 meeting point.

    Rank 0 listens on base_port, collects every other rank's data port,
    and sends all of them the full table; returns the ring address table
    in rank order.  Every rank must call this exactly once.
    """
    if not 0 <= rank < n_workers:
        raise ValueError(f"rank {rank} outside [0, {n_workers})")
    who = f"rank {rank}"
    if rank == 0:
        ports = [0] * n_workers
        ports[0] = data_port
        with socket.create_server((host, base_port), backlog=n_workers) as srv:
            srv.settimeout(timeout)
            conns = []
            try:
                for _ in range(n_workers - 1):
                    conn, _ = srv.accept()
                    conn.settimeout(timeout)
                    peer_rank, peer_port = struct.unpack("<II", _recv_exact(conn, 8, who))
                    if not 1 <= peer_rank < n_workers or ports[peer_rank]:
                        raise ProtocolError(f"{who}: bad or duplicate rendezvous rank {peer_rank}")
                    ports[peer_rank] = peer_port
                    conns.append(conn)
                table = struct.pack(f"<{n_workers}I", *ports)
                for conn in conns:
                    conn.sendall(table)
            finally:
                for conn in conns:
                    conn.close()
    else:
        with _connect_retry((host, base_port), timeout, who) as conn:
            conn.settimeout(timeout)
            conn.sendall(struct.pack("<II", rank, data_port))
            table = _recv_exact(conn, 4 * n_workers, who)
            ports = list(struct.unpack(f"<{n_workers}I", table))
    return tuple((host, p) for p in ports)


class RingSession:
    """Open links to both ring neighbors, reusable across collectives.

    The listener must already be bound and listening on this rank's data
    port before the rendezvous distributed its address.  Counters
    accumulate over every call until close().
    """

    def __init__(
        self,
        config: WorkerConfig,
        listener: socket.socket,
        *,
        timeout: float = _DEFAULT_TIMEOUT,
    ) -> None:
        self.config = config
        self.counters = TransportCounters()
        self._timeout = timeout
        who = f"rank {config.rank}"
        self._right = _connect_retry(config.ring_addresses[config.right_rank], timeout, who)
        self._right.sendall(struct.pack("<I", config.rank))
        listener.settimeout(timeout)
        try:
            self._left, _ = listener.accept()
        except socket.timeout:
            self._right.close()
            raise ProtocolError(f"{who}: left neighbor never connected")
        self._left.settimeout(timeout)
        (peer,) = struct.unpack("<I", _recv_exact(self._left, 4, who))
        if peer != config.left_rank:
            self.close()
            raise ProtocolError(f"{who}: expected rank {config.left_rank} on the left, got {peer}")
        for sock in (self._right, self._left):
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sock.setblocking(False)

    def close(self) -> None:
        for sock in (self._right, self._left):
            try:
                sock.close()
            except OSError:
                pass

    def __enter__(self) -> "RingSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _exchange(self, out: bytes, in_nbytes: int) -> bytearray:
        """Full-duplex: push ``out`` rightward while pulling ``in_nbytes``
        from the left.  Interleaving both directions is what keeps the
        ring from deadlocking when payloads exceed socket buffers."""
        who = f"rank {self.config.rank}"
        out_view = memoryview(out)
        sent = 0
        in_buf = bytearray(in_nbytes)
        in_view = memoryview(in_buf)
        got = 0
        deadline = time.monotonic() + self._timeout
        while sent < len(out_view) or got < in_nbytes:
            readers = [self._left] if got < in_nbytes else []
            writers = [self._right] if sent < len(out_view) else []
            readable, writable, _ = select.select(readers, writers, [], 1.0)
            if time.monotonic() > deadline:
                raise ProtocolError(f"{who}: ring exchange timed out")
            if writable:
                try:
                    sent += self._right.send(out_view[sent : sent + _IO_CHUNK])
                except BlockingIOError:
                    pass
            if readable:
                try:
                    n = self._left.recv_into(in_view[got:], min(in_nbytes - got, _IO_CHUNK))
                except BlockingIOError:
                    continue
                if n == 0:
                    raise ProtocolError(f"{who}: left neighbor closed mid-exchange")
                got += n
        return in_buf

    def round_trip(
        self,
        iteration: int,
        group_low: int,
        send_idx: int,
        recv_idx: int,
        send_payload: memoryview,
        recv_nbytes: int,
    ) -> bytearray:
        """One ring round: frame and send one segment, receive and validate
        another.  Returns the received payload bytes."""
        chunk_bytes = self.config.chunk_elements * 4
        out = bytearray()
        offset = 0
        frames_out = 0
        while True:
            piece = send_payload[offset : offset + chunk_bytes]
            out += _HEADER.pack(iteration, group_low, send_idx, len(piece))
            out += piece
            frames_out += 1
            offset += len(piece)
            if offset >= len(send_payload):
                break
        frames_in = max(1, math.ceil(recv_nbytes / chunk_bytes))
        blob = self._exchange(bytes(out), frames_in * _HEADER.size + recv_nbytes)
        who = f"rank {self.config.rank}"
        payload = bytearray(recv_nbytes)
        pos = 0
        filled = 0
        for k in range(frames_in):
            it, low, seg, nbytes = _HEADER.unpack_from(blob, pos)
            pos += _HEADER.size
            expect = min(chunk_bytes, recv_nbytes - filled) if recv_nbytes else 0
            if (it, low, seg, nbytes) != (iteration, group_low, recv_idx, expect):
                raise ProtocolError(
                    f"{who}: expected frame (iter {iteration}, group {group_low}, "
                    f"segment {recv_idx}, {expect} B), got (iter {it}, group {low}, "
                    f"segment {seg}, {nbytes} B); buffer lengths likely disagree"
                )
            payload[filled : filled + nbytes] = blob[pos : pos + nbytes]
            pos += nbytes
            filled += nbytes
        c = self.counters
        c.rounds += 1
        c.frames_sent += frames_out
        c.frames_received += frames_in
        c.payload_bytes_sent += len(send_payload)
        c.payload_bytes_received += recv_nbytes
        return payload


def _segments(n_elements: int, n_parts: int) -> tuple[list[int], list[int]]:
    """Near-equal contiguous split; remainder elements go to the lowest ranks."""
    q, r = divmod(n_elements, n_parts)
    sizes = [q + 1 if i < r else q for i in range(n_parts)]
    offsets = [0] * n_parts
    for i in range(1, n_parts):
        offsets[i] = offsets[i - 1] + sizes[i - 1]
    return sizes, offsets


def ring_allreduce(
    buffer: GradientBuffer,
    config: WorkerConfig,
    session: RingSession,
    *,
    iteration: int = 0,
) -> GradientBuffer:
    """Element-wise sum of equal-length buffers across all ring workers.

    Reduce-scatter then all-gather, N-1 rounds each.  Reduction order is
    fixed by ring position, so results are bit-reproducible run to run.
    All workers must call collectively; buffer.values is updated in place.
    """
    values = buffer.values
    n = config.n_workers
    rank = config.rank
    sizes, offsets = _segments(len(values), n)
    raw = values.view(np.uint8)

    def segment_view(idx: int) -> memoryview:
        start = offsets[idx] * 4
        return memoryview(raw.data)[start : start + sizes[idx] * 4]

    for step in range(n - 1):
        send_idx = (rank - step) % n
        recv_idx = (rank - step - 1) % n
        incoming = session.round_trip(
            iteration, buffer.layer_low, send_idx, recv_idx, segment_view(send_idx), sizes[recv_idx] * 4
        )
        if sizes[recv_idx]:
            seg = values[offsets[recv_idx] : offsets[recv_idx] + sizes[recv_idx]]
            seg += np.frombuffer(incoming, dtype=_F32)
    for step in range(n - 1):
        send_idx = (rank + 1 - step) % n
        recv_idx = (rank - step) % n
        incoming = session.round_trip(
            iteration, buffer.layer_low, send_idx, recv_idx, segment_view(send_idx), sizes[recv_idx] * 4
        )
        if sizes[recv_idx]:
            seg = values[offsets[recv_idx] : offsets[recv_idx] + sizes[recv_idx]]
            seg[:] = np.frombuffer(incoming, dtype=_F32)
    return buffer


def bench_allreduce(
    sizes: list[int],
    config: WorkerConfig,
    session: RingSession,
    *,
    repeats: int = 5,
    warmups: int = 3,
) -> list[Measurement]:
    """Median wall time of one all-reduce at each payload size.

    sizes are byte counts, each a positive multiple of 4.  Every worker
    participates in every round; rank 0 returns the Measurements, other
    ranks return an empty list.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    out: list[Measurement] = []
    for size_i, nbytes in enumerate(sizes):
        if not isinstance(nbytes, int) or nbytes <= 0 or nbytes % 4:
            raise ValueError(f"sizes must be positive multiples of 4 bytes, got {nbytes!r}")
        buf = GradientBuffer(1, 1, np.empty(nbytes // 4, dtype=_F32))
        times = []
        for r in range(warmups + repeats):
            buf.values.fill(float(config.rank + 1))
            start = time.perf_counter()
            ring_allreduce(buf, config, session, iteration=size_i * (warmups + repeats) + r)
            elapsed = time.perf_counter() - start
            if r >= warmups:
                times.append(elapsed)
        if config.rank == 0:
            out.append(Measurement(nbytes=nbytes, seconds=statistics.median(times), n_nodes=config.n_workers))
    return out


def _delay(seconds: float) -> None:
    """Wait seconds of wall time: spin for very short waits, otherwise
    sleep most of it and spin off the tail.  Sleeping keeps concurrent
    workers from fighting over cores; the spin tail absorbs wakeup jitter."""
    if seconds <= 0.0:
        return
    deadline = time.perf_counter() + seconds
    if seconds >= 0.002:
        slack = seconds - 0.0012
        if slack > 0:
            time.sleep(slack)
    while time.perf_counter() < deadline:
        pass


def run_emulation(
    profile: ModelProfile,
    plan: MergePlan | None,
    config: WorkerConfig,
    session: RingSession,
    iterations: int,
    *,
    warmup: int = 2,
) -> EmulationReport:
    """Measure the overlapped iteration on real sockets.

    A compute thread burns the forward delay then each layer's backward
    delay from layer L down to 1, pushing every finished layer's index
    into a queue.  This thread pops indices in that strict order, packs
    the layer's values into its group's buffer, and all-reduces the group
    when its lowest layer arrives; the group containing layer 1 completes
    the iteration.  Buffers hold rank-derived integers so the reduced
    values are exactly checkable; warmup iterations run but are excluded
    from the report.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    n_layers = profile.num_layers
    if plan is None:
        plan = MergePlan(frozenset(), n_layers)
    if plan.num_layers != n_layers:
        raise ValueError("plan does not match the profile's layer count")
    counts = profile.param_counts()
    t_b = profile.backward_times()

    buffers: dict[int, GradientBuffer] = {}
    expected: dict[int, np.ndarray] = {}
    layer_slot: dict[int, tuple[int, int, int]] = {}
    n = config.n_workers
    for low, high in plan.groups():
        buf = GradientBuffer.for_group(profile, low, high)
        buffers[low] = buf
        want = np.empty(len(buf), dtype=_F32)
        offset = 0
        for layer in range(high, low - 1, -1):
            size = counts[layer - 1]
            layer_slot[layer] = (low, offset, size)
            want[offset : offset + size] = float(n * (n + 1) // 2 + n * (layer % 5))
            offset += size
        expected[low] = want

    q: "queue.Queue[int]" = queue.Queue()
    done = threading.Event()
    stop = threading.Event()
    walls: list[float] = []

    def compute_agent() -> None:
        for _ in range(warmup + iterations):
            start = time.perf_counter()
            _delay(profile.forward_time)
            for layer in range(n_layers, 0, -1):
                if stop.is_set():
                    return
                _delay(t_b[layer - 1])
                q.put(layer)
            while not done.wait(0.1):
                if stop.is_set():
                    return
            done.clear()
            walls.append(time.perf_counter() - start)

    comm_times: dict[int, list[float]] = {low: [] for low in buffers}
    verified = True
    reduce_count = 0
    old_interval = sys.getswitchinterval()
    sys.setswitchinterval(5e-4)
    thread = threading.Thread(target=compute_agent, name="compute-agent", daemon=True)
    thread.start()
    try:
        for it in range(warmup + iterations):
            for layer in range(n_layers, 0, -1):
                popped = q.get(timeout=_DEFAULT_TIMEOUT)
                if popped != layer:
                    raise RuntimeError(f"queue discipline broken: expected layer {layer}, got {popped}")
                low, offset, size = layer_slot[layer]
                if size:
                    buffers[low].values[offset : offset + size] = float(config.rank + 1 + layer % 5)
                if layer == low:
                    buf = buffers[low]
                    if len(buf):
                        start = time.perf_counter()
                        ring_allreduce(buf, config, session, iteration=it)
                        elapsed = time.perf_counter() - start
                        reduce_count += 1
                        if it >= warmup:
                            comm_times[low].append(elapsed)
                        if not np.array_equal(buf.values, expected[low]):
                            verified = False
                    if layer == 1:
                        done.set()
        thread.join(timeout=_DEFAULT_TIMEOUT)
        if thread.is_alive():
            raise RuntimeError("compute agent failed to finish")
    finally:
        stop.set()
        done.set()
        sys.setswitchinterval(old_interval)
        thread.join(timeout=5.0)
    kept = walls[warmup:]
    return EmulationReport(
        rank=config.rank,
        n_workers=n,
        iteration_seconds=tuple(kept),
        mean_seconds=statistics.fmean(kept),
        stddev_seconds=statistics.stdev(kept) if len(kept) > 1 else 0.0,
        group_comm_seconds={low: statistics.fmean(ts) for low, ts in comm_times.items() if ts},
        verified=verified,
        allreduce_count=reduce_count,
    )


def open_ring(
    rank: int,
    n_workers: int,
    *,
    host: str = "127.0.0.1",
    base_port: int,
    chunk_elements: int = 1 << 22,
    timeout: float = _DEFAULT_TIMEOUT,
) -> tuple[WorkerConfig, RingSession]:
    """Bind a data port, rendezvous, and wire up both neighbors.

    Callable directly by manually launched workers; run_workers does this
    in every process it spawns.
    """
    listener = socket.create_server((host, 0), backlog=2)
    try:
        data_port = listener.getsockname()[1]
        addresses = rendezvous(rank, n_workers, host, base_port, data_port, timeout=timeout)
        config = WorkerConfig(
            rank=rank, n_workers=n_workers, ring_addresses=addresses, chunk_elements=chunk_elements
        )
        session = RingSession(config, listener, timeout=timeout)
    finally:
        listener.close()
    return config, session


def _worker_main(result_q, rank, n_workers, host, base_port, chunk_elements, timeout, task) -> None:
    try:
        config, session = open_ring(
            rank, n_workers, host=host, base_port=base_port, chunk_elements=chunk_elements, timeout=timeout
        )
        try:
            value = task(config, session)
        finally:
            session.close()
        result_q.put((rank, None, value))
    except BaseException:
        result_q.put((rank, traceback.format_exc(), None))


def run_workers(
    n_workers: int,
    task,
    *,
    host: str = "127.0.0.1",
    base_port: int | None = None,
    chunk_elements: int = 1 << 22,
    timeout: float = 120.0,
):
    """Spawn n_workers processes, open the ring in each, and run
    ``task(config, session)`` collectively; returns {rank: result}.

    task must be picklable (a module-level function, or functools.partial
    over one).  Any worker error aborts the whole group with its traceback.
    """
    if n_workers < 2:
        raise ValueError("n_workers must be >= 2")
    if base_port is None:
        base_port = _free_port(host)
    ctx = get_context("spawn")
    result_q = ctx.Queue()
    procs = [
        ctx.Process(
            target=_worker_main,
            args=(result_q, rank, n_workers, host, base_port, chunk_elements, timeout, task),
            daemon=True,
        )
        for rank in range(n_workers)
    ]
    for p in procs:
        p.start()
    results: dict[int, object] = {}
    errors: list[tuple[int, str]] = []
    deadline = time.monotonic() + timeout
    try:
        while len(results) + len(errors) < n_workers and time.monotonic() < deadline:
            try:
                rank, err, value = result_q.get(timeout=0.25)
            except queue.Empty:
                # a silently dead child will never report; fail fast
                dead = [p.exitcode for p in procs if p.exitcode not in (None, 0)]
                if dead:
                    break
                continue
            if err is None:
                results[rank] = value
            else:
                errors.append((rank, err))
    finally:
        for p in procs:
            p.join(timeout=5.0)
        for p in procs:
            if p.is_alive():
                p.terminate()
                p.join(timeout=5.0)
    if errors:
        detail = "\n".join(f"--- worker {rank} ---\n{err}" for rank, err in errors)
        raise RuntimeError(f"{len(errors)} of {n_workers} workers failed:\n{detail}")
    if len(results) < n_workers:
        missing = sorted(set(range(n_workers)) - set(results))
        raise RuntimeError(f"workers {missing} never reported (crash or timeout)")
    return results


def _bench_task(config: WorkerConfig, session: RingSession, *, sizes, repeats, warmups):
    return bench_allreduce(list(sizes), config, session, repeats=repeats, warmups=warmups)


def _emulation_task(config: WorkerConfig, session: RingSession, *, profile, plan, iterations, warmup):
    return run_emulation(profile, plan, config, session, iterations, warmup=warmup)


def bench_local(
    n_workers: int,
    sizes: list[int],
    *,
    repeats: int = 5,
    warmups: int = 3,
    host: str = "127.0.0.1",
    base_port: int | None = None,
    timeout: float = 120.0,
) -> list[Measurement]:
    """Spawn a local ring and benchmark the given payload sizes."""
    results = run_workers(
        n_workers,
        partial(_bench_task, sizes=tuple(sizes), repeats=repeats, warmups=warmups),
        host=host,
        base_port=base_port,
        timeout=timeout,
    )
    return results[0]


def emulate_local(
    n_workers: int,
    profile: ModelProfile,
    plan: MergePlan | None,
    iterations: int,
    *,
    warmup: int = 2,
    host: str = "127.0.0.1",
    base_port: int | None = None,
    timeout: float = 300.0,
) -> dict[int, EmulationReport]:
    """Spawn a local ring and measure the emulated iteration on it."""
    results = run_workers(
        n_workers,
        partial(_emulation_task, profile=profile, plan=plan, iterations=iterations, warmup=warmup),
        host=host,
        base_port=base_port,
        timeout=timeout,
    )
    return {rank: report for rank, report in results.items()}
