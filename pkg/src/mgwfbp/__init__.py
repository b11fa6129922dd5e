"""Planning, simulation, and measurement of merged-gradient communication
scheduling for synchronous data-parallel SGD."""

from .allreduce_net import (
    EmulationReport,
    GradientBuffer,
    ProtocolError,
    RingSession,
    TransportCounters,
    WorkerConfig,
    bench_allreduce,
    bench_local,
    emulate_local,
    open_ring,
    rendezvous,
    ring_allreduce,
    run_emulation,
    run_workers,
)
from .comm_model import (
    Collective,
    CollectiveParams,
    CommModel,
    Measurement,
    allreduce_time,
    derive_ab,
    fit_ab,
    gamma_per_byte,
    load_measurements,
    p2p_time,
    save_measurements,
)
from .merge_planner import (
    MergePlan,
    PlannerState,
    apply_merge,
    brute_force_plan,
    calculate_comm_start,
    find_merge_plan,
    load_plan,
    save_plan,
)
from .model_profile import (
    LayerProfile,
    ModelProfile,
    googlenet_like,
    load_profile,
    resnet50_like,
    save_profile,
    synth_profile,
)
from .schedule_sim import (
    OverlapCase,
    Strategy,
    SweepResult,
    SweepRow,
    Timeline,
    backward_start_times,
    classify_case,
    comm_start_times,
    crossing_node_count,
    group_comm_times,
    layer_comm_times,
    simulate_mgwfbp,
    simulate_naive,
    simulate_sync_easgd,
    simulate_wfbp,
    speedup,
    sweep,
)

__version__ = "0.1.0"
