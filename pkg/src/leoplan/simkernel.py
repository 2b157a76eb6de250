"""Deterministic round-level simulation of split federated fine-tuning.

Each round walks a fixed phase sequence: satellites embed their local
samples, each orbit gathers the embeddings over its ring, the concatenated
features go down to the cloud encoder and come back, satellites train their
small head locally, orbits aggregate heads over their rings, and the global
model is combined either through the ground (coordinated max-flow downlink
and uplink) or fully in space over disjoint inter-orbit paths, then spread
back around each ring. Latency, bits over radio links, compute, and energy
are accounted per phase; a round that cannot finish a transfer inside the
horizon is flagged incomplete and truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .collective import RingSpec, plan_all_gather, plan_all_reduce
from .constellation import (LIGHT_SPEED_KM_S, LinkConfig, WalkerConstellation,
                            contact_windows, snapshot)
from .interorbit import build_weighted_graph, parallel_transfer_time, select_disjoint_paths
from .orchestration import EnergyModel
from .sgl_flow import schedule_downlink

GROUND = "ground"
DECENTRALIZED = "decentralized"

PHASES = (
    "embedding_compute",
    "intra_orbit_gather",
    "sgl_down",
    "cloud_encode",
    "sgl_up",
    "local_train",
    "intra_orbit_aggregate",
    "inter_orbit_or_global_aggregate",
    "broadcast",
)


def payload_bits(batch_size: int, embedding_dim: int, precision_bits: int) -> int:
    """Size of one batch of output embeddings, in bits."""
    if batch_size <= 0 or embedding_dim <= 0 or precision_bits <= 0:
        raise ValueError("batch_size, embedding_dim, and precision_bits must be positive")
    return int(batch_size) * int(embedding_dim) * int(precision_bits)


def head_fraction(head_params: int, embedding_params: int, total_params: int) -> float:
    """Fraction of the full model that lives (and trains) on the satellites."""
    if total_params <= 0:
        raise ValueError("total_params must be positive")
    if head_params < 0 or embedding_params < 0:
        raise ValueError("parameter counts must be nonnegative")
    if head_params + embedding_params > total_params:
        raise ValueError("satellite-side parameters exceed the total")
    return (head_params + embedding_params) / total_params


@dataclass(frozen=True)
class WorkloadSpec:
    """Sizes of the split model and the per-round training workload."""

    samples_per_satellite: int
    batch_size: int
    embedding_dim: int
    precision_bits: int
    head_params: int
    embedding_params: int
    encoder_params: int
    local_epochs: int = 1
    flops_per_sample_head: float = 1e6

    def validate(self) -> None:
        if self.samples_per_satellite <= 0:
            raise ValueError("samples_per_satellite must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.embedding_dim <= 0:
            raise ValueError("embedding_dim must be positive")
        if self.precision_bits not in (16, 32, 64):
            raise ValueError("precision_bits must be 16, 32, or 64")
        if min(self.head_params, self.embedding_params, self.encoder_params) < 0:
            raise ValueError("parameter counts must be nonnegative")
        if self.local_epochs <= 0:
            raise ValueError("local_epochs must be positive")
        if self.flops_per_sample_head < 0:
            raise ValueError("flops_per_sample_head must be nonnegative")

    @property
    def embedding_bits_per_satellite(self) -> int:
        return self.samples_per_satellite * self.embedding_dim * self.precision_bits

    @property
    def head_bits(self) -> int:
        return self.head_params * self.precision_bits


@dataclass(frozen=True)
class FederationConfig:
    rounds: int = 1
    intra_orbit_agg_rounds: int = 1
    aggregation_mode: str = GROUND
    epoch_seconds: float = 60.0
    horizon_seconds: float = 7200.0
    window_step_seconds: float = 1.0
    freeze_topology: bool = False

    def validate(self) -> None:
        if self.rounds <= 0:
            raise ValueError("rounds must be positive")
        if self.intra_orbit_agg_rounds <= 0:
            raise ValueError("intra_orbit_agg_rounds must be positive")
        if self.aggregation_mode not in (GROUND, DECENTRALIZED):
            raise ValueError(f"aggregation_mode must be '{GROUND}' or '{DECENTRALIZED}'")
        if self.epoch_seconds <= 0 or self.horizon_seconds <= 0:
            raise ValueError("epoch_seconds and horizon_seconds must be positive")
        if self.window_step_seconds <= 0:
            raise ValueError("window_step_seconds must be positive")


@dataclass(frozen=True)
class ComputeModel:
    satellite_flops_per_s: float = 1e12
    cloud_flops_per_s: float = 100e12

    def validate(self) -> None:
        if self.satellite_flops_per_s <= 0 or self.cloud_flops_per_s <= 0:
            raise ValueError("compute throughputs must be positive")


@dataclass(frozen=True)
class SimulationSetup:
    """Everything around the constellation: stations, rates, compute, energy."""

    stations: tuple = ()
    link_config: LinkConfig = field(default_factory=LinkConfig)
    compute: ComputeModel = field(default_factory=ComputeModel)
    energy: EnergyModel = field(default_factory=EnergyModel)


@dataclass
class RoundTrace:
    round_index: int
    start_time: float
    phase_seconds: dict
    phase_bits: dict
    phase_flops: dict
    total_seconds: float
    energy_joules: float
    complete: bool
    ground_delivered_bits: float


@dataclass
class RunAggregate:
    rounds: int
    total_seconds: float
    total_bits: float
    total_flops: float
    total_energy_joules: float
    complete: bool
    phase_second_totals: dict


def _ring_spread_seconds(workload: WorkloadSpec, constellation: WalkerConstellation,
                         link_config: LinkConfig) -> float:
    """Store-and-forward circulation of the head around one ring."""
    s = constellation.spec.sats_per_orbit
    if s < 2:
        return 0.0
    chord_km = 2.0 * constellation.radius_km * math.sin(math.pi / s)
    hop = workload.head_bits / link_config.intra_orbit_rate_bps + chord_km / LIGHT_SPEED_KM_S
    return (s - 1) * hop


def simulate_round(
    config: FederationConfig,
    constellation: WalkerConstellation,
    workload: WorkloadSpec,
    setup: SimulationSetup,
    round_index: int = 0,
    seed: int = 0,
    start_time: float = 0.0,
) -> RoundTrace:
    """Simulate one federated round starting at start_time.

    The seed is accepted for interface stability; every phase is deterministic,
    so identical arguments always produce identical traces.
    """
    del seed
    config.validate()
    workload.validate()
    setup.compute.validate()
    setup.energy.validate()
    spec = constellation.spec
    P, S = spec.num_orbits, spec.sats_per_orbit
    n_sats = P * S
    samples = workload.samples_per_satellite

    seconds = {p: 0.0 for p in PHASES}
    bits = {p: 0.0 for p in PHASES}
    flops = {p: 0.0 for p in PHASES}
    complete = True
    delivered_ground_bits = 0.0
    now = start_time

    def window_start() -> float:
        return spec.epoch if config.freeze_topology else now

    def flow_phase(phase: str, model_bits_per_orbit: float) -> bool:
        """Run a coordinated SGL transfer; returns False when it misses the horizon."""
        nonlocal now
        if not setup.stations:
            seconds[phase] = config.horizon_seconds
            now += config.horizon_seconds
            return False
        windows = contact_windows(
            constellation, setup.stations, config.horizon_seconds,
            step=config.window_step_seconds, link_config=setup.link_config,
            start=window_start())
        result = schedule_downlink(
            windows, model_bits_per_orbit, setup.stations, config.horizon_seconds,
            epoch_seconds=config.epoch_seconds, start_time=window_start(),
            orbits=range(P))
        elapsed = result.epochs_used * config.epoch_seconds
        delivered = sum(sum(e.delivered.values()) for e in result.epochs)
        seconds[phase] = elapsed if result.complete else config.horizon_seconds
        bits[phase] += delivered * model_bits_per_orbit
        now += seconds[phase]
        return result.complete

    intra_ring = RingSpec.uniform(S, setup.link_config.intra_orbit_rate_bps) if S >= 2 else None

    # Embedding computation on every satellite in parallel.
    embed_flops = 2.0 * workload.embedding_params * samples
    seconds["embedding_compute"] = embed_flops / setup.compute.satellite_flops_per_s
    flops["embedding_compute"] = embed_flops * n_sats
    now += seconds["embedding_compute"]

    # Each orbit concatenates its embeddings over the ring.
    if intra_ring is not None:
        gather = plan_all_gather(intra_ring, [workload.embedding_bits_per_satellite] * S)
        seconds["intra_orbit_gather"] = gather.completion_time
        bits["intra_orbit_gather"] = float(P * gather.total_bits_sent)
        now += gather.completion_time

    orbit_embedding_bits = float(S * workload.embedding_bits_per_satellite)
    ok = flow_phase("sgl_down", orbit_embedding_bits)
    delivered_ground_bits = bits["sgl_down"]
    if not ok:
        return _finish_trace(round_index, start_time, seconds, bits, flops, False,
                             delivered_ground_bits, setup.energy)

    encode_flops = 2.0 * workload.encoder_params * samples * n_sats
    seconds["cloud_encode"] = encode_flops / setup.compute.cloud_flops_per_s
    flops["cloud_encode"] = encode_flops
    now += seconds["cloud_encode"]

    if not flow_phase("sgl_up", orbit_embedding_bits):
        return _finish_trace(round_index, start_time, seconds, bits, flops, False,
                             delivered_ground_bits, setup.energy)

    train_flops = workload.flops_per_sample_head * samples * workload.local_epochs
    seconds["local_train"] = train_flops / setup.compute.satellite_flops_per_s
    flops["local_train"] = train_flops * n_sats
    now += seconds["local_train"]

    if intra_ring is not None and workload.head_bits > 0:
        reduce = plan_all_reduce(intra_ring, workload.head_bits)
        seconds["intra_orbit_aggregate"] = config.intra_orbit_agg_rounds * reduce.completion_time
        bits["intra_orbit_aggregate"] = float(
            P * config.intra_orbit_agg_rounds * reduce.total_bits_sent)
        now += seconds["intra_orbit_aggregate"]

    if config.aggregation_mode == GROUND:
        if not flow_phase("inter_orbit_or_global_aggregate", float(workload.head_bits)):
            return _finish_trace(round_index, start_time, seconds, bits, flops, False,
                                 delivered_ground_bits, setup.energy)
        if not flow_phase("broadcast", float(workload.head_bits)):
            return _finish_trace(round_index, start_time, seconds, bits, flops, False,
                                 delivered_ground_bits, setup.energy)
        spread = _ring_spread_seconds(workload, constellation, setup.link_config)
        seconds["broadcast"] += spread
        bits["broadcast"] += float(P * max(S - 1, 0) * workload.head_bits)
        now += spread
    else:
        # Sweep the accumulating head forward across orbits, then back.
        agg = 0.0
        stages = ([(p, p + 1) for p in range(P - 1)]
                  + [(p, p - 1) for p in range(P - 1, 0, -1)])
        if stages:
            topo = snapshot(constellation, window_start(), setup.link_config)
            graph = build_weighted_graph(topo)
            for src, dst in stages:
                paths = select_disjoint_paths(graph, src, dst)
                if len(paths) == 0:
                    seconds["inter_orbit_or_global_aggregate"] = config.horizon_seconds
                    return _finish_trace(round_index, start_time, seconds, bits, flops,
                                         False, delivered_ground_bits, setup.energy)
                agg += parallel_transfer_time(paths, workload.head_bits)
                bits["inter_orbit_or_global_aggregate"] += float(workload.head_bits)
        seconds["inter_orbit_or_global_aggregate"] = agg
        now += agg
        seconds["broadcast"] = _ring_spread_seconds(workload, constellation, setup.link_config)
        bits["broadcast"] = float(P * max(S - 1, 0) * workload.head_bits)
        now += seconds["broadcast"]

    return _finish_trace(round_index, start_time, seconds, bits, flops, complete,
                         delivered_ground_bits, setup.energy)


def _finish_trace(round_index, start_time, seconds, bits, flops, complete,
                  delivered_ground_bits, energy_model: EnergyModel) -> RoundTrace:
    total = sum(seconds.values())
    per_bit = energy_model.e_tx_j_per_bit + energy_model.e_rx_j_per_bit
    energy = per_bit * sum(bits.values()) + energy_model.e_flop_j * sum(flops.values())
    return RoundTrace(round_index, start_time, dict(seconds), dict(bits), dict(flops),
                      total, energy, complete, delivered_ground_bits)


def simulate_fine_tuning(
    config: FederationConfig,
    constellation: WalkerConstellation,
    workload: WorkloadSpec,
    setup: SimulationSetup,
    seed: int = 0,
):
    """Run config.rounds federated rounds back to back.

    Returns (traces, RunAggregate); the simulated clock of round k+1 starts
    where round k ended.
    """
    config.validate()
    traces = []
    t = constellation.spec.epoch
    for r in range(config.rounds):
        trace = simulate_round(config, constellation, workload, setup,
                               round_index=r, seed=seed, start_time=t)
        traces.append(trace)
        t = trace.start_time + trace.total_seconds

    phase_totals = {p: sum(tr.phase_seconds[p] for tr in traces) for p in PHASES}
    agg = RunAggregate(
        rounds=len(traces),
        total_seconds=sum(tr.total_seconds for tr in traces),
        total_bits=sum(sum(tr.phase_bits.values()) for tr in traces),
        total_flops=sum(sum(tr.phase_flops.values()) for tr in traces),
        total_energy_joules=sum(tr.energy_joules for tr in traces),
        complete=all(tr.complete for tr in traces),
        phase_second_totals=phase_totals,
    )
    return traces, agg
