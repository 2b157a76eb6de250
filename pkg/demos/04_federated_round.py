"""Walk through one federated fine-tuning run on the demo shell.

Simulates the bundled 6x11 scenario end to end: per-satellite embedding
computation, intra-orbit gather, coordinated downlink of embeddings, cloud
encoding, local head training, and the two aggregation styles (via the
ground segment, or decentralized over inter-orbit laser paths). Prints where
each round spends its time.
"""

import dataclasses
from pathlib import Path

from leoplan import SimulationSetup, build_walker, parse_scenario, simulate_fine_tuning
from leoplan.simkernel import PHASES

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "demo_walker6.json"


def run(scn, mode):
    config = dataclasses.replace(scn.federation, aggregation_mode=mode, rounds=3)
    walker = build_walker(scn.constellation)
    setup = SimulationSetup(stations=scn.ground_stations, link_config=scn.link_config,
                            compute=scn.compute, energy=scn.energy)
    return simulate_fine_tuning(config, walker, scn.workload, setup,
                                seed=scn.seed or 0)


def main():
    scn = parse_scenario(SCENARIO)
    print(f"workload: {scn.workload.samples_per_satellite} samples/sat, "
          f"{scn.workload.embedding_dim}-dim embeddings, "
          f"{scn.workload.head_params} trainable head parameters")

    for mode in ("ground", "decentralized"):
        traces, agg = run(scn, mode)
        print(f"\n{mode} aggregation: {agg.rounds} rounds, "
              f"{agg.total_seconds:.1f} simulated s, "
              f"{agg.total_bits / 1e9:.2f} Gb moved, "
              f"{agg.total_energy_joules:.2f} J, complete={agg.complete}")
        widest = max(len(p) for p in PHASES)
        for phase in PHASES:
            total = agg.phase_second_totals[phase]
            if total == 0.0:
                continue
            share = 100.0 * total / agg.total_seconds
            print(f"  {phase:<{widest}}  {total:9.2f} s  {share:5.1f}%")
        print(f"  round starts: {[f'{t.start_time:.1f}' for t in traces]}")


if __name__ == "__main__":
    main()
