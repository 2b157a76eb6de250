"""Walk through inter-orbit routing and the coordinated downlink.

First selects edge-disjoint minimum-delay paths between two orbits of the
demo shell and prices a parallel model transfer across them. Then schedules
a coordinated satellite-to-ground delivery where every visible link may
carry a different fraction of each orbit's model in each 60 s epoch.
"""

from pathlib import Path

from leoplan import (
    build_walker,
    build_weighted_graph,
    contact_windows,
    parallel_transfer_time,
    parse_scenario,
    schedule_downlink,
    select_disjoint_paths,
    snapshot,
)

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "demo_walker6.json"


def main():
    scn = parse_scenario(SCENARIO)
    walker = build_walker(scn.constellation)
    head_bits = scn.workload.head_bits

    topo = snapshot(walker, 0.0, scn.link_config)
    graph = build_weighted_graph(topo)
    paths = select_disjoint_paths(graph, 0, 3)
    print(f"edge-disjoint paths from orbit 0 to orbit 3 at t=0: {len(paths)}")
    for path, bottleneck in zip(paths.paths, paths.bottlenecks):
        hops = " -> ".join(s.label for s in path)
        print(f"  {hops}  (bottleneck {bottleneck / 1e9:.0f} Gbps)")
    seconds = parallel_transfer_time(paths, head_bits)
    print(f"striping the {head_bits / 1e6:.1f} Mb trainable head across them "
          f"takes {seconds * 1e3:.3f} ms")

    windows = contact_windows(walker, scn.ground_stations,
                              scn.federation.horizon_seconds,
                              step=scn.federation.window_step_seconds,
                              link_config=scn.link_config)
    result = schedule_downlink(windows, head_bits, scn.ground_stations,
                               scn.federation.horizon_seconds,
                               epoch_seconds=scn.federation.epoch_seconds,
                               orbits=range(scn.constellation.num_orbits))
    print(f"\ncoordinated downlink of one head per orbit "
          f"({len(scn.ground_stations)} stations, "
          f"{scn.federation.epoch_seconds:.0f} s epochs): "
          f"complete={result.complete} in {result.epochs_used} epochs")
    for ep in result.epochs[:3]:
        parts = ", ".join(f"orbit {o}: {frac:.2f}"
                          for o, frac in sorted(ep.delivered.items()) if frac > 0)
        print(f"  epoch {ep.epoch_index}: flow {ep.assignment.value:.2f} "
              f"model-fractions ({parts})")


if __name__ == "__main__":
    main()
