import numpy as np
import pytest

from leoplan import (
    ContactWindow,
    DownlinkState,
    FlowNetwork,
    GroundStation,
    SatelliteId,
    build_flow_network,
    check_feasible,
    max_flow,
    schedule_downlink,
)
from leoplan.sgl_flow import SINK, SOURCE

from oracles import exhaustive_min_cut, random_layered_network, random_window_timeline


def test_add_edge_accumulates_parallel_capacity():
    net = FlowNetwork()
    net.add_edge("a", "b", 1.0)
    net.add_edge("a", "b", 0.5)
    assert net.capacity[("a", "b")] == 1.5
    assert net.adjacency["a"] == ["b"]
    with pytest.raises(ValueError, match="nonnegative"):
        net.add_edge("a", "c", -1.0)


def test_max_flow_chain():
    net = FlowNetwork()
    net.add_edge(SOURCE, "m", 1.0)
    net.add_edge("m", SINK, 0.4)
    res = max_flow(net)
    assert abs(res.value - 0.4) < 1e-12
    assert abs(res.flows[(SOURCE, "m")] - 0.4) < 1e-12


def test_max_flow_diamond():
    # Min cut is the sink side {a->t, b->t} = 0.9; the cross edge carries
    # a's surplus 0.1 over to b.
    net = FlowNetwork()
    net.add_edge(SOURCE, "a", 0.5)
    net.add_edge(SOURCE, "b", 0.5)
    net.add_edge("a", SINK, 0.3)
    net.add_edge("b", SINK, 0.6)
    net.add_edge("a", "b", 1.0)
    res = max_flow(net)
    assert abs(res.value - 0.9) < 1e-12
    assert abs(res.flows[("a", "b")] - 0.1) < 1e-12


def test_max_flow_needs_residual_pushback():
    # The first (shortest) augmenting path runs s-u-v-t, but the optimum
    # routes around u->v entirely; reaching 2.0 requires cancelling that
    # flow through the reverse edge.
    net = FlowNetwork()
    net.add_edge(SOURCE, "u", 1.0)
    net.add_edge("u", "v", 1.0)
    net.add_edge("v", SINK, 1.0)
    net.add_edge(SOURCE, "x", 1.0)
    net.add_edge("x", "v", 1.0)
    net.add_edge("u", "y", 1.0)
    net.add_edge("y", SINK, 1.0)
    res = max_flow(net)
    assert abs(res.value - 2.0) < 1e-12
    assert res.flows[("u", "v")] == 0.0


def test_max_flow_disconnected():
    net = FlowNetwork()
    net.add_edge(SOURCE, "a", 1.0)
    net.add_edge("b", SINK, 1.0)
    res = max_flow(net)
    assert res.value == 0.0
    assert res.flows[(SOURCE, "a")] == 0.0


def test_max_flow_matches_exhaustive_min_cut():
    rng = np.random.default_rng(314)
    for _ in range(120):
        net, caps = random_layered_network(rng)
        res = max_flow(net, "s", "t")
        want = exhaustive_min_cut(caps, "s", "t")
        assert abs(res.value - want) < 1e-9


def test_max_flow_deterministic():
    rng = np.random.default_rng(7)
    net, _ = random_layered_network(rng)
    a = max_flow(net, "s", "t")
    b = max_flow(net, "s", "t")
    assert a.flows == b.flows and a.value == b.value


def test_check_feasible_rejects_bad_flows():
    net = FlowNetwork()
    net.add_edge(SOURCE, "a", 1.0)
    net.add_edge("a", SINK, 1.0)
    from leoplan import FlowAssignment

    with pytest.raises(ValueError, match="violates capacity"):
        check_feasible(net, FlowAssignment({(SOURCE, "a"): 2.0, ("a", SINK): 2.0}, 2.0))
    with pytest.raises(ValueError, match="imbalance"):
        check_feasible(net, FlowAssignment({(SOURCE, "a"): 1.0, ("a", SINK): 0.2}, 1.0))
    with pytest.raises(ValueError, match="does not match net inflow"):
        check_feasible(net, FlowAssignment({(SOURCE, "a"): 0.5, ("a", SINK): 0.5}, 0.9))


def test_build_flow_network_layering():
    s00, s01, s10 = SatelliteId(0, 0), SatelliteId(0, 1), SatelliteId(1, 0)
    windows = [
        ContactWindow(s00, "gs-a", 0.0, 60.0, 1e6),
        ContactWindow(s01, "gs-a", 0.0, 60.0, 2e6),
        ContactWindow(s10, "gs-b", 0.0, 60.0, 4e6),
    ]
    stations = (GroundStation("gs-a", 0.0, 0.0, dedicated_rate_bps=8e6),
                GroundStation("gs-b", 0.0, 90.0, dedicated_rate_bps=8e6))
    state = DownlinkState({0: 1.0, 1: 0.25})
    model = 2.4e8
    net = build_flow_network(windows, state, 60.0, model, stations)
    # Orbit cap is applied per satellite edge, not shared across the orbit.
    assert net.capacity[(SOURCE, s00)] == 1.0
    assert net.capacity[(SOURCE, s01)] == 1.0
    assert net.capacity[(SOURCE, s10)] == 0.25
    assert abs(net.capacity[(s00, "gs-a")] - 1e6 * 60 / model) < 1e-15
    assert abs(net.capacity[("gs-a", SINK)] - 8e6 * 60 / model) < 1e-15
    assert abs(net.capacity[("gs-b", SINK)] - 2.0) < 1e-15


def test_build_flow_network_errors():
    s = SatelliteId(2, 0)
    w = [ContactWindow(s, "gs", 0.0, 60.0, 1e6)]
    st = (GroundStation("gs", 0.0, 0.0),)
    with pytest.raises(ValueError, match="orbit 2 with no tracked model"):
        build_flow_network(w, DownlinkState({0: 1.0}), 60.0, 1e8, st)
    with pytest.raises(ValueError, match="unknown station 'gs-x'"):
        build_flow_network([ContactWindow(s, "gs-x", 0.0, 60.0, 1e6)],
                           DownlinkState({2: 1.0}), 60.0, 1e8, st)
    with pytest.raises(ValueError, match="window_duration"):
        build_flow_network(w, DownlinkState({2: 1.0}), 0.0, 1e8, st)
    with pytest.raises(ValueError, match="model_bits"):
        build_flow_network(w, DownlinkState({2: 1.0}), 60.0, 0.0, st)
    with pytest.raises(ValueError, match="outside"):
        DownlinkState({0: 1.5}).validate()


def test_schedule_downlink_two_epochs():
    # One satellite, rate 1e7, model 1.2e9: each 60 s epoch moves half the model.
    s = SatelliteId(0, 0)
    windows = [ContactWindow(s, "gs", 0.0, 600.0, 1e7)]
    stations = (GroundStation("gs", 0.0, 0.0, dedicated_rate_bps=1e9),)
    res = schedule_downlink(windows, 1.2e9, stations, horizon=600.0)
    assert res.complete
    assert res.epochs_used == 2
    assert abs(res.epochs[0].delivered[0] - 0.5) < 1e-12
    assert abs(res.epochs[1].delivered[0] - 0.5) < 1e-12
    assert res.state.remaining[0] == 0.0


def test_schedule_downlink_partial_window_overlap():
    # Window covers only 30 s of the first epoch, so it delivers half as much.
    s = SatelliteId(0, 0)
    windows = [ContactWindow(s, "gs", 30.0, 60.0, 1e7)]
    stations = (GroundStation("gs", 0.0, 0.0),)
    res = schedule_downlink(windows, 1.2e9, stations, horizon=60.0)
    assert not res.complete
    assert abs(res.epochs[0].delivered[0] - 0.25) < 1e-12


def test_schedule_downlink_counts_idle_epochs():
    s = SatelliteId(0, 0)
    windows = [ContactWindow(s, "gs", 120.0, 240.0, 1e7)]
    stations = (GroundStation("gs", 0.0, 0.0),)
    res = schedule_downlink(windows, 6e8, stations, horizon=600.0)
    assert res.complete
    assert res.epochs_used == 3  # epochs 0-1 idle, epoch 2 finishes at t=180
    assert res.epochs[0].delivered == {0: 0.0}
    assert res.epochs[0].assignment.value == 0.0


def test_schedule_downlink_dedicated_bottleneck():
    # Two satellites share one station whose ground link caps each epoch at
    # 0.6 model; SGL edges allow 0.5 apiece, so per-epoch splits are 0.5/0.1.
    s0, s1 = SatelliteId(0, 0), SatelliteId(1, 0)
    windows = [ContactWindow(s0, "gs", 0.0, 600.0, 1e7),
               ContactWindow(s1, "gs", 0.0, 600.0, 1e7)]
    stations = (GroundStation("gs", 0.0, 0.0, dedicated_rate_bps=1.2e7),)
    res = schedule_downlink(windows, 1.2e9, stations, horizon=600.0)
    assert abs(sum(res.epochs[0].delivered.values()) - 0.6) < 1e-12
    assert res.complete
    assert res.epochs_used == 4
    total = sum(sum(e.delivered.values()) for e in res.epochs)
    assert abs(total - 2.0) < 1e-9


def test_schedule_downlink_orbit_cap_is_per_satellite():
    # The remaining fraction caps each satellite's source edge separately, so
    # two visible satellites of one orbit can deliver up to 2.0 in an epoch;
    # the remaining fraction still clamps at zero.
    s0, s1 = SatelliteId(0, 0), SatelliteId(0, 1)
    windows = [ContactWindow(s0, "gs-a", 0.0, 600.0, 1e9),
               ContactWindow(s1, "gs-b", 0.0, 600.0, 1e9)]
    stations = (GroundStation("gs-a", 0.0, 0.0, dedicated_rate_bps=10e9),
                GroundStation("gs-b", 0.0, 90.0, dedicated_rate_bps=10e9))
    res = schedule_downlink(windows, 1.2e9, stations, horizon=600.0)
    assert res.complete
    assert res.epochs_used == 1
    assert abs(res.epochs[0].delivered[0] - 2.0) < 1e-9
    assert res.state.remaining[0] == 0.0


def test_schedule_downlink_per_orbit_dict():
    s = SatelliteId(0, 0)
    windows = [ContactWindow(s, "gs", 0.0, 600.0, 1e7)]
    stations = (GroundStation("gs", 0.0, 0.0),)
    res = schedule_downlink(windows, {0: 1.2e9, 1: 1.2e9}, stations, horizon=600.0)
    # Orbit 1 has no windows, so it can never finish.
    assert not res.complete
    assert res.state.remaining[0] == 0.0
    assert res.state.remaining[1] == 1.0
    with pytest.raises(ValueError, match="must be uniform"):
        schedule_downlink(windows, {0: 1.2e9, 1: 2.4e9}, stations, horizon=600.0)


def test_schedule_downlink_resume_state():
    s = SatelliteId(0, 0)
    windows = [ContactWindow(s, "gs", 0.0, 600.0, 1e7)]
    stations = (GroundStation("gs", 0.0, 0.0),)
    first = schedule_downlink(windows, 1.2e9, stations, horizon=60.0)
    assert not first.complete
    assert abs(first.state.remaining[0] - 0.5) < 1e-12
    second = schedule_downlink(windows, 1.2e9, stations, horizon=600.0,
                               initial_state=first.state, start_time=60.0)
    assert second.complete
    assert second.epochs_used == 1
    assert second.state.elapsed_windows == 2


def test_schedule_downlink_argument_errors():
    s = SatelliteId(0, 0)
    windows = [ContactWindow(s, "gs", 0.0, 600.0, 1e7)]
    stations = (GroundStation("gs", 0.0, 0.0),)
    with pytest.raises(ValueError, match="epoch_seconds"):
        schedule_downlink(windows, 1e9, stations, horizon=600.0, epoch_seconds=0.0)
    with pytest.raises(ValueError, match="horizon"):
        schedule_downlink(windows, 1e9, stations, horizon=0.0)
    with pytest.raises(ValueError, match="model_bits"):
        schedule_downlink(windows, 0.0, stations, horizon=600.0)


def test_coordinated_never_slower_than_single_link():
    from oracles import best_single_link_epochs

    rng = np.random.default_rng(11)
    horizon, epoch = 600.0, 60.0
    for _ in range(30):
        windows, stations = random_window_timeline(rng)
        if not windows:
            continue
        orbits = sorted({w.satellite.orbit_index for w in windows})
        model = 4e8
        res = schedule_downlink(windows, model, stations, horizon=horizon,
                                epoch_seconds=epoch, orbits=orbits)
        single_epochs, single_complete = best_single_link_epochs(
            windows, model, stations, horizon, epoch, orbits)
        if single_complete:
            assert res.complete
            assert res.epochs_used <= single_epochs
