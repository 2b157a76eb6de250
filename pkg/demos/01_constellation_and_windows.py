"""Walk through the constellation geometry layer.

Builds the 6x11 Walker shell used by the bundled demo scenario, shows which
inter-satellite links exist at epoch, and lists the first ground-contact
windows for an equatorial station. Everything printed here is derived from
the orbit geometry alone; run it twice and the numbers do not move.
"""

from leoplan import (
    ConstellationSpec,
    GroundStation,
    LinkConfig,
    LinkKind,
    build_walker,
    contact_windows,
    snapshot,
)


def main():
    spec = ConstellationSpec(num_orbits=6, sats_per_orbit=11, altitude_km=550.0,
                             inclination_deg=53.0, phasing_factor=1)
    walker = build_walker(spec)
    print(f"shell: {spec.num_orbits} orbits x {spec.sats_per_orbit} satellites "
          f"at {spec.altitude_km:.0f} km, inclination {spec.inclination_deg:.0f} deg")
    print(f"orbital radius {walker.radius_km:.1f} km, period {walker.period:.1f} s")

    config = LinkConfig()
    topo = snapshot(walker, 0.0, config)
    intra = topo.links_of_kind(LinkKind.INTRA_ORBIT_ISL)
    inter = topo.links_of_kind(LinkKind.INTER_ORBIT_ISL)
    print(f"\nlinks at t=0: {len(intra)} intra-orbit (ring neighbours) and "
          f"{len(inter)} inter-orbit (same slot, within "
          f"{config.max_isl_range_km:.0f} km)")
    sample = sorted(inter, key=lambda l: l.propagation_delay_s)[:3]
    for link in sample:
        a, b = link.endpoints
        print(f"  {a.label} <-> {b.label}: {link.rate_bps / 1e9:.0f} Gbps, "
              f"{link.propagation_delay_s * 1e3:.2f} ms one way")

    station = GroundStation("gs-equator", 0.0, 0.0)
    windows = contact_windows(walker, (station,), horizon=walker.period,
                              step=1.0, link_config=config)
    print(f"\n{len(windows)} contact windows with {station.id} over one period "
          f"(elevation >= {station.min_elevation_deg:.0f} deg)")
    for w in sorted(windows, key=lambda w: (w.start, w.satellite.label))[:5]:
        print(f"  {w.satellite.label}: [{w.start:7.1f}, {w.end:7.1f}] s "
              f"({w.duration:5.1f} s at {w.rate_bps / 1e9:.0f} Gbps)")


if __name__ == "__main__":
    main()
