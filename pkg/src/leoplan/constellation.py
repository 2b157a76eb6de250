"""Walker-delta constellation geometry, link topology, and ground contact windows.

The model is deliberately small: circular orbits around a spherical Earth,
no perturbations, stations fixed to the rotating surface. Everything is a
pure function of the constellation definition and a time instant, so two
calls with the same arguments return identical results.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

EARTH_RADIUS_KM = 6371.0
EARTH_MU_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5
LIGHT_SPEED_KM_S = 299792.458


class LinkKind(str, Enum):
    INTRA_ORBIT_ISL = "intra_orbit_isl"
    INTER_ORBIT_ISL = "inter_orbit_isl"
    CROSS_SEAM_ISL = "cross_seam_isl"
    SGL = "sgl"
    GROUND_DEDICATED = "ground_dedicated"


_SAT_LABEL = re.compile(r"^o(\d+)s(\d+)$")


@dataclass(frozen=True, order=True)
class SatelliteId:
    """Identifies a satellite by its orbit (plane) and slot within the plane."""

    orbit_index: int
    slot_index: int

    @property
    def label(self) -> str:
        return f"o{self.orbit_index}s{self.slot_index}"

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, text: str) -> "SatelliteId":
        m = _SAT_LABEL.match(text)
        if m is None:
            raise ValueError(f"not a satellite label: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class ConstellationSpec:
    """Walker-delta shell definition.

    Attributes:
        num_orbits: number of orbital planes, >= 1.
        sats_per_orbit: satellites per plane, >= 1.
        altitude_km: shell altitude above the spherical Earth, > 0.
        inclination_deg: plane inclination in degrees, in [0, 180].
        phasing_factor: Walker phasing factor F, 0 <= F < num_orbits.
        epoch: reference time in seconds; phases below are defined at this instant.
    """

    num_orbits: int
    sats_per_orbit: int
    altitude_km: float
    inclination_deg: float
    phasing_factor: int = 0
    epoch: float = 0.0

    def validate(self) -> None:
        if self.num_orbits < 1:
            raise ValueError("num_orbits must be >= 1")
        if self.sats_per_orbit < 1:
            raise ValueError("sats_per_orbit must be >= 1")
        if self.altitude_km <= 0:
            raise ValueError("altitude_km must be positive")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValueError("inclination_deg must be in [0, 180]")
        if not 0 <= self.phasing_factor < max(self.num_orbits, 1):
            raise ValueError("phasing_factor must satisfy 0 <= F < num_orbits")


@dataclass(frozen=True)
class LinkConfig:
    """Data rates and ISL pairing policy; every field can be overridden per scenario."""

    intra_orbit_rate_bps: float = 10e9
    inter_orbit_rate_bps: float = 2e9
    sgl_rate_bps: float = 1e9
    ground_dedicated_rate_bps: float = 10e9
    max_isl_range_km: float = 5500.0
    cross_seam_policy: str = "disabled"

    def validate(self) -> None:
        for name in ("intra_orbit_rate_bps", "inter_orbit_rate_bps",
                     "sgl_rate_bps", "ground_dedicated_rate_bps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_isl_range_km <= 0:
            raise ValueError("max_isl_range_km must be positive")
        if self.cross_seam_policy not in ("disabled", "enabled"):
            raise ValueError("cross_seam_policy must be 'disabled' or 'enabled'")


@dataclass(frozen=True)
class Link:
    """An undirected point-to-point link live at a snapshot instant."""

    kind: LinkKind
    endpoints: tuple
    rate_bps: float
    propagation_delay_s: float
    available: bool = True


@dataclass(frozen=True)
class TopologySnapshot:
    """Positions and live links of the network at one instant."""

    time: float
    links: tuple
    positions: dict = field(compare=False)

    def links_of_kind(self, *kinds: LinkKind) -> list:
        return [l for l in self.links if l.kind in kinds]


@dataclass(frozen=True)
class GroundStation:
    """A ground station with a dedicated terrestrial uplink to the cloud."""

    id: str
    latitude_deg: float
    longitude_deg: float
    dedicated_rate_bps: float = 10e9
    min_elevation_deg: float = 10.0

    def validate(self) -> None:
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError("latitude_deg must be in [-90, 90]")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise ValueError("longitude_deg must be in [-180, 180]")
        if self.dedicated_rate_bps <= 0:
            raise ValueError("dedicated_rate_bps must be positive")
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise ValueError("min_elevation_deg must be in [0, 90)")

    def ecef_km(self) -> np.ndarray:
        lat = math.radians(self.latitude_deg)
        lon = math.radians(self.longitude_deg)
        return EARTH_RADIUS_KM * np.array(
            [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
        )


@dataclass(frozen=True)
class ContactWindow:
    """A maximal interval during which a satellite sees a station above its mask."""

    satellite: SatelliteId
    ground_station: str
    start: float
    end: float
    rate_bps: float

    @property
    def duration(self) -> float:
        return self.end - self.start


class WalkerConstellation:
    """Positions for every satellite of a Walker-delta shell as functions of time."""

    def __init__(self, spec: ConstellationSpec):
        spec.validate()
        self.spec = spec
        self.radius_km = EARTH_RADIUS_KM + spec.altitude_km
        self.period = 2.0 * math.pi * math.sqrt(self.radius_km**3 / EARTH_MU_KM3_S2)
        self.mean_motion = 2.0 * math.pi / self.period

        p = np.arange(spec.num_orbits)
        s = np.arange(spec.sats_per_orbit)
        pp, ss = np.meshgrid(p, s, indexing="ij")
        pp = pp.ravel()
        ss = ss.ravel()
        # RAAN spread over the full 360 deg (delta pattern) plus Walker phase offset.
        self._raan = 2.0 * math.pi * pp / spec.num_orbits
        self._phase0 = (
            2.0 * math.pi * ss / spec.sats_per_orbit
            + 2.0 * math.pi * spec.phasing_factor * pp / (spec.num_orbits * spec.sats_per_orbit)
        )
        self._incl = math.radians(spec.inclination_deg)
        self.satellites = [SatelliteId(int(a), int(b)) for a, b in zip(pp, ss)]
        self._index = {sat: i for i, sat in enumerate(self.satellites)}

    @property
    def num_satellites(self) -> int:
        return len(self.satellites)

    def positions_at(self, t: float) -> np.ndarray:
        """Earth-centered inertial positions (km), shape (num_satellites, 3)."""
        return self.positions_at_times(np.array([t]))[0]

    def positions_at_times(self, times: np.ndarray) -> np.ndarray:
        """Positions for many instants at once, shape (len(times), num_satellites, 3)."""
        dt = np.asarray(times, dtype=float)[:, None] - self.spec.epoch
        u = self._phase0[None, :] + self.mean_motion * dt
        cos_u, sin_u = np.cos(u), np.sin(u)
        ci, si = math.cos(self._incl), math.sin(self._incl)
        # In-plane coordinates rotated by inclination, then by RAAN about z.
        xo = self.radius_km * cos_u
        yo = self.radius_km * sin_u * ci
        zo = self.radius_km * sin_u * si
        co, so = np.cos(self._raan), np.sin(self._raan)
        x = xo * co[None, :] - yo * so[None, :]
        y = xo * so[None, :] + yo * co[None, :]
        return np.stack([x, y, zo], axis=-1)

    def position_of(self, sat: SatelliteId, t: float) -> np.ndarray:
        return self.positions_at(t)[self._index[sat]]

    def index_of(self, sat: SatelliteId) -> int:
        return self._index[sat]


def build_walker(spec: ConstellationSpec) -> WalkerConstellation:
    """Validate the shell parameters and construct the constellation."""
    return WalkerConstellation(spec)


def station_eci_km(station: GroundStation, t: float, epoch: float = 0.0) -> np.ndarray:
    """Inertial position of a station fixed to the rotating Earth."""
    theta = EARTH_ROTATION_RAD_S * (t - epoch)
    c, s = math.cos(theta), math.sin(theta)
    ex, ey, ez = station.ecef_km()
    return np.array([c * ex - s * ey, s * ex + c * ey, ez])


def elevation_deg(sat_pos_km: np.ndarray, station_pos_km: np.ndarray) -> float:
    """Elevation of a satellite above the local horizon of a station position."""
    d = sat_pos_km - station_pos_km
    zen = station_pos_km / np.linalg.norm(station_pos_km)
    return math.degrees(math.asin(float(np.dot(d, zen) / np.linalg.norm(d))))


def snapshot(
    constellation: WalkerConstellation,
    t: float,
    link_config: LinkConfig,
    stations: tuple = (),
) -> TopologySnapshot:
    """Topology at instant t.

    Emits the intra-orbit rings, the same-slot inter-orbit ISLs of adjacent
    planes that are within range (the wrap-around plane pair counts as the
    seam and follows the cross-seam policy), and, when stations are given,
    the currently visible SGLs plus each station's dedicated ground link.
    """
    link_config.validate()
    spec = constellation.spec
    pos = constellation.positions_at(t)
    positions = {sat: pos[i] for i, sat in enumerate(constellation.satellites)}
    links: list[Link] = []

    def isl(kind: LinkKind, a: SatelliteId, b: SatelliteId, rate: float) -> Link:
        dist = float(np.linalg.norm(positions[a] - positions[b]))
        return Link(kind, (a, b), rate, dist / LIGHT_SPEED_KM_S)

    P, S = spec.num_orbits, spec.sats_per_orbit
    for p in range(P):
        if S == 2:
            links.append(isl(LinkKind.INTRA_ORBIT_ISL, SatelliteId(p, 0), SatelliteId(p, 1),
                             link_config.intra_orbit_rate_bps))
        elif S >= 3:
            for s in range(S):
                links.append(isl(LinkKind.INTRA_ORBIT_ISL, SatelliteId(p, s),
                                 SatelliteId(p, (s + 1) % S),
                                 link_config.intra_orbit_rate_bps))

    def pair_planes(pa: int, pb: int, kind: LinkKind) -> None:
        for s in range(S):
            a, b = SatelliteId(pa, s), SatelliteId(pb, s)
            dist = float(np.linalg.norm(positions[a] - positions[b]))
            if dist <= link_config.max_isl_range_km:
                links.append(Link(kind, (a, b), link_config.inter_orbit_rate_bps,
                                  dist / LIGHT_SPEED_KM_S))

    for p in range(P - 1):
        pair_planes(p, p + 1, LinkKind.INTER_ORBIT_ISL)
    if P >= 3 and link_config.cross_seam_policy == "enabled":
        pair_planes(P - 1, 0, LinkKind.CROSS_SEAM_ISL)

    for st in stations:
        st.validate()
        st_pos = station_eci_km(st, t, spec.epoch)
        for sat in constellation.satellites:
            if elevation_deg(positions[sat], st_pos) >= st.min_elevation_deg:
                dist = float(np.linalg.norm(positions[sat] - st_pos))
                links.append(Link(LinkKind.SGL, (sat, st.id), link_config.sgl_rate_bps,
                                  dist / LIGHT_SPEED_KM_S))
        links.append(Link(LinkKind.GROUND_DEDICATED, (st.id, "cloud"),
                          st.dedicated_rate_bps, 0.0))

    return TopologySnapshot(time=t, links=tuple(links), positions=positions)


def contact_windows(
    constellation: WalkerConstellation,
    stations: tuple,
    horizon: float,
    step: float = 1.0,
    link_config: LinkConfig | None = None,
    start: float = 0.0,
) -> list:
    """Sampled visibility windows for every (satellite, station) pair.

    The interval [start, start+horizon) is sampled every `step` seconds; runs
    of consecutive visible samples become one window reaching one step past
    the last visible sample, so windows for a pair never overlap and always
    have positive duration.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if step <= 0:
        raise ValueError("step must be positive")
    cfg = link_config if link_config is not None else LinkConfig()
    cfg.validate()

    times = start + np.arange(0.0, horizon, step)
    if len(times) == 0:
        return []
    sat_pos = constellation.positions_at_times(times)  # (T, n, 3)
    windows: list[ContactWindow] = []
    for st in stations:
        st.validate()
        theta = EARTH_ROTATION_RAD_S * (times - constellation.spec.epoch)
        ex, ey, ez = st.ecef_km()
        st_pos = np.stack(
            [np.cos(theta) * ex - np.sin(theta) * ey,
             np.sin(theta) * ex + np.cos(theta) * ey,
             np.full_like(theta, ez)], axis=-1)  # (T, 3)
        zen = st_pos / np.linalg.norm(st_pos, axis=-1, keepdims=True)
        d = sat_pos - st_pos[:, None, :]
        sin_elev = np.einsum("tnk,tk->tn", d, zen) / np.linalg.norm(d, axis=-1)
        visible = sin_elev >= math.sin(math.radians(st.min_elevation_deg))  # (T, n)
        for i, sat in enumerate(constellation.satellites):
            col = visible[:, i]
            j = 0
            while j < len(col):
                if col[j]:
                    k = j
                    while k + 1 < len(col) and col[k + 1]:
                        k += 1
                    windows.append(ContactWindow(sat, st.id, float(times[j]),
                                                 float(times[k] + step), cfg.sgl_rate_bps))
                    j = k + 1
                else:
                    j += 1
    return windows
