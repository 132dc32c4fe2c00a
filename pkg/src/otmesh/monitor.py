"""Monitor functions: the user-prescribed mesh density fields.

A monitor m(x) > 0 prescribes relative resolution: the adapted mesh
equidistributes m, so cell areas approach c/m.  Three families:

- ``PlanarSech``: ring/bell profiles on the periodic plane,
  m = 1 + a1 sech^2(a2 (R^2 - a^2)) with R the minimum-image distance from
  the monitor centre.
- ``SphericalTanh``: a smoothed cap on the sphere,
  m = sqrt((tanh((beta - d)/alpha) + 1) / (2 (1 + gamma)) + gamma), with d
  the great-circle angle from the centre; ``from_scale(s)`` sets
  gamma = s^-4 so the ratio of coarse to fine spacing is ~s.
- ``Gridded``: bilinear interpolation of a latitude-longitude field p,
  normalised to m = (p + p_min) / (p_max + p_min); latitudes clamp at the
  poles, longitudes wrap.

``smooth_on_computational_grid`` applies one conservative diffusion step
m <- m' + (1/4) div(|d_f|^2 grad m') on the computational mesh; it is meant
for gridded (data-driven) monitors, never for the analytic families.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveMonitor, UnsupportedGeometry
from .sphere_geometry import unit

__all__ = [
    "PlanarSech",
    "SphericalTanh",
    "Gridded",
    "named_monitor",
    "evaluate_monitor",
    "monitor_centre",
    "smooth_on_computational_grid",
    "load_gridded_monitor",
    "write_gridded_file",
]


def _sech2(x: np.ndarray) -> np.ndarray:
    """sech^2 via exp(-|x|), overflow-free for large |x|."""
    e = np.exp(-np.abs(x))
    s = 2.0 * e / (1.0 + e * e)
    return s * s


@dataclass(frozen=True)
class PlanarSech:
    """m = 1 + a1 sech^2(a2 (R^2 - a^2)); a ring of radius a (bell if a=0)."""

    a: float = 0.25
    a1: float = 10.0
    a2: float = 200.0
    centre: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.a1 <= -1.0:
            raise NonPositiveMonitor("a1 <= -1 makes the monitor non-positive")


@dataclass(frozen=True)
class SphericalTanh:
    """Smoothed spherical cap of angular radius beta around (lat, lon)."""

    gamma: float
    alpha: float = np.pi / 20.0
    beta: float = np.pi / 6.0
    lat_deg: float = 30.0
    lon_deg: float = 90.0

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise NonPositiveMonitor("gamma must be positive")

    @classmethod
    def from_scale(cls, scale: float, **kw) -> "SphericalTanh":
        """Monitor whose coarse:fine spacing ratio is ~scale (gamma = scale^-4)."""
        return cls(gamma=float(scale) ** -4, **kw)

    def centre_xyz(self) -> np.ndarray:
        lat = np.deg2rad(self.lat_deg)
        lon = np.deg2rad(self.lon_deg)
        return np.array([np.cos(lat) * np.cos(lon),
                         np.cos(lat) * np.sin(lon),
                         np.sin(lat)])


@dataclass(frozen=True)
class Gridded:
    """Latitude-longitude gridded field, bilinearly interpolated.

    Rows run along latitude ``lat0 + i*dlat`` (i = 0..nlat-1), columns along
    longitude ``lon0 + j*dlon``; ``values`` has shape (nlat, nlon) and must
    be non-negative.  m = (p + p_min)/(p_max + p_min) lies in (0, 1].
    """

    lat0: float
    lon0: float
    dlat: float
    dlon: float
    values: np.ndarray
    p_min: float
    p_max: float | None = None
    smoothing: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("gridded values must be 2-D (nlat, nlon)")
        if self.p_min <= 0.0:
            raise NonPositiveMonitor("p_min must be positive")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise NonPositiveMonitor("gridded values must be finite and >= 0")
        object.__setattr__(self, "values", v)
        if self.p_max is None:
            object.__setattr__(self, "p_max", float(v.max()))
        if self.p_max <= 0.0:
            raise NonPositiveMonitor("p_max must be positive")

    def centre_xyz(self) -> np.ndarray:
        """Location of the (first) maximum of the field, for diagnostics."""
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        lat = np.deg2rad(self.lat0 + i * self.dlat)
        lon = np.deg2rad(self.lon0 + j * self.dlon)
        return np.array([np.cos(lat) * np.cos(lon),
                         np.cos(lat) * np.sin(lon),
                         np.sin(lat)])


_RING = PlanarSech(a=0.25, a1=10.0, a2=200.0)
_BELL = PlanarSech(a=0.0, a1=50.0, a2=100.0)


def named_monitor(name: str):
    """Monitor presets: ring, bell, x2, x4, x8, x16."""
    name = name.lower()
    if name == "ring":
        return _RING
    if name == "bell":
        return _BELL
    if name in ("x2", "x4", "x8", "x16"):
        return SphericalTanh.from_scale(float(name[1:]))
    raise KeyError(f"unknown monitor preset {name!r}")


def evaluate_monitor(spec, points: np.ndarray, geometry) -> np.ndarray:
    """Evaluate a monitor at an array of surface points (..., dim)."""
    points = np.asarray(points, dtype=float)
    if isinstance(spec, PlanarSech):
        if geometry.kind != "plane":
            raise UnsupportedGeometry("planar monitor on a non-planar geometry")
        d = geometry.min_image(points - np.asarray(spec.centre))
        r2 = np.sum(d * d, axis=-1)
        return 1.0 + spec.a1 * _sech2(spec.a2 * (r2 - spec.a * spec.a))
    if isinstance(spec, SphericalTanh):
        if geometry.kind != "sphere":
            raise UnsupportedGeometry("spherical monitor on a non-spherical geometry")
        c = spec.centre_xyz()
        ph = unit(points)
        ang = np.arctan2(np.linalg.norm(np.cross(ph, c), axis=-1), ph @ c)
        t = (np.tanh((spec.beta - ang) / spec.alpha) + 1.0) / (2.0 * (1.0 + spec.gamma))
        return np.sqrt(t + spec.gamma)
    if isinstance(spec, Gridded):
        if geometry.kind != "sphere":
            raise UnsupportedGeometry("gridded lat-lon monitor needs a sphere")
        p = _bilinear_latlon(spec, points)
        return (p + spec.p_min) / (spec.p_max + spec.p_min)
    raise TypeError(f"unknown monitor spec {spec!r}")


def monitor_centre(spec, geometry) -> np.ndarray:
    """Monitor centre for distance-based diagnostics."""
    if isinstance(spec, PlanarSech):
        return np.asarray(spec.centre, dtype=float)
    if isinstance(spec, SphericalTanh):
        return geometry.radius * spec.centre_xyz()
    if isinstance(spec, Gridded):
        return geometry.radius * spec.centre_xyz()
    raise TypeError(f"unknown monitor spec {spec!r}")


def _bilinear_latlon(spec: Gridded, points: np.ndarray) -> np.ndarray:
    ph = unit(points)
    lat = np.rad2deg(np.arctan2(ph[..., 2], np.hypot(ph[..., 0], ph[..., 1])))
    lon = np.rad2deg(np.arctan2(ph[..., 1], ph[..., 0]))
    nlat, nlon = spec.values.shape

    fi = (lat - spec.lat0) / spec.dlat
    i0 = np.floor(fi).astype(int)
    ti = fi - i0
    # clamp to the first/last latitude row beyond the grid
    low = i0 < 0
    high = i0 > nlat - 2
    i0 = np.clip(i0, 0, nlat - 2)
    ti = np.where(low, 0.0, np.where(high, 1.0, ti))

    fj = np.mod(lon - spec.lon0, 360.0) / spec.dlon
    j0 = np.floor(fj).astype(int)
    tj = fj - j0
    j0 = np.mod(j0, nlon)
    j1 = np.mod(j0 + 1, nlon)

    v = spec.values
    # Nested lerp form: reproduces constant fields exactly (a + t*(a - a) == a),
    # so a constant-p grid yields a bitwise-constant monitor.
    v00, v01 = v[i0, j0], v[i0, j1]
    v10, v11 = v[i0 + 1, j0], v[i0 + 1, j1]
    low = v00 + tj * (v01 - v00)
    high = v10 + tj * (v11 - v10)
    return low + ti * (high - low)


def smooth_on_computational_grid(values: np.ndarray, mesh) -> np.ndarray:
    """One conservative smoothing pass m <- m' + (1/4) div(|d|^2 grad m').

    Face fluxes |S_f| |d_f|^2 grad_nf(m') enter the owner and leave the
    neighbour, so sum(V m) is conserved to round-off.  Raises
    NonPositiveMonitor if any smoothed value is <= 0 (the caller may clamp).
    """
    values = np.asarray(values, dtype=float)
    gn = (values[mesh.face_neighbour] - values[mesh.face_owner]) / mesh.d_mag
    flux = 0.25 * mesh.face_area * mesh.d_mag ** 2 * gn
    out = values * mesh.cell_volume
    np.add.at(out, mesh.face_owner, flux)
    np.add.at(out, mesh.face_neighbour, -flux)
    out = out / mesh.cell_volume
    if np.any(out <= 0.0):
        raise NonPositiveMonitor("smoothing produced a non-positive monitor value")
    return out


def load_gridded_monitor(path, p_min: float, p_max: float | None = None,
                         smoothing: bool = True) -> Gridded:
    """Read a gridded monitor file.

    Format: a header line ``nlat nlon lat0 lon0 dlat dlon`` followed by
    nlat*nlon whitespace-separated values in row-major order (latitude rows,
    longitude columns).
    """
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 6:
        raise ValueError(f"{path}: missing gridded monitor header")
    nlat, nlon = int(tokens[0]), int(tokens[1])
    lat0, lon0, dlat, dlon = (float(t) for t in tokens[2:6])
    data = np.array([float(t) for t in tokens[6:]])
    if data.size != nlat * nlon:
        raise ValueError(
            f"{path}: expected {nlat * nlon} values, found {data.size}")
    return Gridded(lat0=lat0, lon0=lon0, dlat=dlat, dlon=dlon,
                   values=data.reshape(nlat, nlon), p_min=p_min, p_max=p_max,
                   smoothing=smoothing)


def write_gridded_file(path, spec: Gridded) -> None:
    """Write a gridded monitor in the format read by load_gridded_monitor."""
    nlat, nlon = spec.values.shape
    with open(path, "w") as fh:
        fh.write(f"{nlat} {nlon} {spec.lat0:.17g} {spec.lon0:.17g} "
                 f"{spec.dlat:.17g} {spec.dlon:.17g}\n")
        for row in spec.values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
