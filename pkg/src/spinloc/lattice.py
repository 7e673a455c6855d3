"""Diamond-lattice geometry in the sensor frame.

Sensor frame: z along [-1 -1 1] (vacancy above nitrogen), x along
[-1 -1 -2], y along [1 -1 0]. Lab frame: x along [110], y along [-110],
z along [001]. Crystal positions are integer multiples of ``a/4``; the
vacancy sits at the crystal origin and the nitrogen at ``a/4 (1, 1, -1)``.
The sensor-frame origin is shifted ``origin_offset`` above the vacancy.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError, InputError
from .hamiltonian import HyperfineParams
from .spincore import wrap_2pi

A_DIAMOND = 3.567  # Angstrom
TWO_PI = 2 * np.pi
# point-dipole prefactor mu0/(4 pi) h gamma_e gamma_c, kHz * Angstrom^3
DIPOLAR_K = 19.86e3

_SENSOR_FROM_CRYSTAL = np.array(
    [
        np.array([-1.0, -1.0, -2.0]) / np.sqrt(6.0),
        np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0),
        np.array([-1.0, -1.0, 1.0]) / np.sqrt(3.0),
    ]
)
_LAB_FROM_CRYSTAL = np.array(
    [
        np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0),
        np.array([-1.0, 1.0, 0.0]) / np.sqrt(2.0),
        np.array([0.0, 0.0, 1.0]),
    ]
)


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def transform_matrix(theta0: float = np.radians(54.7), phi0: float = np.pi) -> np.ndarray:
    """Lab-to-sensor rotation ``R_y(-theta0) R_z(-phi0)``."""
    return _ry(-theta0) @ _rz(-phi0)


def lab_to_sensor(v, theta0: float = np.radians(54.7), phi0: float = np.pi) -> np.ndarray:
    """Express lab-frame vector(s) in the sensor frame."""
    return np.asarray(v, dtype=float) @ transform_matrix(theta0, phi0).T


def sensor_to_lab(v, theta0: float = np.radians(54.7), phi0: float = np.pi) -> np.ndarray:
    return np.asarray(v, dtype=float) @ transform_matrix(theta0, phi0)


def crystal_to_sensor(v) -> np.ndarray:
    """Exact crystal-axis to sensor-frame rotation."""
    return np.asarray(v, dtype=float) @ _SENSOR_FROM_CRYSTAL.T


def crystal_to_lab(v) -> np.ndarray:
    return np.asarray(v, dtype=float) @ _LAB_FROM_CRYSTAL.T


def spherical_of(v):
    """``(r, theta, phi)`` with theta in [0, pi], phi in [0, 2pi).

    Raises
    ------
    DomainError
        For the zero vector.
    """
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    if np.any(r == 0):
        raise DomainError("spherical coordinates of the zero vector are undefined")
    # arctan2 keeps full precision near the poles, unlike arccos
    theta = np.arctan2(np.hypot(v[..., 0], v[..., 1]), v[..., 2])
    phi = wrap_2pi(np.arctan2(v[..., 1], v[..., 0]))
    if v.ndim == 1:
        return float(r), float(theta), float(phi)
    return r, theta, phi


def cartesian_of(r, theta, phi):
    r, theta, phi = (np.asarray(x, dtype=float) for x in (r, theta, phi))
    st = np.sin(theta)
    return np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class LatticeSite:
    """A carbon site.

    ``index`` holds the crystal coordinates in units of ``a/4`` and
    ``sublattice`` is 0 for the vacancy's sublattice, 1 for the nitrogen's.
    """

    index: tuple
    sublattice: int
    position: np.ndarray
    r: float
    theta: float
    phi: float

    @property
    def spherical(self):
        return self.r, self.theta, self.phi


def _crystal_points(n: int):
    """Diamond sites with integer coordinates in ``[-n, n]^3`` (units a/4)."""
    g = np.arange(-n, n + 1)
    ijk = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    even = np.all(ijk % 2 == 0, axis=1) & (ijk.sum(axis=1) % 4 == 0)
    odd = np.all(ijk % 2 == 1, axis=1) & (ijk.sum(axis=1) % 4 == 1)
    keep = even | odd
    return ijk[keep], odd[keep].astype(int)


def site_arrays(extent: float, lattice_constant: float = A_DIAMOND, origin_offset: float = 0.75):
    """Vectorised site generation.

    Returns ``(index, sublattice, position, r, theta, phi)`` arrays for all
    carbon sites within ``extent`` of the sensor-frame origin.
    """
    if extent <= 0:
        raise DomainError("extent must be positive")
    q = lattice_constant / 4.0
    n = int(np.ceil((extent + origin_offset) / q)) + 1
    ijk, sub = _crystal_points(n)
    nitrogen = np.all(ijk == np.array([1, 1, -1]), axis=1)
    vacancy = np.all(ijk == 0, axis=1)
    ijk, sub = ijk[~(nitrogen | vacancy)], sub[~(nitrogen | vacancy)]
    pos = crystal_to_sensor(ijk * q) - np.array([0.0, 0.0, origin_offset])
    r = np.linalg.norm(pos, axis=1)
    inside = r <= extent
    ijk, sub, pos, r = ijk[inside], sub[inside], pos[inside], r[inside]
    order = np.lexsort((ijk[:, 2], ijk[:, 1], ijk[:, 0], np.round(r, 9)))
    ijk, sub, pos, r = ijk[order], sub[order], pos[order], r[order]
    _, theta, phi = spherical_of(pos)
    return ijk, sub, pos, r, np.atleast_1d(theta), np.atleast_1d(phi)


def generate_sites(extent: float, lattice_constant: float = A_DIAMOND, origin_offset: float = 0.75) -> list:
    """All carbon sites within ``extent`` (Angstrom), sorted by distance.

    The vacancy and nitrogen positions are excluded.
    """
    ijk, sub, pos, r, theta, phi = site_arrays(extent, lattice_constant, origin_offset)
    return [
        LatticeSite(tuple(int(x) for x in ijk[k]), int(sub[k]), pos[k], float(r[k]), float(theta[k]), float(phi[k]))
        for k in range(len(r))
    ]


def nearest_site(sites: list, r: float, theta: float, phi: float) -> LatticeSite:
    """Site closest in Cartesian distance to the given spherical point."""
    target = cartesian_of(r, theta, phi)
    return min(sites, key=lambda s: float(np.linalg.norm(s.position - target)))


def equivalence_set(sites: list, reference: LatticeSite, tol_r: float = 0.05,
                    tol_theta: float = np.radians(0.5)) -> list:
    """Sites sharing ``(r, theta)`` with ``reference`` within tolerance."""
    return [s for s in sites if abs(s.r - reference.r) <= tol_r and abs(s.theta - reference.theta) <= tol_theta]


def sites_in_phi_range(candidates: list, phi_center: float, half_width: float) -> list:
    """Sites whose azimuth lies within ``half_width`` of ``phi_center`` (circular)."""
    if half_width < 0:
        raise DomainError("half_width must be non-negative")
    out = []
    for s in candidates:
        d = abs(np.pi - np.mod(np.pi - (s.phi - phi_center), TWO_PI))
        if d <= half_width + 1e-12:
            out.append(s)
    return out


def dipolar_hyperfine(position, k: float = DIPOLAR_K):
    """Point-dipole ``(A_par, A_perp)`` in kHz for sensor-frame position(s) in Angstrom.

    ``A_par = k (3 cos^2 theta - 1)/r^3`` and ``A_perp = 3 k |cos theta sin theta|/r^3``.
    """
    p = np.asarray(position, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    c = p[..., 2] / r
    s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    return k * (3 * c * c - 1) / r ** 3, 3 * k * np.abs(c * s) / r ** 3


def sample_bath(extent: float, seed: int, abundance: float = 0.011, r_min: float = 0.0,
                lattice_constant: float = A_DIAMOND, origin_offset: float = 0.75):
    """Randomly occupied 13C sites with point-dipole hyperfine values.

    Returns ``(positions, a_par, a_perp)`` arrays for sites with
    ``r_min < r <= extent``. ``seed`` is required for reproducibility.
    """
    if seed is None:
        raise InputError("bath sampling requires an explicit seed")
    _, _, pos, r, _, _ = site_arrays(extent, lattice_constant, origin_offset)
    pos = pos[r > r_min]
    rng = np.random.default_rng(seed)
    occ = rng.random(len(pos)) < abundance
    pos = pos[occ]
    a_par, a_perp = dipolar_hyperfine(pos)
    return pos, a_par, a_perp


# ---------------------------------------------------------------------------
# hyperfine candidate table

@dataclass(frozen=True)
class DftCandidate:
    label: str
    a_parallel: float
    a_perp: float


CANDIDATE_HEADER = ("label", "a_parallel_khz", "a_perp_khz")


def parse_candidates(text: str, source: str = "<string>") -> list:
    """Parse a candidate table with header ``label,a_parallel_khz,a_perp_khz``."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows or tuple(c.strip() for c in rows[0]) != CANDIDATE_HEADER:
        raise InputError(f"{source}: expected header {','.join(CANDIDATE_HEADER)}")
    out = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise InputError(f"{source}:{line}: expected 3 fields, got {len(row)}")
        try:
            out.append(DftCandidate(row[0].strip(), float(row[1]), float(row[2])))
        except ValueError as exc:
            raise InputError(f"{source}:{line}: {exc}") from None
    return out


def load_candidates(path=None) -> list:
    """Load a candidate table; defaults to the bundled one."""
    if path is None:
        text = resources.files("spinloc").joinpath("data/dft_candidates.csv").read_text()
        return parse_candidates(text, "dft_candidates.csv")
    return parse_candidates(Path(path).read_text(), str(path))


def match_hyperfine(measured: HyperfineParams, table: list, tol=(5.0, 1.0)) -> list:
    """Candidates within ``tol = (tol_par, tol_perp)`` kHz, closest first."""
    tp, tq = tol
    if tp < 0 or tq < 0:
        raise InputError("tolerances must be non-negative")
    hits = []
    for c in table:
        dp = abs(c.a_parallel - measured.a_parallel)
        dq = abs(c.a_perp - measured.a_perp)
        if dp <= tp and dq <= tq and (tp > 0 or dp == 0) and (tq > 0 or dq == 0):
            hits.append((float(np.hypot(dp, dq)), c.label, c))
    return [c for _, _, c in sorted(hits, key=lambda x: (x[0], x[1]))]
