"""Atomic geometries and interaction-derived scalar fields.

Conventions: every rate/frequency is expressed in units of the control-branch
excited-state amplitude decay rate (gamma_ec = 1); lengths are in whatever
unit the geometry widths are given in.  The van der Waals interaction only
ever enters through the frequency x_kl = |Omega_p|^2 * rho_kl^6 / C6, so
absolute length scales cancel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateGeometryError

_RESAMPLE_BUDGET = 100


@dataclass(frozen=True)
class EnsembleGeometry:
    """Random-cloud description: isotropic 3D Gaussian or 1D Gaussian on [0, L]."""

    kind: str  # "gaussian3d" | "gaussian1d"
    n_atoms: int
    sigma: float  # isotropic width (3D) or axial width sigma_z (1D)
    length: float = 0.0  # medium length L, 1D only
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian3d", "gaussian1d"):
            raise ConfigError(f"unknown geometry kind {self.kind!r}")
        if self.n_atoms < 1:
            raise ConfigError("n_atoms must be >= 1")
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")
        if self.kind == "gaussian1d" and self.length <= 0:
            raise ConfigError("gaussian1d requires length > 0")


@dataclass(frozen=True)
class ProbeParams:
    """Probe-branch parameters; exactly one of kappa_p / d_p1 per device variant.

    alpha_in_p is the coherent input amplitude, |alpha_in_p|^2 = photons per
    unit time (gamma_ec = 1 units).
    """

    g_p: float
    omega_p: float
    gamma_ep: float
    kappa_p: float | None = None  # cavity linewidth (cavity variant)
    d_p1: float | None = None  # single-atom optical depth (free-space variant)
    alpha_in_p: float = 1.0

    def __post_init__(self):
        if self.gamma_ep <= 0:
            raise ConfigError("gamma_ep must be > 0")
        if self.kappa_p is None and self.d_p1 is None:
            raise ConfigError("one of kappa_p (cavity) or d_p1 (free space) is required")

    def require_cavity(self) -> float:
        if self.kappa_p is None:
            raise ConfigError("cavity variant requires kappa_p")
        return self.kappa_p

    def require_freespace(self) -> float:
        if self.d_p1 is None:
            raise ConfigError("free-space variant requires d_p1")
        return self.d_p1


def single_atom_depth_from_coupling(g_p: float, length: float, c: float, gamma_ep: float) -> float:
    """d_p1 = |g_p|^2 L / (c gamma_ep); consistency helper for dual-representation inputs."""
    return abs(g_p) ** 2 * length / (c * gamma_ep)


@dataclass(frozen=True)
class AtomEnsemble:
    """Sampled positions plus the cached pairwise van der Waals matrix.

    vdw[k, l] = c6 / rho_kl^6 (symmetric, zero diagonal).  For 1D geometries
    the atoms are stored in ascending z, which is the probe/control
    propagation order assumed by all downstream cascaded formulas.
    """

    positions: np.ndarray  # (N, dim)
    c6: float
    vdw: np.ndarray = field(default=None)  # (N, N)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    @property
    def sorted_1d(self) -> bool:
        z = self.positions[:, -1]
        return bool(np.all(np.diff(z) >= 0))


def sample_positions(geom: EnsembleGeometry) -> np.ndarray:
    """Draw atom positions for the given geometry; deterministic for fixed seed.

    1D samples are Gaussian around L/2 and resampled into [0, L], then sorted
    ascending in z.  Returns an (N, dim) array (dim = 3 or 1).
    """
    rng = np.random.default_rng(geom.seed)
    n = geom.n_atoms
    if geom.kind == "gaussian3d":
        return rng.normal(0.0, geom.sigma, size=(n, 3))
    # gaussian1d: truncated Gaussian on [0, L], centered at L/2
    z = rng.normal(geom.length / 2.0, geom.sigma, size=n)
    for _ in range(1000):
        bad = (z < 0.0) | (z > geom.length)
        if not bad.any():
            break
        z[bad] = rng.normal(geom.length / 2.0, geom.sigma, size=int(bad.sum()))
    z = np.clip(z, 0.0, geom.length)
    return np.sort(z).reshape(n, 1)


def pairwise_vdw(positions: np.ndarray, c6: float, rho_min: float = 0.0) -> np.ndarray:
    """V_kl = c6 / rho_kl^6 with zero diagonal.

    Raises DegenerateGeometryError when any pair sits below rho_min (or
    exactly coincides), since V_kl diverges there.
    """
    diffs = positions[:, None, :] - positions[None, :, :]
    rho2 = np.einsum("klx,klx->kl", diffs, diffs)
    n = positions.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(rho2[off] <= max(rho_min, 0.0) ** 2) and c6 != 0.0:
        raise DegenerateGeometryError("coincident or sub-rho_min atom pair")
    vdw = np.zeros((n, n))
    if c6 != 0.0:
        with np.errstate(divide="ignore"):
            vdw[off] = c6 / rho2[off] ** 3
    return vdw


def build_ensemble(geom: EnsembleGeometry, c6: float, rho_min: float = 0.0) -> AtomEnsemble:
    """Sample a geometry and attach the interaction matrix.

    Colliding atoms (pair distance <= rho_min, or exactly zero) are resampled
    individually up to a fixed budget before giving up.
    """
    rng = np.random.default_rng(geom.seed)
    positions = sample_positions(geom)
    floor = max(rho_min, 0.0)
    for _ in range(_RESAMPLE_BUDGET):
        diffs = positions[:, None, :] - positions[None, :, :]
        rho2 = np.einsum("klx,klx->kl", diffs, diffs)
        close = np.triu(rho2 <= floor**2, k=1)
        if not close.any():
            break
        # keep the earlier atom of each colliding pair, redraw the later one
        colliding = np.unique(np.nonzero(close)[1])
        if geom.kind == "gaussian3d":
            positions[colliding] = rng.normal(0.0, geom.sigma, size=(colliding.size, 3))
        else:
            znew = rng.normal(geom.length / 2.0, geom.sigma, size=colliding.size)
            positions[colliding, 0] = np.clip(znew, 0.0, geom.length)
    else:
        raise DegenerateGeometryError("resampling budget exhausted; atoms still coincident")
    if geom.kind == "gaussian1d":
        positions = positions[np.argsort(positions[:, 0])]
    return AtomEnsemble(positions=positions, c6=c6, vdw=pairwise_vdw(positions, c6, rho_min))


def _blockade_detuning(ensemble: AtomEnsemble, probe: ProbeParams) -> np.ndarray:
    """x_kl = |Omega_p|^2 / V_kl = |Omega_p|^2 rho_kl^6 / c6; inf on the diagonal.

    x is the probe two-photon shift a blockading excitation on atom k induces
    at atom l.  The diagonal is set to 0 (the excited atom itself is removed
    from the probe-branch ground manifold, handled by zeroing the diagonal of
    every pairwise quantity downstream).
    """
    n = ensemble.n_atoms
    pos = ensemble.positions
    diffs = pos[:, None, :] - pos[None, :, :]
    rho6 = np.einsum("klx,klx->kl", diffs, diffs) ** 3
    if ensemble.c6 == 0.0:
        x = np.full((n, n), np.inf)
    else:
        x = abs(probe.omega_p) ** 2 * rho6 / ensemble.c6
    np.fill_diagonal(x, 0.0)
    return x


def cooperativity_matrix(ensemble: AtomEnsemble, probe: ProbeParams) -> tuple[np.ndarray, np.ndarray]:
    """All blockaded cooperativities for the cavity variant.

    Returns (C_b, C_b1): C_b1[k, l] = (|g_p|^2/kappa_p) / (gamma_ep - i x_kl)
    with zero diagonal, and C_b[k] = sum_{l != k} C_b1[k, l].
    """
    kappa = probe.require_cavity()
    x = _blockade_detuning(ensemble, probe)
    c1 = abs(probe.g_p) ** 2 / kappa
    with np.errstate(invalid="ignore"):
        cb1 = c1 / (probe.gamma_ep - 1j * x)
    cb1 = np.where(np.isfinite(x), cb1, 0.0)  # x = inf: out of blockade, no contribution
    np.fill_diagonal(cb1, 0.0)
    return cb1.sum(axis=1), cb1


def blockaded_cooperativity(ensemble: AtomEnsemble, probe: ProbeParams, k: int) -> tuple[complex, np.ndarray]:
    """C_b,p^k and its per-pair terms C_b1,p^{k,l} for a single atom k."""
    cb, cb1 = cooperativity_matrix(ensemble, probe)
    return complex(cb[k]), cb1[k]


def optical_depth_matrix(ensemble: AtomEnsemble, probe: ProbeParams) -> tuple[np.ndarray, np.ndarray]:
    """Blockaded optical depths and attenuations for the free-space variant.

    Returns (d_b1, D_b), both (N, N) over (k, l) with zero k-diagonal in d_b1:
        d_b1[k, l] = d_p1 gamma_ep / (gamma_ep - i x_kl)
        D_b[k, l]  = sum_{l'<=l} d_b1[k, l'] exp(-sum_{l''=l'}^{l} d_b1[k, l'']) - 1
    with all inner sums in ascending-z atom order.
    """
    dp1 = probe.require_freespace()
    if ensemble.positions.shape[1] == 1 and not ensemble.sorted_1d:
        raise ConfigError("free-space formulas require atoms sorted in z")
    x = _blockade_detuning(ensemble, probe)
    with np.errstate(invalid="ignore"):
        db1 = dp1 * probe.gamma_ep / (probe.gamma_ep - 1j * x)
    db1 = np.where(np.isfinite(x), db1, dp1)  # full blockade limit: d_b1 -> d_p1
    np.fill_diagonal(db1, 0.0)
    # D_b[k, l] = e^{-S_l} T_l - 1, S_l = cumsum(d_b1), T_l = cumsum(d_b1 e^{S_{l-1}})
    s = np.cumsum(db1, axis=1)
    s_prev = s - db1
    t = np.cumsum(db1 * np.exp(s_prev), axis=1)
    return db1, np.exp(-s) * t - 1.0


def blockaded_optical_depth(ensemble: AtomEnsemble, probe: ProbeParams, k: int, l: int) -> tuple[complex, complex]:
    """(d_b1,p^{k,l}, D_b,p^{k,l}) for one atom pair."""
    db1, db = optical_depth_matrix(ensemble, probe)
    return complex(db1[k, l]), complex(db[k, l])


def dump_csv(ensemble: AtomEnsemble, path: str | Path) -> None:
    """Write positions as (atom_index, x, y, z); 1D clouds use x = y = 0."""
    pos = ensemble.positions
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["atom_index", "x", "y", "z"])
        for i in range(pos.shape[0]):
            if pos.shape[1] == 3:
                x, y, z = pos[i]
            else:
                x, y, z = 0.0, 0.0, pos[i, 0]
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(z))])


def load_csv(path: str | Path, c6: float, dim: int = 3, rho_min: float = 0.0) -> AtomEnsemble:
    """Rebuild an ensemble from a positions CSV (interaction matrix recomputed)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append((float(rec["x"]), float(rec["y"]), float(rec["z"])))
    arr = np.array(rows)
    positions = arr if dim == 3 else arr[:, 2:3]
    if dim == 1:
        positions = positions[np.argsort(positions[:, 0])]
    return AtomEnsemble(positions=positions, c6=c6, vdw=pairwise_vdw(positions, c6, rho_min))
