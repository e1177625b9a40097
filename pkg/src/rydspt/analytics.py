"""Closed-form impedance-matching expressions and the matched-probe solver."""

from __future__ import annotations

import numpy as np

from .channels import JumpChannelSet
from .errors import ConfigError


def two_photon_detuning(omega_c: float, delta_big: float) -> float:
    """Reflection-free two-photon detuning, delta = |Omega_c|^2 / Delta."""
    if delta_big == 0:
        raise ConfigError("two_photon_detuning requires Delta != 0")
    return abs(omega_c) ** 2 / delta_big


def dressed_two_photon_detuning(variant: str, coupling: float, gamma_ec: float, omega_c: float, delta_big: float) -> float:
    """Two-photon detuning compensating the collectively dressed Stark shift.

    The intermediate e manifold is broadened to gamma_ec (1 + C_c) by the
    cavity (gamma_ec (1 + d_c/2) by the chain), which moves the actual
    two-photon resonance below the bare |Omega_c|^2 / Delta once the
    collective width rivals Delta:

        delta = |Omega_c|^2 Delta / (Delta^2 + gamma_ec^2 (1 + C)^2)

    At Omega_c = 5, Delta = 180 this interpolates from ~0.14 (C_c = 10) down
    to ~0.11 (C_c = 100), the empirically better impedance-matching values.
    """
    if delta_big == 0:
        raise ConfigError("dressed detuning requires Delta != 0")
    width = coupling if variant == "cavity" else coupling / 2.0
    scale = gamma_ec * (1.0 + width)
    return abs(omega_c) ** 2 * delta_big / (delta_big**2 + scale**2)


def gamma_out(variant: str, coupling: float, gamma_ec: float, omega_c: float, delta_big: float) -> float:
    """Output rate of the stored excitation.

    cavity:     gamma_out = C_c  gamma_ec |Omega_c|^2 / Delta^2
    freespace:  gamma_out = d_c  gamma_ec |Omega_c|^2 / (2 Delta^2)

    `coupling` is C_c for the cavity and d_c for free space.
    """
    if delta_big == 0:
        raise ConfigError("gamma_out requires Delta != 0")
    base = coupling * gamma_ec * abs(omega_c) ** 2 / delta_big**2
    if variant == "cavity":
        return base
    if variant == "freespace":
        return base / 2.0
    raise ConfigError(f"unknown variant {variant!r}")


def storage_prob_cavity(c_c: float) -> float:
    """Matched-cavity Rydberg conversion probability, (2 C_c / (1 + 2 C_c))^2."""
    if c_c < 0:
        raise ConfigError("C_c must be >= 0")
    return (2.0 * c_c / (1.0 + 2.0 * c_c)) ** 2


def storage_prob_fs(d_c: float, gamma_ec: float, delta_big: float, variant: str = "a") -> float:
    """Matched free-space conversion probability.

    The source expression's grouping is ambiguous, so both readings are
    available and the simulation is the arbiter of which one to quote:

      variant "a": P = d/(2+d) * exp([2d(d(-g^2 d/D^2) - 2) - 4] / (d+2)^2)
      variant "b": P = d/(2+d) * exp([2d(d(-g^2 d/D^2  - 2)) - 4] / (d+2)^2)

    i.e. the "-2" attaches outside (a) or inside (b) the innermost factor of
    d_c.  Do not silently rely on the default; report which variant was used.
    """
    if delta_big == 0:
        raise ConfigError("storage_prob_fs requires Delta != 0")
    if d_c < 0:
        raise ConfigError("d_c must be >= 0")
    y = gamma_ec**2 * d_c / delta_big**2
    if variant == "a":
        expo = (2.0 * d_c * (d_c * (-y) - 2.0) - 4.0) / (d_c + 2.0) ** 2
    elif variant == "b":
        expo = (2.0 * d_c * (d_c * (-y - 2.0)) - 4.0) / (d_c + 2.0) ** 2
    else:
        raise ConfigError(f"unknown storage_prob_fs variant {variant!r}")
    return d_c / (2.0 + d_c) * float(np.exp(expo))


def weighted_mean_dephasing(gamma_r: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Mean dephasing rate over atoms; weights default to flat.

    For the impedance-matching condition the natural weights are the storage
    mode populations |r_k|^2 of the zero-dephasing deterministic run, which
    degrade gracefully for inhomogeneous clouds.
    """
    g = np.asarray(gamma_r, dtype=float)
    if weights is None:
        return float(g.mean())
    w = np.asarray(weights, dtype=float)
    tot = w.sum()
    if tot <= 0:
        raise ConfigError("weights must have positive sum")
    return float((g * w).sum() / tot)


def matched_probe_intensity(
    gamma_out_target: float,
    channels: JumpChannelSet,
    weights: np.ndarray | None = None,
) -> float:
    """Probe amplitude alpha_in_p at which mean(gamma_r) equals gamma_out.

    Exact by the quadratic scaling of gamma_r in alpha:
    |alpha|^2 = gamma_out / mean(gamma_r at alpha=1).
    """
    if gamma_out_target <= 0:
        raise ConfigError("gamma_out target must be > 0")
    unit = channels.scaled(1.0)
    mean_unit = weighted_mean_dephasing(unit.gamma_r, weights)
    if mean_unit <= 0:
        raise ConfigError("channels have zero response; impedance matching unreachable")
    return float(np.sqrt(gamma_out_target / mean_unit))
