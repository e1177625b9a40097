"""Probe-induced jump channels on the stored control excitation.

Every channel operator is a weighted sum of Rydberg projectors,
L_j = sum_k c_{j,k} sigma_rr^k, so a channel is fully described by its
length-N complex coefficient vector.  There is one readout channel (cavity
reflection / free-space transmission change) and one spontaneous-emission
channel per atom l, with c_{l,k} = 0 at k = l.

gamma_r[k] = (1/2) sum_j |c_{j,k}|^2 is the amplitude decay rate the
channels induce on the r_k coherence; the no-jump generator subtracts
exactly gamma_r[k] from the r_k amplitude, which is what ties the channel
normalization to the impedance-matching condition gamma_r ~ gamma_out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import AtomEnsemble, ProbeParams, cooperativity_matrix, optical_depth_matrix
from .errors import SingularChannelError


@dataclass(frozen=True)
class JumpChannelSet:
    """Readout + per-atom spontaneous channels and the induced dephasing rates.

    readout[k] is the readout-channel coefficient on atom k; spont[l, k] the
    coefficient of the atom-l spontaneous channel on atom k (zero diagonal).
    All coefficients scale linearly in alpha_in_p.
    """

    variant: str  # "cavity" | "freespace"
    readout: np.ndarray  # (N,) complex
    spont: np.ndarray  # (N, N) complex, [l, k]
    gamma_r: np.ndarray  # (N,) real >= 0
    alpha_in_p: float = 1.0

    @property
    def n_atoms(self) -> int:
        return self.readout.shape[0]

    def scaled(self, alpha_in_p: float) -> "JumpChannelSet":
        """Same geometry, different probe amplitude (coefficients are linear in it)."""
        s = alpha_in_p / self.alpha_in_p
        return JumpChannelSet(
            variant=self.variant,
            readout=self.readout * s,
            spont=self.spont * s,
            gamma_r=self.gamma_r * abs(s) ** 2,
            alpha_in_p=alpha_in_p,
        )

    def with_phase(self, phase: float) -> "JumpChannelSet":
        """Global channel phase; physically irrelevant (rates fix |c|^2 only)."""
        ph = np.exp(1j * phase)
        return JumpChannelSet(self.variant, self.readout * ph, self.spont * ph, self.gamma_r.copy(), self.alpha_in_p)

    def readout_rate(self, r: np.ndarray) -> float:
        """|| L_readout psi ||^2 for a state with r-amplitudes r."""
        return float(np.sum(np.abs(self.readout) ** 2 * np.abs(r) ** 2))

    def spont_rates(self, r: np.ndarray) -> np.ndarray:
        """Per-channel || L_l psi ||^2; O(N^2), used only at jump times."""
        return (np.abs(self.spont) ** 2) @ (np.abs(r) ** 2)

    def probe_rate(self, r: np.ndarray) -> float:
        """Total probe-channel jump rate sum_k 2 gamma_r[k] |r_k|^2."""
        return float(np.sum(2.0 * self.gamma_r * np.abs(r) ** 2))

    def dump_csv(self, path: str | Path) -> None:
        """Debug dump: one row per (channel, atom) coefficient."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel_kind", "l", "k", "re_c", "im_c", "gamma_r_k"])
            for k in range(self.n_atoms):
                c = self.readout[k]
                w.writerow(["readout", "", k, repr(c.real), repr(c.imag), repr(float(self.gamma_r[k]))])
            for l in range(self.n_atoms):
                for k in range(self.n_atoms):
                    c = self.spont[l, k]
                    w.writerow(["spontaneous", l, k, repr(c.real), repr(c.imag), repr(float(self.gamma_r[k]))])


def dephasing_rates(readout: np.ndarray, spont: np.ndarray) -> np.ndarray:
    """gamma_r[k] = (1/2) sum over channels of |c_{j,k}|^2."""
    return 0.5 * (np.abs(readout) ** 2 + np.sum(np.abs(spont) ** 2, axis=0))


def _check_denominator(cb: np.ndarray) -> np.ndarray:
    denom = 1.0 + cb
    if np.any(np.abs(denom) < 1e-12):
        raise SingularChannelError("1 + C_b,p^k vanished; non-physical probe parameters")
    return denom


def cavity_channels(ensemble: AtomEnsemble, probe: ProbeParams) -> JumpChannelSet:
    """Channels for the single-sided-cavity probe.

    readout:      c_k   = -2 C_b^k alpha / (1 + C_b^k)
    spontaneous:  c_l,k = -i 2 g_p alpha sqrt(gamma_ep/kappa_p)
                          / [(gamma_ep - i |Omega_p|^2 / V_kl)(1 + C_b^k)],  k != l
    """
    kappa = probe.require_cavity()
    alpha = probe.alpha_in_p
    cb, cb1 = cooperativity_matrix(ensemble, probe)
    denom = _check_denominator(cb)
    readout = -2.0 * cb * alpha / denom
    # 1/(gamma_ep - i x_kl) = cb1[k, l] * kappa / |g_p|^2, with zero diagonal
    pref = -1j * 2.0 * probe.g_p * alpha * np.sqrt(probe.gamma_ep / kappa) * kappa / abs(probe.g_p) ** 2
    m_kl = pref * cb1 / denom[:, None]
    spont = m_kl.T.copy()  # spont[l, k]
    return JumpChannelSet("cavity", readout, spont, dephasing_rates(readout, spont), alpha)


def freespace_channels(ensemble: AtomEnsemble, probe: ProbeParams) -> JumpChannelSet:
    """Channels for the free-space probe propagating through the sorted chain.

    readout:      c_k   = -i sqrt(2 gamma_ep) alpha sum_{l != k} d_b1^{k,l} D_b^{k,l}
    spontaneous:  c_l,k = -i sqrt(2 gamma_ep / d_p1) alpha d_b1^{k,l} D_b^{k,l},  k != l
    """
    dp1 = probe.require_freespace()
    alpha = probe.alpha_in_p
    db1, db = optical_depth_matrix(ensemble, probe)
    prod = db1 * db  # zero diagonal via db1
    readout = -1j * np.sqrt(2.0 * probe.gamma_ep) * alpha * prod.sum(axis=1)
    spont = (-1j * np.sqrt(2.0 * probe.gamma_ep / dp1) * alpha * prod).T.copy()
    return JumpChannelSet("freespace", readout, spont, dephasing_rates(readout, spont), alpha)
