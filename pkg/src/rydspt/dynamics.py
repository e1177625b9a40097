"""Single-excitation control-branch dynamics.

The state is the complex amplitude vector of one excitation shared between
the input field, the cavity mode (cavity variant), the e_c levels, and the
r_c levels.  Between jumps the evolution is linear with a constant
generator, so propagation uses exact matrix exponentials; the only
approximation anywhere is the Gauss-Legendre quadrature of the drive
convolution, taken on substeps short enough to resolve the fastest
generator frequency.

The incoming single photon is an amplitude drive f(t) with unit L2 norm.
The photon-not-yet-arrived amplitude |u(t)|^2 = 1 - int_0^t |f|^2 is carried
analytically; with it the no-jump norm decreases by exactly the summed
channel rates, which is what the trajectory unravelling samples against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.linalg import expm
from scipy.special import erf

from .channels import JumpChannelSet
from .ensemble import AtomEnsemble
from .errors import ConfigError, NumericalError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class PulseShape:
    """Gaussian single-photon envelope, f(t) = A (2/pi tau^2)^(1/4) e^{-(t-t0)^2/tau^2}.

    Normalized so that int |f|^2 dt = A^2 (A = 1 for one photon; other values
    exist only to exercise linearity).
    """

    t0: float
    tau: float
    kind: str = "gaussian"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ConfigError(f"unknown pulse kind {self.kind!r}")
        if self.tau <= 0:
            raise ConfigError("pulse tau must be > 0")

    def f(self, t):
        t = np.asarray(t, dtype=float)
        pref = self.amplitude * (2.0 / (np.pi * self.tau**2)) ** 0.25
        return pref * np.exp(-(((t - self.t0) / self.tau) ** 2))

    def cum(self, t):
        """Cumulative emitted norm int_-inf^t |f|^2."""
        t = np.asarray(t, dtype=float)
        return self.amplitude**2 * 0.5 * (1.0 + erf(np.sqrt(2.0) * (t - self.t0) / self.tau))

    @property
    def end(self) -> float:
        """Nominal end of the input pulse (5 sigma past center)."""
        return self.t0 + 5.0 * self.tau


@dataclass(frozen=True)
class ControlParams:
    """Control-branch parameters; cavity variant needs (g_c, kappa_c), free space needs d_c."""

    omega_c: float
    gamma_ec: float
    delta_big: float
    delta_small: float
    pulse: PulseShape
    g_c: float | None = None
    kappa_c: float | None = None
    d_c: float | None = None

    def __post_init__(self):
        if self.gamma_ec <= 0:
            raise ConfigError("gamma_ec must be > 0")

    def require_cavity(self) -> tuple[float, float]:
        if self.g_c is None or self.kappa_c is None:
            raise ConfigError("cavity variant requires g_c and kappa_c")
        return self.g_c, self.kappa_c

    def require_freespace(self) -> float:
        if self.d_c is None:
            raise ConfigError("free-space variant requires d_c")
        return self.d_c

    def cooperativity(self, n_atoms: int) -> float:
        g_c, kappa_c = self.require_cavity()
        return abs(g_c) ** 2 * n_atoms / (kappa_c * self.gamma_ec)


@dataclass(frozen=True)
class Generator:
    """Non-Hermitian single-excitation generator d psi/dt = A psi + b f(t).

    State layout: cavity [a, e_1..e_N, r_1..r_N]; free space [e_1..e_N,
    r_1..r_N] in ascending z.  The output-field amplitude is
    alpha_out = out_w . psi + out_f * f(t), with the f term present only
    while the input photon can still arrive (it dies with the first jump).
    """

    variant: str
    matrix: np.ndarray
    drive: np.ndarray
    out_w: np.ndarray
    out_f: float
    n_atoms: int
    gamma_ec: float
    channels: JumpChannelSet
    control: ControlParams
    idx_a: int | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def sl_e(self) -> slice:
        off = 0 if self.idx_a is None else 1
        return slice(off, off + self.n_atoms)

    @property
    def sl_r(self) -> slice:
        off = 0 if self.idx_a is None else 1
        return slice(off + self.n_atoms, off + 2 * self.n_atoms)

    @property
    def pulse(self) -> PulseShape:
        return self.control.pulse

    def alpha_out(self, psi: np.ndarray, f_t: float = 0.0, drive_active: bool = True) -> complex:
        out = complex(self.out_w @ psi)
        if drive_active:
            out += self.out_f * f_t
        return out

    def rate_decay(self, psi: np.ndarray) -> float:
        e = psi[self.sl_e]
        return float(2.0 * self.gamma_ec * np.sum(np.abs(e) ** 2))


def output_field(gen: Generator, psi: np.ndarray, f_t: float = 0.0, drive_active: bool = True) -> complex:
    """Outgoing field amplitude (cavity reflection or transmitted field)."""
    return gen.alpha_out(psi, f_t, drive_active)


def build_generator_cavity(ensemble: AtomEnsemble, control: ControlParams, channels: JumpChannelSet) -> Generator:
    """Cavity control branch:

    da/dt   = -kappa_c a + i g_c* sum_l e_l + sqrt(2 kappa_c) f(t)
    de_l/dt = -(i Delta + gamma_ec) e_l + i g_c a + i Omega_c r_l
    dr_l/dt = -(i delta + gamma_r[l]) r_l + i Omega_c* e_l

    alpha_out = sqrt(2 kappa_c) a - f(t).
    """
    n = ensemble.n_atoms
    if channels.n_atoms != n:
        raise ConfigError("channel set and ensemble disagree on atom count")
    g_c, kappa_c = control.require_cavity()
    dim = 2 * n + 1
    a = np.zeros((dim, dim), dtype=complex)
    a[0, 0] = -kappa_c
    a[0, 1 : n + 1] = 1j * np.conj(g_c)
    idx = np.arange(n)
    a[1 + idx, 0] = 1j * g_c
    a[1 + idx, 1 + idx] = -(1j * control.delta_big + control.gamma_ec)
    a[1 + idx, 1 + n + idx] = 1j * control.omega_c
    a[1 + n + idx, 1 + idx] = 1j * np.conj(control.omega_c)
    a[1 + n + idx, 1 + n + idx] = -(1j * control.delta_small + channels.gamma_r)
    b = np.zeros(dim, dtype=complex)
    b[0] = np.sqrt(2.0 * kappa_c)
    w = np.zeros(dim, dtype=complex)
    w[0] = np.sqrt(2.0 * kappa_c)
    return Generator("cavity", a, b, w, -1.0, n, control.gamma_ec, channels, control, idx_a=0)


def build_generator_fs(ensemble: AtomEnsemble, control: ControlParams, channels: JumpChannelSet) -> Generator:
    """Cascaded unidirectional free-space control branch.

    With eta = sqrt(d_c1 gamma_ec / 2) (d_c1 = d_c / N) and the field at atom
    l given by E_l = f + i eta sum_{l'<l} e_l', the amplitude equations are

    de_l/dt = -(i Delta + gamma_ec + eta^2/2) e_l + i eta E_l + i Omega_c r_l
    dr_l/dt = -(i delta + gamma_r[l]) r_l + i Omega_c* e_l

    and the transmitted field is E_out = f + i eta sum_l e_l.  The eta^2/2
    self-damping is the forward radiation loss; without it the no-jump norm
    would not decrease by exactly the summed channel rates.  The
    normalization reproduces Beer's law: CW intensity transmission e^{-d_c}
    at Omega_c = Delta = 0 (up to O(d_c^2/N) discretization).
    """
    n = ensemble.n_atoms
    if channels.n_atoms != n:
        raise ConfigError("channel set and ensemble disagree on atom count")
    if ensemble.positions.shape[1] == 1 and not ensemble.sorted_1d:
        raise ConfigError("free-space generator requires atoms sorted in z")
    d_c = control.require_freespace()
    eta = np.sqrt(d_c / n * control.gamma_ec / 2.0)
    dim = 2 * n
    a = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(n)
    a[idx, idx] = -(1j * control.delta_big + control.gamma_ec + eta**2 / 2.0)
    a[:n, :n] += np.tril(np.full((n, n), -(eta**2), dtype=complex), k=-1)
    a[idx, n + idx] = 1j * control.omega_c
    a[n + idx, idx] = 1j * np.conj(control.omega_c)
    a[n + idx, n + idx] = -(1j * control.delta_small + channels.gamma_r)
    b = np.zeros(dim, dtype=complex)
    b[:n] = 1j * eta
    w = np.zeros(dim, dtype=complex)
    w[:n] = 1j * eta
    return Generator("freespace", a, b, w, +1.0, n, control.gamma_ec, channels, control, idx_a=None)


# ---------------------------------------------------------------------------
# Exact propagation
# ---------------------------------------------------------------------------


def _spectral_bound(a: np.ndarray) -> float:
    """Row-sum bound on |eigenvalues|, used to size drive-quadrature substeps."""
    return float(np.max(np.abs(a).sum(axis=1)))


def _drive_quadrature_vectors(a: np.ndarray, b: np.ndarray, h: float, n_sub: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectors U_m and offsets tau_m with int_0^h e^{A(h-s)} b f(t+s) ds ~ sum_m f(t+tau_m) U_m."""
    h_sub = h / n_sub
    nodes = 0.5 * h_sub * (_GL_NODES + 1.0)  # GL nodes on [0, h_sub]
    weights = 0.5 * h_sub * _GL_WEIGHTS
    w_vecs = [expm(a * (h_sub - s)) @ b for s in nodes]
    p_sub = expm(a * h_sub)
    cols = []
    offs = []
    vecs = [w * wt for w, wt in zip(w_vecs, weights)]
    for j in range(n_sub - 1, -1, -1):
        # contribution of substep j, propagated through the remaining n_sub-1-j substeps
        for q in range(8):
            cols.append(vecs[q].copy())
            offs.append(j * h_sub + nodes[q])
        if j > 0:
            vecs = [p_sub @ v for v in vecs]
    return np.array(cols).T, np.array(offs)  # (dim, 8 n_sub), (8 n_sub,)


def propagate_nojump(gen: Generator, psi: np.ndarray, t: float, dt: float, drive: bool = True) -> np.ndarray:
    """Advance the state by dt under the no-jump generator (exact propagator).

    Includes the single-photon drive term unless `drive` is False (after any
    jump the not-yet-arrived photon amplitude is gone and f drops out).
    """
    if dt < 0:
        raise ConfigError("dt must be >= 0")
    if dt == 0:
        return psi.copy()
    out = expm(gen.matrix * dt) @ psi
    if drive and gen.pulse.amplitude != 0.0:
        n_sub = max(1, int(np.ceil(_spectral_bound(gen.matrix) * dt / 1.5)))
        u, offs = _drive_quadrature_vectors(gen.matrix, gen.drive, dt, n_sub)
        out = out + u @ gen.pulse.f(t + offs)
    return out


@dataclass
class DeterministicRun:
    """No-jump evolution on an observation grid, with loss bookkeeping.

    norm_total(t) = ||psi_sys||^2 + (photon still incoming) is the survival
    curve the trajectory unravelling samples first-jump times from.
    """

    gen: Generator
    t: np.ndarray
    a: np.ndarray  # cavity amplitude series (zeros for free space)
    r: np.ndarray  # (n, N) complex r-amplitudes
    e_pop: np.ndarray  # sum_l |e_l|^2
    r_pop: np.ndarray  # sum_l |r_l|^2
    alpha_out: np.ndarray  # complex output amplitude
    f_vals: np.ndarray
    f_cum: np.ndarray
    norm_sys: np.ndarray
    norm_total: np.ndarray
    rate_out: np.ndarray
    rate_decay: np.ndarray
    rate_readout: np.ndarray
    rate_probe: np.ndarray
    cum_dephase: np.ndarray
    i_out: float = 0.0
    i_decay: float = 0.0
    i_dephase: float = 0.0
    i_r_atom: np.ndarray = field(default=None)
    closure_residual: float = 0.0
    _norm_mono: np.ndarray = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def index_at(self, t: float) -> int:
        return int(np.clip(np.round(t / self.dt), 0, len(self.t) - 1))

    def r_at(self, t: float) -> np.ndarray:
        """Linear interpolation of the r-amplitude vector."""
        x = np.clip(t / self.dt, 0.0, len(self.t) - 1.0)
        i0 = int(np.floor(x))
        i1 = min(i0 + 1, len(self.t) - 1)
        w = x - i0
        return (1.0 - w) * self.r[i0] + w * self.r[i1]

    def rates_at(self, t: float) -> dict:
        x = np.clip(t / self.dt, 0.0, len(self.t) - 1.0)
        i0 = int(np.floor(x))
        i1 = min(i0 + 1, len(self.t) - 1)
        w = x - i0
        pick = lambda arr: float((1.0 - w) * arr[i0] + w * arr[i1])
        return {
            "out": pick(self.rate_out),
            "decay": pick(self.rate_decay),
            "readout": pick(self.rate_readout),
            "probe": pick(self.rate_probe),
        }

    def first_crossings(self, thresholds: np.ndarray) -> np.ndarray:
        """Times at which the monotone survival curve first reaches each threshold.

        Returns nan where the curve never drops that low (trajectory survives
        the whole window without a jump).
        """
        nt = self._norm_mono
        idx = np.searchsorted(-nt, -np.asarray(thresholds), side="left")
        out = np.full(len(thresholds), np.nan)
        ok = (idx > 0) & (idx < len(nt))
        i1 = idx[ok]
        n0, n1 = nt[i1 - 1], nt[i1]
        u = np.asarray(thresholds)[ok]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.log(n0 / u) / np.log(n0 / n1)
        frac = np.where(np.isfinite(frac), np.clip(frac, 0.0, 1.0), 1.0)
        out[ok] = self.t[i1 - 1] + frac * self.dt
        # thresholds above the initial norm jump immediately (cannot happen for u < 1)
        out[np.asarray(thresholds) >= nt[0]] = self.t[0]
        return out

    def to_csv(self, path) -> None:
        import csv as _csv

        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["t", "re_a_c", "im_a_c", "e_pop", "r_pop", "alpha_out_sq"])
            for i in range(len(self.t)):
                w.writerow(
                    [
                        repr(float(self.t[i])),
                        repr(float(self.a[i].real)),
                        repr(float(self.a[i].imag)),
                        repr(float(self.e_pop[i])),
                        repr(float(self.r_pop[i])),
                        repr(float(np.abs(self.alpha_out[i]) ** 2)),
                    ]
                )


def run_deterministic(
    gen: Generator,
    t_max: float,
    dt_obs: float = 0.25,
    initial_state: np.ndarray | None = None,
    drive: bool = True,
) -> DeterministicRun:
    """Propagate the no-jump state on a uniform grid and integrate the losses.

    The quadrature substep resolves the fastest generator frequency, so the
    drive convolution is accurate to ~1e-10 even for strongly detuned e
    states; loss integrals use Simpson on the observation grid.
    """
    a_mat = gen.matrix
    dim = gen.dim
    n_steps = max(2, int(np.ceil(t_max / dt_obs)))
    t_grid = np.arange(n_steps + 1) * dt_obs
    pulse = gen.pulse
    use_drive = drive and pulse.amplitude != 0.0

    p_obs = expm(a_mat * dt_obs)
    if use_drive:
        bound = _spectral_bound(a_mat)
        n_sub = int(np.clip(np.ceil(bound * dt_obs / 1.5), 1, 4096))
        u_vecs, offs = _drive_quadrature_vectors(a_mat, gen.drive, dt_obs, n_sub)
        f_table = pulse.f(t_grid[:-1, None] + offs[None, :])  # (n_steps, 8 n_sub)

    psi = np.zeros(dim, dtype=complex) if initial_state is None else np.asarray(initial_state, dtype=complex).copy()
    psis = np.empty((n_steps + 1, dim), dtype=complex)
    psis[0] = psi
    for g in range(n_steps):
        psi = p_obs @ psi
        if use_drive:
            psi += u_vecs @ f_table[g]
        psis[g + 1] = psi
    if not np.all(np.isfinite(psis[-1])):
        raise NumericalError("deterministic propagation diverged")

    n = gen.n_atoms
    e_ser = psis[:, gen.sl_e]
    r_ser = psis[:, gen.sl_r]
    a_ser = psis[:, gen.idx_a] if gen.idx_a is not None else np.zeros(n_steps + 1, dtype=complex)
    f_vals = pulse.f(t_grid) if use_drive else np.zeros(n_steps + 1)
    f_cum = pulse.cum(t_grid) if use_drive else np.zeros(n_steps + 1)
    alpha_out = psis @ gen.out_w + (gen.out_f * f_vals if use_drive else 0.0)
    e_pop = np.sum(np.abs(e_ser) ** 2, axis=1)
    r_abs2 = np.abs(r_ser) ** 2
    r_pop = r_abs2.sum(axis=1)
    norm_sys = np.sum(np.abs(psis) ** 2, axis=1)
    incoming = (pulse.amplitude**2 - f_cum) if use_drive else 0.0
    norm_total = norm_sys + incoming

    gamma_r = gen.channels.gamma_r
    rate_probe = r_abs2 @ (2.0 * gamma_r)
    rate_readout = r_abs2 @ (np.abs(gen.channels.readout) ** 2)
    rate_out = np.abs(alpha_out) ** 2
    rate_decay = 2.0 * gen.gamma_ec * e_pop

    i_out = float(simpson(rate_out, x=t_grid))
    i_decay = float(simpson(rate_decay, x=t_grid))
    i_r_atom = simpson(r_abs2, x=t_grid, axis=0)
    i_dephase = float(2.0 * gamma_r @ i_r_atom)
    cum_dephase = np.concatenate([[0.0], cumulative_trapezoid(rate_probe, t_grid)])
    total_in = pulse.amplitude**2 + norm_sys[0] if use_drive else norm_total[0]
    closure = (i_out + i_decay + i_dephase + norm_total[-1]) / total_in - 1.0 if total_in > 0 else 0.0

    return DeterministicRun(
        gen=gen,
        t=t_grid,
        a=a_ser,
        r=r_ser,
        e_pop=e_pop,
        r_pop=r_pop,
        alpha_out=alpha_out,
        f_vals=f_vals,
        f_cum=f_cum,
        norm_sys=norm_sys,
        norm_total=norm_total,
        rate_out=rate_out,
        rate_decay=rate_decay,
        rate_readout=rate_readout,
        rate_probe=rate_probe,
        cum_dephase=cum_dephase,
        i_out=i_out,
        i_decay=i_decay,
        i_dephase=i_dephase,
        i_r_atom=np.asarray(i_r_atom),
        closure_residual=float(closure),
        _norm_mono=np.minimum.accumulate(norm_total),
    )


def storage_probability(run: DeterministicRun, t_end: float | None = None) -> float:
    """Probability that the photon got converted to a Rydberg excitation by t_end.

    Unnormalized bookkeeping of the linear no-jump run: the r population
    still coherent plus the norm already routed into the (excitation
    preserving) probe channels; equals the trajectory-ensemble conversion
    probability up to the small chance of a converted excitation being
    re-emitted before t_end.
    """
    i = len(run.t) - 1 if t_end is None else run.index_at(t_end)
    return float(run.r_pop[i] + run.cum_dephase[i])
