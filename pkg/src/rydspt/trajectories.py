"""Wavefunction Monte-Carlo unravelling of the probed control branch.

Standard norm-threshold unravelling: draw u ~ U(0,1), evolve the no-jump
state until its squared norm reaches u, select a channel proportionally to
its rate, apply it, renormalize, repeat.  Channels:

  terminating:      cavity_or_field_loss (photon emitted), atomic_decay
  non-terminating:  readout, spontaneous(l)  (sigma_rr structure keeps the
                    excitation in r; they reshape/localize it)

Implementation notes.  Before the first jump every trajectory sits in the
shared deterministic no-jump state, so first-jump times are sampled directly
from the deterministic survival curve and unconverted trajectories cost
O(1).  Converted trajectories evolve drive-free under the exact step
propagator expm(A h), batched as one matrix product per step over groups of
fixed consecutive indices; grouping keeps every trajectory's arithmetic
independent of the total trajectory count, so records are bit-stable when
n_traj changes.  Jumps are applied at grid points (the step obeys
h <= jump_tol / max-rate, so the per-step jump probability stays small) with
the event time refined by log-interpolating the norm inside the step.

Per-trajectory randomness comes from the trajectory's own PCG64 stream
seeded by a SplitMix64 hash of (base_seed, index); the draw order is fixed
(threshold, then per jump: channel select, next threshold), making every
record reproducible independently of batching or scheduling.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .dynamics import DeterministicRun, Generator, run_deterministic
from .errors import ConfigError, ImpossibleJumpError, NumericalError

READOUT = "readout"
SPONTANEOUS = "spontaneous"
FIELD_LOSS = "cavity_or_field_loss"
ATOMIC_DECAY = "atomic_decay"
_TERMINATING = (FIELD_LOSS, ATOMIC_DECAY)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 mixing round; stable across releases by contract."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def traj_stream_seed(base_seed: int, index: int) -> int:
    """Seed of trajectory `index`'s RNG stream, a SplitMix64 hash of (base, index)."""
    return splitmix64(splitmix64(base_seed & _MASK64) ^ (((index + 1) * _GOLDEN) & _MASK64))


@dataclass(frozen=True)
class JumpEvent:
    t: float
    kind: str
    l: int | None = None


@dataclass
class TrajectoryRecord:
    """Ordered jump events plus outcome classification for one trajectory."""

    seed: int
    events: list[JumpEvent]
    n_readout: int
    outcome: str  # "stored_then_lost" | "never_stored"
    converted: bool  # photon converted to a Rydberg excitation (IM estimator)
    terminated: bool
    t_end: float

    def __post_init__(self):
        ts = [ev.t for ev in self.events]
        if any(t2 <= t0 for t0, t2 in zip(ts, ts[1:])):
            raise NumericalError("jump events must be strictly increasing in t")


@dataclass
class RunStats:
    """Batch estimators; errors are binomial / sample standard errors."""

    n_traj: int
    n_th: int
    im_probability: float
    im_stderr: float
    efficiency: float
    efficiency_stderr: float
    mean_readout_jumps: float
    mean_readout_stderr: float
    histogram: dict[int, int]
    records: list[TrajectoryRecord] | None = None
    population_samples: dict | None = None

    def efficiency_at(self, n_th: int) -> float:
        """Re-threshold the stored histogram; monotone nonincreasing in n_th."""
        total = sum(self.histogram.values())
        hit = sum(c for n, c in self.histogram.items() if n >= n_th)
        return hit / total if total else 0.0


def _binom_err(p: float, n: int) -> float:
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / n)) if n > 0 else 0.0


def apply_jump(gen: Generator, psi: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Apply a probe channel L = sum_k c_k sigma_rr^k and renormalize.

    The operator annihilates everything but the r components, so the new
    state is c * r restricted to the r block.
    """
    new = np.zeros_like(psi)
    new[gen.sl_r] = coeffs * psi[gen.sl_r]
    norm = np.linalg.norm(new)
    if norm < 1e-150:
        raise ImpossibleJumpError("jump operator annihilated the state; rate bookkeeping bug")
    return new / norm


def classify_outcome(events: list[JumpEvent], reached_storage: bool, r_dominant_no_jump: bool) -> tuple[str, bool]:
    """(outcome, converted).

    converted: the first jump (if any) was a non-terminating probe jump, or
    no jump occurred at all and the surviving state was r-dominant at pulse
    end.  reached_storage: the conditional r population exceeded 1/2 before
    termination (true by construction once a probe jump fires).  A CW device
    eventually loses any stored excitation, so "stored_then_lost" does not
    require the loss to fall inside the observation window.
    """
    if not events:
        converted = r_dominant_no_jump
        stored = reached_storage or r_dominant_no_jump
    elif events[0].kind not in _TERMINATING:
        converted = True
        stored = True
    else:
        converted = False
        stored = reached_storage
    return ("stored_then_lost" if stored else "never_stored"), converted


class _PointEngine:
    """Shared immutable context for all trajectories of one parameter point."""

    def __init__(
        self,
        gen: Generator,
        t_max: float,
        det: DeterministicRun | None = None,
        dt_obs: float = 0.25,
        jump_tol: float = 0.05,
        h_cap: float = 1.0,
    ):
        self.gen = gen
        self.t_max = float(t_max)
        self.det = det if det is not None else run_deterministic(gen, t_max, dt_obs)
        ch = gen.channels
        self.read2 = np.abs(ch.readout) ** 2
        self.spont2 = np.abs(ch.spont) ** 2
        self.spont2_col = self.spont2.sum(axis=0)
        total_rate = self.det.rate_out + self.det.rate_decay + self.det.rate_probe
        g2 = 2.0 * ch.gamma_r
        r_hat = max(float(total_rate.max()), float(g2.mean() + g2.std()), 1e-9)
        h = min(jump_tol / r_hat, h_cap, self.t_max / 8.0)
        self.n_steps = int(np.ceil(self.t_max / h))
        self.h = self.t_max / self.n_steps
        self.prop = expm(gen.matrix * self.h)
        self.prop_dyadic = [expm(gen.matrix * self.h / 2 ** (j + 1)) for j in range(12)]
        nt = self.det.norm_total
        self.r_frac = self.det.r_pop / np.maximum(nt, 1e-300)
        self.r_frac_runmax = np.maximum.accumulate(self.r_frac)
        pulse_idx = min(self.det.index_at(gen.pulse.end), len(self.r_frac) - 1)
        self.r_dominant_no_jump = bool(self.r_frac[pulse_idx] > 0.5)

    def _propagate_fraction(self, psi: np.ndarray, delta: float) -> np.ndarray:
        """e^{A delta} psi for 0 <= delta < h via dyadic composition (drive-free)."""
        frac = delta / self.h
        out = psi
        for j in range(12):
            frac *= 2.0
            if frac >= 1.0:
                out = self.prop_dyadic[j] @ out
                frac -= 1.0
        return out

    def _column_rates(self, psi: np.ndarray) -> tuple[float, float, float, float]:
        r2 = np.abs(psi[self.gen.sl_r]) ** 2
        out = abs(self.gen.alpha_out(psi, 0.0, drive_active=False)) ** 2
        decay = self.gen.rate_decay(psi)
        return out, decay, float(self.read2 @ r2), float(self.spont2_col @ r2)

    def _select_channel(self, psi: np.ndarray, rates: tuple[float, float, float, float], x: float):
        """Map a uniform draw to (kind, l, coeffs); probabilities sum to 1 exactly."""
        out, decay, readout, spont = rates
        total = out + decay + readout + spont
        if total <= 0.0:
            raise ImpossibleJumpError("norm crossed threshold with zero total jump rate")
        probs = np.array([out, decay, readout, spont]) / total
        if abs(probs.sum() - 1.0) > 1e-12:
            raise NumericalError("channel probabilities failed to normalize")
        y = x * total
        if y < out:
            return FIELD_LOSS, None, None
        y -= out
        if y < decay:
            return ATOMIC_DECAY, None, None
        y -= decay
        if y < readout:
            return READOUT, None, self.gen.channels.readout
        y -= readout
        per_l = self.spont2 @ (np.abs(psi[self.gen.sl_r]) ** 2)
        cum = np.cumsum(per_l)
        l = int(np.searchsorted(cum, min(y, cum[-1] * (1.0 - 1e-15))))
        return SPONTANEOUS, l, self.gen.channels.spont[l]

    def run_indices(self, indices: list[int], base_seed: int, sample_steps: np.ndarray | None = None, pad_width: int = 256):
        """Run the given trajectory indices; returns (records, sample sums).

        The batched state matrix is padded to a fixed pad_width so the GEMM
        shape (hence each column's floating-point result) is independent of
        how many trajectories of the group converted; this is what makes
        records bit-stable when n_traj changes.
        """
        det, gen = self.det, self.gen
        m = len(indices)
        rngs = [np.random.Generator(np.random.PCG64(traj_stream_seed(base_seed, i))) for i in indices]
        seeds = [traj_stream_seed(base_seed, i) for i in indices]
        u0 = np.array([rng.random() for rng in rngs])
        t1 = det.first_crossings(u0)

        events: list[list[JumpEvent]] = [[] for _ in range(m)]
        terminated = np.zeros(m, dtype=bool)
        converted = np.zeros(m, dtype=bool)
        reached = np.zeros(m, dtype=bool)
        pending: dict[int, list[tuple[int, np.ndarray]]] = {}
        insert_step = np.full(m, -1, dtype=int)
        term_time = np.full(m, np.inf)

        # --- first jump, sampled from the shared deterministic curve -------
        for j in range(m):
            if np.isnan(t1[j]):
                reached[j] = bool(self.r_frac_runmax[-1] > 0.5)
                continue
            tj = float(t1[j])
            r1 = det.r_at(tj)
            psi1 = np.zeros(gen.dim, dtype=complex)
            psi1[gen.sl_r] = r1
            dr = det.rates_at(tj)
            r1_abs2 = np.abs(r1) ** 2
            rates = (dr["out"], dr["decay"], float(self.read2 @ r1_abs2), float(self.spont2_col @ r1_abs2))
            kind, l, coeffs = self._select_channel(psi1, rates, rngs[j].random())
            reached[j] = bool(self.r_frac_runmax[det.index_at(tj)] > 0.5)
            events[j].append(JumpEvent(tj, kind, l))
            if kind in _TERMINATING:
                terminated[j] = True
                term_time[j] = tj
                continue
            converted[j] = True
            reached[j] = True
            psi_new = apply_jump(gen, psi1, coeffs)
            u0[j] = rngs[j].random()
            gi = int(np.clip(np.ceil(tj / self.h - 1e-12), 0, self.n_steps))
            pending.setdefault(gi, []).append((j, self._propagate_fraction(psi_new, gi * self.h - tj)))
            insert_step[j] = gi

        conv_idx = [j for j in range(m) if converted[j]]
        col_of = {j: c for c, j in enumerate(conv_idx)}
        n_cols = len(conv_idx)
        sample_set = set(int(g) for g in sample_steps) if sample_steps is not None else set()
        samples = {g: np.zeros(5) for g in sample_set}

        def accumulate(g: int, psi_cols, alive, norms):
            ts = g * self.h
            i_det = det.index_at(ts)
            nt = max(det.norm_total[i_det], 1e-300)
            det_pops = np.array(
                [1.0, (nt - det.norm_sys[i_det]) / nt, abs(det.a[i_det]) ** 2 / nt, det.e_pop[i_det] / nt, det.r_pop[i_det] / nt]
            )
            acc = samples[g]
            for j in range(m):
                if np.isnan(t1[j]) or t1[j] > ts:
                    acc += det_pops
                elif terminated[j] and term_time[j] <= ts:
                    continue
                elif j in col_of:
                    c = col_of[j]
                    if insert_step[j] > g:
                        acc += np.array([1.0, 0.0, 0.0, 0.0, 1.0])  # fresh probe jump: all in r
                    elif alive is not None and alive[c] and norms[c] > 0:
                        psi = psi_cols[:, c] / np.sqrt(norms[c])
                        pa = abs(psi[gen.idx_a]) ** 2 if gen.idx_a is not None else 0.0
                        acc += np.array(
                            [1.0, 0.0, pa, float(np.sum(np.abs(psi[gen.sl_e]) ** 2)), float(np.sum(np.abs(psi[gen.sl_r]) ** 2))]
                        )

        # --- batched post-conversion evolution ------------------------------
        if n_cols:
            width = max(pad_width, n_cols)
            psi_cols = np.zeros((gen.dim, width), dtype=complex)
            alive = np.zeros(width, dtype=bool)
            thresh = np.zeros(width)
            norms = np.zeros(width)
            g_first = min(pending)
            loop_start = min([g_first] + [g for g in sample_set if g < g_first]) if sample_set else g_first
            prev_norm = norms
            for g in range(loop_start, self.n_steps + 1):
                if g > g_first:
                    psi_cols = self.prop @ psi_cols
                    norms = np.einsum("ij,ij->j", psi_cols.conj(), psi_cols).real
                    crossed = np.nonzero(alive & (norms < thresh))[0]
                    tg = g * self.h
                    for c in crossed:
                        j = conv_idx[c]
                        n0, n1, u = prev_norm[c], norms[c], thresh[c]
                        frac = 1.0
                        if n0 > n1 > 0 and n0 > u:
                            frac = float(np.clip(np.log(n0 / u) / np.log(n0 / n1), 0.0, 1.0))
                        t_star = tg - self.h + frac * self.h
                        t_star = max(t_star, np.nextafter(events[j][-1].t, np.inf))
                        psi = psi_cols[:, c]
                        kind, l, coeffs = self._select_channel(psi, self._column_rates(psi), rngs[j].random())
                        events[j].append(JumpEvent(t_star, kind, l))
                        if kind in _TERMINATING:
                            terminated[j] = True
                            term_time[j] = t_star
                            alive[c] = False
                            psi_cols[:, c] = 0.0
                            norms[c] = 0.0
                        else:
                            psi_cols[:, c] = apply_jump(gen, psi, coeffs)
                            thresh[c] = rngs[j].random()
                            norms[c] = 1.0
                for j, psi_new in pending.get(g, []):
                    c = col_of[j]
                    psi_cols[:, c] = psi_new
                    alive[c] = True
                    thresh[c] = u0[j]
                    norms[c] = float(np.linalg.norm(psi_new) ** 2)
                prev_norm = norms
                if g in sample_set:
                    accumulate(g, psi_cols, alive, norms)
        else:
            for g in sorted(sample_set):
                accumulate(g, None, None, None)

        records = []
        for j in range(m):
            outcome, conv = classify_outcome(events[j], bool(reached[j]), self.r_dominant_no_jump)
            records.append(
                TrajectoryRecord(
                    seed=seeds[j],
                    events=events[j],
                    n_readout=sum(1 for ev in events[j] if ev.kind == READOUT),
                    outcome=outcome,
                    converted=conv,
                    terminated=bool(terminated[j]),
                    t_end=self.t_max,
                )
            )
        return records, samples


def batch_run(
    gen: Generator,
    t_max: float,
    n_traj: int,
    base_seed: int,
    n_th: int = 3,
    det: DeterministicRun | None = None,
    dt_obs: float = 0.25,
    jump_tol: float = 0.05,
    keep_records: bool = False,
    sample_times: np.ndarray | None = None,
    group_size: int = 256,
) -> RunStats:
    """Run n_traj trajectories and reduce them to RunStats (deterministic order).

    Trajectory i is driven entirely by the stream seeded from (base_seed, i),
    so the first k records are identical for any n_traj >= k.
    """
    if n_traj < 1:
        raise ConfigError("n_traj must be >= 1")
    engine = _PointEngine(gen, t_max, det=det, dt_obs=dt_obs, jump_tol=jump_tol)
    sample_steps = None
    if sample_times is not None:
        sample_steps = np.unique(np.clip(np.round(np.asarray(sample_times) / engine.h), 1, engine.n_steps).astype(int))
    all_records: list[TrajectoryRecord] = []
    sample_acc = {int(g): np.zeros(5) for g in sample_steps} if sample_steps is not None else None
    for start in range(0, n_traj, group_size):
        idxs = list(range(start, min(start + group_size, n_traj)))
        records, samples = engine.run_indices(idxs, base_seed, sample_steps, pad_width=group_size)
        all_records.extend(records)
        if sample_acc is not None:
            for g in sample_acc:
                sample_acc[g] += samples[g]
    return _reduce(all_records, n_th, engine, keep_records, sample_acc, n_traj)


def _reduce(records, n_th, engine, keep_records, sample_acc, n_traj) -> RunStats:
    n = len(records)
    im = sum(1 for r in records if r.converted) / n
    counts = np.array([r.n_readout for r in records])
    eff = float(np.mean(counts >= n_th))
    hist = Counter(int(c) for c in counts)
    mean_ro = float(counts.mean())
    mean_err = float(counts.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    pops = None
    if sample_acc is not None:
        order = sorted(sample_acc)
        cols = np.array([sample_acc[g] for g in order]) / n_traj
        pops = {
            "t": np.array([g * engine.h for g in order]),
            "alive": cols[:, 0],
            "pop_u": cols[:, 1],
            "pop_a": cols[:, 2],
            "pop_e": cols[:, 3],
            "pop_r": cols[:, 4],
        }
    return RunStats(
        n_traj=n,
        n_th=n_th,
        im_probability=im,
        im_stderr=_binom_err(im, n),
        efficiency=eff,
        efficiency_stderr=_binom_err(eff, n),
        mean_readout_jumps=mean_ro,
        mean_readout_stderr=mean_err,
        histogram=dict(sorted(hist.items())),
        records=records if keep_records else None,
        population_samples=pops,
    )


def run_trajectory(
    gen: Generator,
    t_max: float,
    base_seed: int,
    index: int = 0,
    det: DeterministicRun | None = None,
    dt_obs: float = 0.25,
    jump_tol: float = 0.05,
) -> TrajectoryRecord:
    """Single stochastic trajectory, bit-identical to member `index` of any
    batch_run with the same base_seed (runs the batch prefix up to index)."""
    stats = batch_run(
        gen, t_max, index + 1, base_seed, det=det, dt_obs=dt_obs, jump_tol=jump_tol, keep_records=True
    )
    return stats.records[index]


# ---------------------------------------------------------------------------
# Dense master-equation oracle (small N)
# ---------------------------------------------------------------------------


def master_equation_oracle(
    gen: Generator,
    t_eval: np.ndarray,
    n_max: int = 4,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> dict:
    """Integrate the full Lindblad equation in the single-excitation sector.

    The state space is (system amplitudes, input-photon mode u); terminating
    channels leak trace into the absorbing vacuum, non-terminating probe
    channels refill the r diagonal (K * rho elementwise, K = sum_j c_j c_j^+).
    Returns populations and the expected cumulative readout-jump count on
    t_eval.  Deliberately integrated with an off-the-shelf adaptive ODE
    solver, independent of the trajectory engine's exact propagators: this
    is the oracle side of the comparison.
    """
    if gen.n_atoms > n_max:
        raise ConfigError(f"master-equation oracle limited to N <= {n_max} atoms")
    dim = gen.dim
    ds = dim + 1  # u mode appended last
    iu = dim
    pulse = gen.pulse

    ch = gen.channels
    r0 = gen.sl_r.start
    k_fill = np.zeros((ds, ds), dtype=complex)
    for c in [ch.readout] + [ch.spont[l] for l in range(gen.n_atoms)]:
        full = np.zeros(ds, dtype=complex)
        full[r0 : r0 + gen.n_atoms] = c
        k_fill += np.outer(full, full.conj())
    read2 = np.zeros(ds)
    read2[r0 : r0 + gen.n_atoms] = np.abs(ch.readout) ** 2

    def g_u(t: float) -> float:
        rem = pulse.amplitude**2 - float(pulse.cum(t))
        if rem < 1e-18:
            return 0.0
        return float(pulse.f(t)) / np.sqrt(rem)

    a_base = np.zeros((ds, ds), dtype=complex)
    a_base[:dim, :dim] = gen.matrix

    def rhs(t, y):
        rho = y[:-1].reshape(ds, ds)
        gu = g_u(t)
        a_full = a_base.copy()
        a_full[iu, iu] = -0.5 * gu**2
        a_full[:dim, iu] = gen.drive * gu
        drho = a_full @ rho + rho @ a_full.conj().T + k_fill * rho
        readout_rate = float(np.real(np.sum(read2 * np.diag(rho))))
        return np.concatenate([drho.reshape(-1), [readout_rate]])

    rho0 = np.zeros((ds, ds), dtype=complex)
    if pulse.amplitude != 0.0:
        rho0[iu, iu] = 1.0
    y0 = np.concatenate([rho0.reshape(-1), [0.0 + 0.0j]])
    sol = solve_ivp(
        rhs,
        (0.0, float(np.asarray(t_eval)[-1])),
        y0,
        t_eval=np.asarray(t_eval, dtype=float),
        rtol=rtol,
        atol=atol,
        method="DOP853",
    )
    if not sol.success:
        raise NumericalError(f"master-equation oracle failed: {sol.message}")
    out = {"t": sol.t}
    pops_u, pops_a, pops_e, pops_r, traces, nread = [], [], [], [], [], []
    for i in range(sol.t.size):
        rho = sol.y[:-1, i].reshape(ds, ds)
        diag = np.real(np.diag(rho))
        pops_u.append(diag[iu])
        pops_a.append(diag[gen.idx_a] if gen.idx_a is not None else 0.0)
        pops_e.append(float(diag[gen.sl_e].sum()))
        pops_r.append(float(diag[gen.sl_r].sum()))
        traces.append(float(diag.sum()))
        nread.append(float(np.real(sol.y[-1, i])))
    out.update(
        pop_u=np.array(pops_u),
        pop_a=np.array(pops_a),
        pop_e=np.array(pops_e),
        pop_r=np.array(pops_r),
        trace=np.array(traces),
        readout_mean=np.array(nread),
    )
    return out
