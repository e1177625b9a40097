import numpy as np
import pytest
from scipy.special import lambertw

from rydspt.channels import JumpChannelSet, cavity_channels, dephasing_rates, freespace_channels
from rydspt.ensemble import AtomEnsemble, ProbeParams, pairwise_vdw
from rydspt.errors import SingularChannelError


def make_ensemble(positions, c6=1.0):
    positions = np.asarray(positions, dtype=float)
    return AtomEnsemble(positions=positions, c6=c6, vdw=pairwise_vdw(positions, c6))


TETRAHEDRON = np.array([[1.0, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)


def test_single_atom_cavity_readout_vanishes():
    ens = make_ensemble([[0, 0, 0]])
    ch = cavity_channels(ens, ProbeParams(g_p=1, omega_p=1, gamma_ep=1, kappa_p=1, alpha_in_p=0.8))
    assert ch.readout[0] == 0.0
    assert np.all(ch.spont == 0.0)
    assert np.all(ch.gamma_r == 0.0)


def test_zero_probe_amplitude_zeroes_everything():
    ens = make_ensemble([[0, 0, 0], [1, 0, 0]])
    for builder, probe in [
        (cavity_channels, ProbeParams(g_p=1, omega_p=1, gamma_ep=1, kappa_p=1, alpha_in_p=0.0)),
        (freespace_channels, ProbeParams(g_p=1, omega_p=1, gamma_ep=1, d_p1=0.3, alpha_in_p=0.0)),
    ]:
        ens1d = make_ensemble([[0.0], [1.0]]) if builder is freespace_channels else ens
        ch = builder(ens1d, probe)
        assert np.all(ch.readout == 0.0)
        assert np.all(ch.spont == 0.0)
        assert np.all(ch.gamma_r == 0.0)


def test_cavity_two_atom_hand_values():
    # all parameters 1, x_12 = gamma_ep: C_b1 = 1/(1-i)
    ens = make_ensemble([[0, 0, 0], [1, 0, 0]], c6=1.0)
    ch = cavity_channels(ens, ProbeParams(g_p=1, omega_p=1, gamma_ep=1, kappa_p=1, alpha_in_p=1.0))
    assert ch.readout[0] == pytest.approx(-0.8 - 0.4j, rel=1e-12)
    # independent complex-arithmetic evaluation of Eq-level formulas
    cb = 1 / (1 - 1j)
    expect_read = -2 * cb / (1 + cb)
    expect_spont = -2j / ((1 - 1j) * (1 + cb))
    assert ch.readout[0] == pytest.approx(expect_read, rel=1e-12)
    assert ch.spont[1, 0] == pytest.approx(expect_spont, rel=1e-12)
    assert ch.spont[0, 0] == 0.0 and ch.spont[1, 1] == 0.0


def test_channel_counts_and_diagonal_restriction():
    rng = np.random.default_rng(7)
    ens = make_ensemble(rng.normal(size=(6, 3)))
    ch = cavity_channels(ens, ProbeParams(g_p=0.5, omega_p=1.2, gamma_ep=1, kappa_p=1, alpha_in_p=0.9))
    assert ch.readout.shape == (6,)
    assert ch.spont.shape == (6, 6)
    assert np.all(np.diag(ch.spont) == 0.0)


def test_linear_scaling_in_alpha():
    rng = np.random.default_rng(3)
    ens = make_ensemble(rng.normal(size=(5, 3)))
    probe = ProbeParams(g_p=1, omega_p=1.1, gamma_ep=1, kappa_p=1, alpha_in_p=0.7)
    ch = cavity_channels(ens, probe)
    ch2 = ch.scaled(1.4)
    assert np.allclose(ch2.readout, 2.0 * ch.readout)
    assert np.allclose(ch2.spont, 2.0 * ch.spont)
    assert np.allclose(ch2.gamma_r, 4.0 * ch.gamma_r)
    # building at the doubled amplitude gives the same set
    ch_direct = cavity_channels(ens, ProbeParams(g_p=1, omega_p=1.1, gamma_ep=1, kappa_p=1, alpha_in_p=1.4))
    assert np.allclose(ch_direct.readout, ch2.readout)
    assert np.allclose(ch_direct.gamma_r, ch2.gamma_r)


def test_homogeneous_tetrahedron_rates_equal_and_relabel_invariant():
    probe = ProbeParams(g_p=0.5, omega_p=1.3, gamma_ep=1, kappa_p=1, alpha_in_p=0.7)
    ch = cavity_channels(make_ensemble(TETRAHEDRON, 1.0), probe)
    assert np.allclose(ch.gamma_r, ch.gamma_r[0], rtol=1e-12)
    perm = np.random.default_rng(0).permutation(4)
    ch_p = cavity_channels(make_ensemble(TETRAHEDRON[perm], 1.0), probe)
    assert ch_p.gamma_r.mean() == pytest.approx(ch.gamma_r.mean(), rel=1e-12)


def test_dephasing_rates_brute_force():
    rng = np.random.default_rng(42)
    n = 10
    readout = rng.normal(size=n) + 1j * rng.normal(size=n)
    spont = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    got = dephasing_rates(readout, spont)
    brute = np.zeros(n)
    for k in range(n):
        brute[k] = 0.5 * (abs(readout[k]) ** 2 + sum(abs(spont[l, k]) ** 2 for l in range(n)))
    assert np.allclose(got, brute, rtol=1e-12)


def test_dephasing_rates_point_values():
    n = 3
    readout = np.zeros(n, complex)
    readout[0] = np.sqrt(2.0)
    assert dephasing_rates(readout, np.zeros((n, n), complex))[0] == pytest.approx(1.0)
    assert np.all(dephasing_rates(np.zeros(n, complex), np.zeros((n, n), complex)) == 0.0)


def test_total_probe_rate_identity_random_states():
    # sum_j ||L_j psi||^2 == sum_k 2 gamma_r[k] |r_k|^2, exactly
    rng = np.random.default_rng(11)
    ens = make_ensemble(rng.normal(size=(10, 3)), c6=0.6)
    ch = cavity_channels(ens, ProbeParams(g_p=0.8, omega_p=1.5, gamma_ep=1, kappa_p=1, alpha_in_p=1.3))
    for _ in range(5):
        r = rng.normal(size=10) + 1j * rng.normal(size=10)
        per_channel = ch.readout_rate(r) + ch.spont_rates(r).sum()
        assert per_channel == pytest.approx(ch.probe_rate(r), rel=1e-10)


def test_global_phase_leaves_rates_unchanged():
    rng = np.random.default_rng(13)
    ens = make_ensemble(rng.normal(size=(6, 3)))
    ch = cavity_channels(ens, ProbeParams(g_p=1, omega_p=1, gamma_ep=1, kappa_p=1, alpha_in_p=1.0))
    ch_ph = ch.with_phase(0.77)
    assert np.allclose(ch_ph.gamma_r, ch.gamma_r)
    r = rng.normal(size=6) + 1j * rng.normal(size=6)
    assert ch_ph.readout_rate(r) == pytest.approx(ch.readout_rate(r), rel=1e-12)


def test_freespace_full_blockade_matches_uniform_closed_form():
    # V_kl -> inf: d_b1 -> d_p1 uniformly; compare against the geometric sum
    n, d = 8, 0.25
    pos = np.arange(n, dtype=float).reshape(n, 1)
    ens = make_ensemble(pos, c6=1e20)
    probe = ProbeParams(g_p=1, omega_p=1, gamma_ep=1, d_p1=d, alpha_in_p=0.9)
    ch = freespace_channels(ens, probe)

    def d_series(k):
        # uniform d with a zero at l = k
        row = np.full(n, d)
        row[k] = 0.0
        s = np.cumsum(row)
        total = 0.0
        for l in range(n):
            if l == k:
                continue
            inner = sum(row[lp] * np.exp(-(s[l] - s[lp] + row[lp])) for lp in range(l + 1))
            total += row[l] * (inner - 1.0)
        return -1j * np.sqrt(2.0) * 0.9 * total

    for k in (0, 3, 7):
        assert ch.readout[k] == pytest.approx(d_series(k), rel=1e-10)


def test_freespace_two_atom_direct_substitution():
    pos = np.array([[0.0], [1.0]])
    ens = make_ensemble(pos, c6=2.0)
    probe = ProbeParams(g_p=1, omega_p=1.5, gamma_ep=1.0, d_p1=0.4, alpha_in_p=1.1)
    ch = freespace_channels(ens, probe)
    x = 1.5**2 * 1.0 / 2.0
    db1 = 0.4 / (1 - 1j * x)
    d_downstream = db1 * (db1 * np.exp(-db1) - 1.0)
    assert ch.readout[1] == pytest.approx(-1j * np.sqrt(2.0) * 1.1 * d_downstream, rel=1e-12)
    # k=0 sees atom 1 downstream: D^{0,1} = d e^{-d} - 1 as well (d^{0,0} = 0)
    assert ch.readout[0] == pytest.approx(-1j * np.sqrt(2.0) * 1.1 * d_downstream, rel=1e-12)
    assert ch.spont[1, 0] == pytest.approx(-1j * np.sqrt(2.0 / 0.4) * 1.1 * d_downstream, rel=1e-12)


def test_freespace_readout_vanishes_at_unit_attenuation_sum():
    # constructed case: d_b1 e^{-d_b1} = 1 via the Lambert W function (needs
    # an attractive interaction so Im d_b1 < 0)
    d = complex(-lambertw(-1.0, 0))
    x = d.imag / d.real
    dp1 = abs(d) ** 2 / d.real
    omega_p, rho = 2.0, 1.0
    c6 = omega_p**2 * rho**6 / x  # negative
    pos = np.array([[0.0], [rho]])
    ens = make_ensemble(pos, c6=c6)
    ch = freespace_channels(ens, ProbeParams(g_p=1, omega_p=omega_p, gamma_ep=1.0, d_p1=float(dp1)))
    assert np.all(np.abs(ch.readout) < 1e-12)


def test_singular_channel_guard():
    from rydspt.channels import _check_denominator

    with pytest.raises(SingularChannelError):
        _check_denominator(np.array([-1.0 + 0j]))


def test_debug_csv_dump(tmp_path):
    ens = make_ensemble([[0, 0, 0], [1, 0, 0]])
    ch = cavity_channels(ens, ProbeParams(g_p=1, omega_p=1, gamma_ep=1, kappa_p=1, alpha_in_p=1.0))
    path = tmp_path / "channels.csv"
    ch.dump_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "channel_kind,l,k,re_c,im_c,gamma_r_k"
    assert len(lines) == 1 + 2 + 4  # header + readout rows + spont rows
