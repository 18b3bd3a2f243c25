"""Weighted energies, the kinetic balance, sweep monitors, commutators."""

import numpy as np
import pytest

from debye_limit.energy import (
    SweepMember,
    energy_snapshot,
    gronwall_monitor,
    identity_2_12_check,
    kato_ponce_sample,
    write_ledger_csv,
)
from debye_limit.flows import EPState, LimitState, RunOptions, evolve
from debye_limit.grid import Field, Grid
from debye_limit.initial import InitParams, make_initial, random_smooth_field
from debye_limit.remainder import Remainder, remainder_series


def _field(grid, values):
    return Field(grid, np.asarray(values, dtype=float))


def _rem(grid, eps, t=0.0, n1=None, u1=None, phi1=None):
    zero = np.zeros(grid.n_points)
    return Remainder(
        t=t,
        eps=eps,
        n1=_field(grid, zero if n1 is None else n1),
        u1=_field(grid, zero if u1 is None else u1),
        phi1=_field(grid, zero if phi1 is None else phi1),
    )


def _lim(grid, t=0.0, n=None, u=None):
    ones = np.ones(grid.n_points)
    zero = np.zeros(grid.n_points)
    return LimitState(t, _field(grid, ones if n is None else n),
                      _field(grid, zero if u is None else u))


# ---------------------------------------------------------------- snapshots


def test_equilibrium_snapshot_is_identically_zero():
    grid = Grid(64)
    rem = _rem(grid, eps=1e-2)
    lim = _lim(grid)
    for gamma in (0, 1, 2):
        snap = energy_snapshot(rem, lim, gamma)
        assert snap.e_kin == 0.0
        assert snap.e_phi == 0.0
        assert snap.e_grad == 0.0
        assert snap.e_visc == 0.0
        assert snap.e_lap == 0.0
        assert snap.term_i == snap.term_ii == 0.0
        assert snap.term_iii == snap.term_iv == 0.0


def test_kinetic_and_forcing_values_single_mode():
    # u1 = cos, phi1 = sin on n0 = 1:
    #   e_kin = (1/2) int cos^2 = 1/4
    #   e_phi = (1/2) int sin^2 = 1/4
    #   I = -int (phi1)_x u1 = -2*pi int cos^2 = -pi
    grid = Grid(128)
    x = grid.x
    rem = _rem(grid, eps=1e-2, u1=np.cos(2 * np.pi * x),
               phi1=np.sin(2 * np.pi * x))
    snap = energy_snapshot(rem, _lim(grid), gamma=0)
    assert abs(snap.e_kin - 0.25) < 1e-14
    assert abs(snap.e_phi - 0.25) < 1e-14
    assert abs(snap.term_i + np.pi) < 1e-12
    # zero background velocity kills the transport and stretching terms
    assert snap.term_iii == 0.0
    assert snap.term_iv == 0.0


def test_gamma_weight_applies_derivative():
    grid = Grid(128)
    u1 = np.sin(2 * np.pi * grid.x)
    snap0 = energy_snapshot(_rem(grid, 1e-3, u1=u1), _lim(grid), gamma=0)
    snap1 = energy_snapshot(_rem(grid, 1e-3, u1=u1), _lim(grid), gamma=1)
    assert abs(snap0.e_kin - 0.25) < 1e-14
    assert abs(snap1.e_kin - np.pi**2) < 1e-11 * np.pi**2


def test_energies_nonnegative_random_fields():
    grid = Grid(128)
    eps = 1e-2
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n1 = random_smooth_field(grid, rng, max_mode=6).values
        u1 = random_smooth_field(grid, rng, max_mode=6).values
        phi1 = random_smooth_field(grid, rng, max_mode=6).values
        n0 = 1.0 + 0.2 * random_smooth_field(grid, rng, max_mode=4).values
        u0 = 0.3 * random_smooth_field(grid, rng, max_mode=4).values
        rem = _rem(grid, eps, n1=n1, u1=u1, phi1=phi1)
        lim = _lim(grid, n=n0, u=u0)
        for gamma in (0, 1, 2):
            snap = energy_snapshot(rem, lim, gamma)
            for value in (snap.e_kin, snap.e_phi, snap.e_grad,
                          snap.e_visc, snap.e_lap):
                assert value >= 0.0


def test_density_bracket_violation_raises():
    grid = Grid(64)
    lim = _lim(grid)
    # reconstructed n0 + eps*n1 dips below zero; n0 alone is fine
    bad = _rem(grid, eps=0.5, n1=-3.0 * np.ones(grid.n_points))
    with pytest.raises(ValueError, match="density bracket"):
        energy_snapshot(bad, lim, gamma=0)


# ----------------------------------------------------------- balance check


def _paired_run(n_points=64, eps=1e-2, dt=1e-4, t_end=0.01):
    grid = Grid(n_points)
    n0, u0 = make_initial(InitParams(), grid)
    ep = evolve(EPState(0.0, n0, u0),
                RunOptions(dt=dt, t_end=t_end, eps=eps, record_every=1))
    lim = evolve(LimitState(0.0, n0, u0),
                 RunOptions(dt=dt, t_end=t_end, eps=0.0, record_every=1))
    return remainder_series(ep, lim), lim.states


def test_identity_defect_second_order_in_spacing():
    rems, lims = _paired_run()
    defects = {}
    for stride in (8, 4, 2):
        report = identity_2_12_check(rems, lims, gamma=0, stride=stride)
        assert report.spacing == pytest.approx(stride * 1e-4, rel=1e-12)
        defects[stride] = report.defect
    # centered differences: halving the spacing divides the defect by ~4
    assert 3.0 < defects[8] / defects[4] < 5.0
    assert 3.0 < defects[4] / defects[2] < 5.0


def test_identity_defect_zero_on_equilibrium():
    grid = Grid(64)
    times = [0.0, 0.1, 0.2, 0.3]
    rems = [_rem(grid, 1e-2, t=t) for t in times]
    lims = [_lim(grid, t=t) for t in times]
    report = identity_2_12_check(rems, lims, gamma=1)
    assert report.defect == 0.0
    assert all(d == 0.0 for d in report.defects)


def test_identity_check_validation():
    grid = Grid(64)
    rems = [_rem(grid, 1e-2, t=t) for t in (0.0, 0.1, 0.2)]
    lims = [_lim(grid, t=t) for t in (0.0, 0.1, 0.2)]
    with pytest.raises(ValueError, match="stride"):
        identity_2_12_check(rems, lims, gamma=0, stride=0)
    with pytest.raises(ValueError, match="at least three"):
        identity_2_12_check(rems[:2], lims[:2], gamma=0)
    crooked = [_rem(grid, 1e-2, t=t) for t in (0.0, 0.1, 0.35)]
    with pytest.raises(ValueError, match="uniformly spaced"):
        identity_2_12_check(crooked, lims, gamma=0)


# ---------------------------------------------------------------- monitors


def _member(grid, eps, amp, blew_up=False):
    u1 = amp * np.sin(2 * np.pi * grid.x)
    return SweepMember(eps, (_rem(grid, eps, u1=u1),), blew_up)


def test_gronwall_pass_and_fail():
    grid = Grid(64)
    flat = [_member(grid, 1e-1, 1.0), _member(grid, 1e-2, 1.0),
            _member(grid, 1e-3, 1.0)]
    report = gronwall_monitor(flat, s=0)
    assert report.verdict == "PASS"
    assert report.reference_eps == 1e-1
    assert report.bound_factor == 2.0

    blown = [_member(grid, 1e-1, 1.0), _member(grid, 1e-2, 10.0)]
    assert gronwall_monitor(blown, s=0).verdict == "FAIL"
    # a generous factor turns the same data into a PASS
    assert gronwall_monitor(blown, s=0, bound_factor=100.0).verdict == "PASS"


def test_gronwall_reference_is_largest_eps_any_order():
    grid = Grid(64)
    members = [_member(grid, 1e-3, 1.0), _member(grid, 1e-1, 1.0),
               _member(grid, 1e-2, 1.0)]
    report = gronwall_monitor(members, s=1)
    assert report.reference_eps == 1e-1
    # sup_norms preserve the input order
    assert [pair[0] for pair in report.sup_norms] == [1e-3, 1e-1, 1e-2]


def test_gronwall_inconclusive_on_blowup():
    grid = Grid(64)
    members = [_member(grid, 1e-1, 1.0), _member(grid, 1e-2, 1.0, blew_up=True)]
    assert gronwall_monitor(members, s=0).verdict == "INCONCLUSIVE"


def test_gronwall_single_member_passes():
    grid = Grid(64)
    assert gronwall_monitor([_member(grid, 1e-2, 3.0)], s=2).verdict == "PASS"


def test_gronwall_validation():
    grid = Grid(64)
    with pytest.raises(ValueError, match="at least one"):
        gronwall_monitor([], s=0)
    with pytest.raises(ValueError, match="bound_factor"):
        gronwall_monitor([_member(grid, 1e-2, 1.0)], s=0, bound_factor=0.0)


# ------------------------------------------------------------- commutators


def test_kato_ponce_k1_never_exceeds_one():
    # k = 1: lhs = ||(f_x) g|| <= max|f_x| ||g|| <= rhs, exactly
    grid = Grid(128)
    rng = np.random.default_rng(11)
    for _ in range(20):
        f = random_smooth_field(grid, rng, max_mode=8)
        g = random_smooth_field(grid, rng, max_mode=8)
        sample = kato_ponce_sample(f, g, 1)
        assert sample.ratio <= 1.0 + 1e-12
        assert sample.lhs >= 0.0 and sample.rhs > 0.0


def test_kato_ponce_uniform_over_orders():
    grid = Grid(128)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(30):
        f = random_smooth_field(grid, rng, max_mode=8)
        g = random_smooth_field(grid, rng, max_mode=8)
        for k in (1, 2, 3):
            sample = kato_ponce_sample(f, g, k)
            assert np.isfinite(sample.ratio)
            worst = max(worst, sample.ratio)
    assert worst <= 10.0


def test_kato_ponce_constant_f_gives_zero():
    grid = Grid(128)
    rng = np.random.default_rng(5)
    f = Field(grid, np.full(grid.n_points, 3.2))
    g = random_smooth_field(grid, rng, max_mode=8)
    for k in (1, 2, 3):
        # rhs has no |f_x| or |d^k f| left, and the guarded ratio comes
        # back 0. lhs is pure FFT roundoff, but d^3 amplifies it by the
        # cube of the fine-grid Nyquist wavenumber, hence the loose cap.
        sample = kato_ponce_sample(f, g, k)
        assert sample.lhs <= 1e-6
        assert sample.rhs == 0.0
        assert sample.ratio == 0.0


def test_kato_ponce_bitwise_reproducible():
    grid = Grid(128)
    first, second = [], []
    for sink in (first, second):
        rng = np.random.default_rng(123)
        for _ in range(10):
            f = random_smooth_field(grid, rng, max_mode=8)
            g = random_smooth_field(grid, rng, max_mode=8)
            sink.append(kato_ponce_sample(f, g, 2))
    for a, b in zip(first, second):
        assert a.lhs == b.lhs and a.rhs == b.rhs and a.ratio == b.ratio


def test_kato_ponce_resolution_insensitive():
    # same coefficients on two grids: the norms are band-limited and
    # land identically, while the grid maxima in the rhs creep toward
    # the continuous sup at second order, so the ratio moves a little
    samples = {}
    for n in (128, 256):
        grid = Grid(n)
        rng = np.random.default_rng(7)
        f = random_smooth_field(grid, rng, max_mode=8)
        g = random_smooth_field(grid, rng, max_mode=8)
        samples[n] = kato_ponce_sample(f, g, 3)
    assert samples[128].lhs == pytest.approx(samples[256].lhs, rel=1e-12)
    assert samples[128].ratio == pytest.approx(samples[256].ratio, rel=1e-3)


def test_kato_ponce_validation():
    grid = Grid(128)
    rng = np.random.default_rng(0)
    f = random_smooth_field(grid, rng, max_mode=4)
    g = random_smooth_field(grid, rng, max_mode=4)
    with pytest.raises(ValueError, match="order"):
        kato_ponce_sample(f, g, 0)
    other = random_smooth_field(Grid(64), rng, max_mode=4)
    with pytest.raises(ValueError, match="share a grid"):
        kato_ponce_sample(f, other, 2)


# ------------------------------------------------------------------ ledger


def test_ledger_csv_layout(tmp_path):
    grid = Grid(64)
    snaps = [energy_snapshot(_rem(grid, 1e-2, t=t), _lim(grid, t=t), gamma=0)
             for t in (0.0, 0.1, 0.2)]
    path = tmp_path / "ledger.csv"
    write_ledger_csv(snaps, {1: 0.5}, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,gamma,e_kin,e_phi,e_grad,e_visc,e_lap,I,II,III,IV,defect"
    assert len(lines) == 4
    assert lines[1].endswith("nan")
    assert lines[2].endswith("0.5")
    assert lines[3].endswith("nan")
