import math

import numpy as np
import pytest

from qdchain.analysis import (
    adiabaticity_trace,
    calibrate_ctap_width,
    revival_max,
    robustness_sweep,
    transfer_fidelity,
)
from qdchain.chain import ChainSpec, StateVector, spin_couplings, uniform_couplings
from qdchain.propagation import TimeGrid, evolve_schedule, uniform_amplitudes
from qdchain.protocols import Schedule, collective_pi_protocol, ctap_protocol, static_protocol
from qdchain.experiments import FIGURES

# max |A_1|^2 on [0.5, 50] for the uniform 9-site chain is 0.7745781 (reached at the
# cutoff, tau = 0.5); the largest genuine revival after the first zero is 0.6670221 at
# tau = 10.8405. Both from dense evaluation (5e5 points) of the closed form.
REVIVAL_DELTA = 0.225
LATE_REVIVAL_BOUND = 0.668


def evolve(n, sched, steps=2000):
    return evolve_schedule(ChainSpec(n), sched, StateVector.localized(n),
                           TimeGrid(0, sched.duration, steps))


def test_transfer_fidelity():
    assert abs(transfer_fidelity(evolve(9, collective_pi_protocol(9))) - 1) <= 1e-8
    zero = Schedule(((),) * 8, 3.0)
    assert transfer_fidelity(evolve(9, zero, 10)) == 0.0
    traj = evolve(5, ctap_protocol(5, 1.0, 3.0), 200)
    f = transfer_fidelity(traj)
    assert 0 <= f <= 1 and f == abs(traj.final_state[-1]) ** 2


def test_revival_spin_chain_full():
    traj = evolve(9, static_protocol(spin_couplings(9), math.pi), 1000)
    assert abs(revival_max(traj, 1) - 1) <= 1e-8


def test_revival_two_sites_full():
    traj = evolve(2, static_protocol(uniform_couplings(2), math.pi), 1000)
    assert abs(revival_max(traj, 1) - 1) <= 1e-8


def test_revival_uniform_chain_incomplete():
    traj = evolve(9, static_protocol(uniform_couplings(9), 50.0), 5000)
    assert revival_max(traj, 1, cutoff=0.5) < 1 - REVIVAL_DELTA
    assert revival_max(traj, 1, cutoff=2.0) < LATE_REVIVAL_BOUND


def test_revival_oracle_dense_closed_form():
    taus = np.linspace(0.5, 50, 20001)
    p1 = np.array([uniform_amplitudes(9, 1.0, tau).populations[0] for tau in taus])
    assert p1.max() < 1 - REVIVAL_DELTA
    assert p1[taus >= 2.0].max() < LATE_REVIVAL_BOUND


def test_revival_rejects_bad_site():
    traj = evolve(3, static_protocol(uniform_couplings(3), 1.0), 10)
    with pytest.raises(ValueError):
        revival_max(traj, 4)


def test_static_schedule_zero_ratio():
    sched = static_protocol([0.4, 1.1, 0.7, 2.0], 5.0)
    tr = adiabaticity_trace(ChainSpec(5), sched, TimeGrid(0, 5, 50))
    assert np.all(tr.ratio[np.isfinite(tr.ratio)] <= 1e-12)
    assert not tr.ambiguous.any()


def three_site_oracle(sched, tau):
    """|<psi_+-|d psi_0/d tau>| / |lam_+- - lam_0| for three dots, from the closed forms.

    With psi_0 = (cos th, 0, -sin th), tan th = t1/t2, and bright states
    (sin th, +-1, cos th)/sqrt(2), the coupling is |th'|/sqrt(2) and the gap W.
    """
    p1, p2 = sched.pulses[0][0], sched.pulses[1][0]
    t1, t2 = p1(tau), p2(tau)
    d1, d2 = p1.derivative(tau), p2.derivative(tau)
    return np.abs(d1 * t2 - t1 * d2) / (math.sqrt(2) * (t1 * t1 + t2 * t2) ** 1.5)


def test_three_site_ratio_matches_oracle():
    sched = ctap_protocol(3, 10.0, 5.0)
    grid = TimeGrid(0, sched.duration, 10000)
    tr = adiabaticity_trace(ChainSpec(3), sched, grid)
    tau = grid.times
    p1, p2 = sched.pulses[0][0], sched.pulses[1][0]
    both = (tau > p1.on) & (tau < p2.off)
    # central differences need both neighbours inside the smooth overlap
    inner = both & np.roll(both, 1) & np.roll(both, -1)
    err = np.abs(tr.ratio[inner] - three_site_oracle(sched, tau[inner]))
    assert err.max() <= 1e-6


def test_trace_flags_ambiguous_nodes():
    sched = ctap_protocol(5, 1.0, 2.0)
    tr = adiabaticity_trace(ChainSpec(5), sched, TimeGrid(0, sched.duration, 400))
    couplings = sched.sample_many(tr.grid.times)
    all_off = np.all(couplings == 0, axis=1)
    assert np.array_equal(tr.ambiguous, all_off)
    assert np.all(np.isnan(tr.ratio[all_off]))


def test_trace_rejects_even_chain():
    with pytest.raises(ValueError):
        adiabaticity_trace(ChainSpec(4), static_protocol([1, 1, 1], 1.0), TimeGrid(0, 1, 4))


@pytest.mark.parametrize("tag", ["fig3a", "fig3b"])
def test_dark_state_tracking_continuity(tag):
    cfg = FIGURES[tag]["ctap"]
    sched = ctap_protocol(9, cfg["t_max"], cfg["width"], cfg["delay"], cfg["total"])
    tr = adiabaticity_trace(ChainSpec(9), sched, TimeGrid(0, sched.duration, 2000))
    ov = tr.overlaps[np.isfinite(tr.overlaps)]
    assert ov.size > 1000 and ov.min() >= 0.99


def test_doubling_width_halves_peak_ratio():
    def peak(w):
        s = ctap_protocol(9, 1.0, w)
        return adiabaticity_trace(ChainSpec(9), s, TimeGrid(0, s.duration, 2000)).max_ratio

    assert peak(28.0) / peak(14.0) == pytest.approx(0.5, rel=0.05)


def test_fidelity_monotone_in_pulse_area():
    widths = 14.0 * 2.0 ** (np.arange(5) / 2)
    fids = [transfer_fidelity(evolve(9, ctap_protocol(9, 1.0, w))) for w in widths]
    assert all(b >= a - 1e-3 for a, b in zip(fids, fids[1:]))


def test_calibration_reproduces_fig3a_preset():
    w, f = calibrate_ctap_width(9, 1.0, range(10, 21), (0.65, 0.75))
    assert w == FIGURES["fig3a"]["ctap"]["width"]
    assert 0.65 <= f <= 0.75


def test_robustness_sigma_zero_matches_unperturbed():
    sched = ctap_protocol(5, 1.0, 3.0)
    grid = TimeGrid(0, sched.duration, 300)
    ref = transfer_fidelity(evolve_schedule(ChainSpec(5), sched, StateVector.localized(5), grid))
    rep = robustness_sweep(ChainSpec(5), sched, 0.0, 4, seed=3, grid=grid)
    assert np.all(rep.fidelities == ref)
    assert rep.std == 0.0


def test_robustness_deterministic_and_order_independent():
    sched = collective_pi_protocol(5)
    a = robustness_sweep(ChainSpec(5), sched, 0.1, 6, seed=11)
    b = robustness_sweep(ChainSpec(5), sched, 0.1, 6, seed=11)
    c = robustness_sweep(ChainSpec(5), sched, 0.1, 3, seed=11)
    assert a.fidelities.tobytes() == b.fidelities.tobytes()
    assert np.array_equal(a.fidelities[:3], c.fidelities)
    assert a.to_dict() == b.to_dict()
    d = robustness_sweep(ChainSpec(5), sched, 0.1, 6, seed=12)
    assert not np.array_equal(a.fidelities, d.fidelities)


def test_robustness_statistics_consistent():
    rep = robustness_sweep(ChainSpec(5), collective_pi_protocol(5), 0.2, 8, seed=0)
    f = rep.fidelities
    assert np.all((0 <= f) & (f <= 1))
    assert rep.mean == pytest.approx(f.mean()) and rep.min == f.min()
    assert rep.std == pytest.approx(f.std())
    assert rep.min < 1.0


def test_robustness_site_energy_disorder():
    sched = collective_pi_protocol(5)
    rep = robustness_sweep(ChainSpec(5), sched, 0.0, 4, seed=0, energy_sigma=0.3)
    assert np.all(rep.fidelities < 1.0)


def test_robustness_rejects():
    sched = collective_pi_protocol(3)
    with pytest.raises(ValueError):
        robustness_sweep(ChainSpec(3), sched, -0.1, 3, seed=0)
    with pytest.raises(ValueError):
        robustness_sweep(ChainSpec(3), sched, 0.1, 0, seed=0)
