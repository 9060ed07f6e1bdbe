import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmqubits.dynamics import XState, x_density_matrix
from nmqubits.entanglement import (EntanglementTrace, EsdEvent, concurrence_general,
                                   concurrence_x, concurrence_x_array, detect_events,
                                   read_events_csv, write_events_csv)
from nmqubits.errors import ContractError
from nmqubits.preparation import basis_state

from conftest import random_x_array


def brute_force_concurrence(rho):
    """Non-Hermitian route: square roots of the eigenvalues of rho * rho_tilde."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    lam = np.linalg.eigvals(rho @ yy @ rho.conj() @ yy)
    s = np.sort(np.sqrt(np.clip(lam.real, 0, None)))[::-1]
    return max(0.0, s[0] - s[1] - s[2] - s[3])


class TestGeneral:
    def test_bell(self):
        psi = (basis_state("ge") - 1j * basis_state("eg")) / np.sqrt(2)
        assert concurrence_general(np.outer(psi, psi.conj())) == pytest.approx(1.0, abs=1e-12)

    def test_product(self):
        psi = basis_state("ee")
        assert concurrence_general(np.outer(psi, psi.conj())) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("q", [0.25, 0.5, 0.9])
    def test_werner_like(self, q):
        rho = x_density_matrix([0, 0.5, 0.5, 0, q / 2 * np.cos(0.3), q / 2 * np.sin(0.3), 0, 0])
        assert concurrence_general(rho) == pytest.approx(q, abs=1e-12)
        assert brute_force_concurrence(rho) == pytest.approx(q, abs=1e-8)

    def test_local_unitary_invariance(self, rng):
        from scipy.stats import unitary_group
        rho = x_density_matrix(random_x_array(rng))
        u = np.kron(unitary_group.rvs(2, random_state=1), unitary_group.rvs(2, random_state=2))
        assert concurrence_general(u @ rho @ u.conj().T) == pytest.approx(
            concurrence_general(rho), abs=1e-10)

    def test_non_hermitian(self):
        rho = np.eye(4, dtype=complex) / 4
        rho[0, 1] = 0.1
        with pytest.raises(ContractError):
            concurrence_general(rho)

    def test_trace(self):
        with pytest.raises(ContractError):
            concurrence_general(np.eye(4) / 2)


class TestXForm:
    def test_bell(self):
        assert concurrence_x(XState(0, 0.5, 0.5, 0, 0, -0.5)) == 1.0

    def test_separable(self):
        assert concurrence_x(XState(0.5, 0, 0, 0.5)) == 0.0

    def test_random_states(self, rng):
        ys = random_x_array(rng, 20)
        for y in ys:
            assert concurrence_x(y) == pytest.approx(concurrence_general(x_density_matrix(y)),
                                                     abs=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_property(self, seed):
        y = random_x_array(np.random.default_rng(seed))
        want = brute_force_concurrence(x_density_matrix(y))
        assert concurrence_x(y) == pytest.approx(want, abs=1e-7)
        assert 0.0 <= concurrence_x(y) <= 1.0

    def test_vectorised(self, rng):
        ys = random_x_array(rng, 50)
        np.testing.assert_allclose(concurrence_x_array(ys), [concurrence_x(y) for y in ys],
                                   rtol=0, atol=1e-15)

    def test_negative_products_clamped(self):
        # a transiently negative population must not produce NaN
        assert concurrence_x(np.array([-1e-3, 0.5, 0.5, 0.001, 0.0, 0.4, 0.0, 0.0])) == \
            pytest.approx(0.8)


def cos_trace(n=3001):
    t = np.linspace(0, 3 * np.pi, n)
    return EntanglementTrace(t, np.maximum(0.0, np.cos(t)))


class TestEvents:
    def test_constant_zero(self):
        t = np.linspace(0, 1, 11)
        events = detect_events(EntanglementTrace(t, np.zeros(11)))
        assert events == []

    def test_cosine_crossings(self):
        events = detect_events(cos_trace(), func=lambda t: max(0.0, np.cos(t)))
        assert [e.kind for e in events] == ["death", "birth", "death"]
        expected = [np.pi / 2, 3 * np.pi / 2, 5 * np.pi / 2]
        for ev, t in zip(events, expected):
            assert ev.time == pytest.approx(t, abs=1e-4)

    def test_cosine_interpolated(self):
        events = detect_events(cos_trace())
        assert [e.kind for e in events] == ["death", "birth", "death"]
        assert events[1].time == pytest.approx(3 * np.pi / 2, abs=1e-3)

    def test_alternation(self, rng):
        t = np.linspace(0, 10, 501)
        c = np.maximum(0, rng.normal(size=t.size))
        kinds = [e.kind for e in detect_events(EntanglementTrace(t, c))]
        assert all(a != b for a, b in zip(kinds, kinds[1:]))
        assert not kinds or kinds[0] == ("death" if c[0] >= 1e-6 else "birth")

    def test_starts_dead(self):
        t = np.linspace(0, 1, 11)
        events = detect_events(EntanglementTrace(t, np.where(t > 0.5, 0.3, 0.0)))
        assert [e.kind for e in events] == ["birth"]

    def test_non_monotone_grid(self):
        with pytest.raises(ContractError):
            detect_events(EntanglementTrace(np.array([0.0, 2.0, 1.0]), np.ones(3)))

    def test_csv_round_trip(self, tmp_path):
        events = [EsdEvent("death", 1.5), EsdEvent("birth", 2.25)]
        path = write_events_csv(events, tmp_path / "e.csv", "config_hash=x")
        assert path.read_text().splitlines()[:2] == ["# config_hash=x", "kind,time"]
        assert read_events_csv(path) == events


class TestTraceMetrics:
    def test_half_life(self):
        t = np.linspace(0, 5, 501)
        tr = EntanglementTrace(t, np.exp(-t))
        assert tr.half_life() == pytest.approx(np.log(2), abs=0.01)

    def test_half_life_never(self):
        t = np.linspace(0, 1, 11)
        assert EntanglementTrace(t, np.ones(11)).half_life() is None

    def test_amplitude_ignores_initial_decay(self):
        t = np.linspace(0, 10, 1001)
        assert EntanglementTrace(t, np.exp(-t)).oscillation_amplitude() == 0.0

    def test_amplitude_of_revivals(self):
        t = np.linspace(0, 10, 1001)
        c = np.exp(-0.1 * t) * np.abs(np.cos(t))
        amp = EntanglementTrace(t, c).oscillation_amplitude()
        assert amp == pytest.approx(np.exp(-0.1 * np.pi), abs=0.01)

    def test_csv_round_trip(self, tmp_path):
        tr = cos_trace(31)
        back = EntanglementTrace.from_csv(tr.to_csv(tmp_path / "c.csv", "h"))
        np.testing.assert_array_equal(back.concurrence, tr.concurrence)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            EntanglementTrace(np.zeros(3), np.zeros(4))
