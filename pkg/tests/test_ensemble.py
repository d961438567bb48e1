import logging
import math

import numpy as np
import pytest

from pairjump import ensemble
from pairjump.ensemble import (EnsembleError, EnsembleStatistics, fit_growth_rate,
                               occupation_probability, pair_from_state,
                               reconstruct_system_density, resolve_threads, run_ensemble,
                               spin_star_fit_window, trajectory_noise, trajectory_streams)
from pairjump.model import (Channel, DyadicPair, InteractionHamiltonian, ProductState,
                            SpinStarModel, initial_state)
from pairjump.oracle import analytic_occupation
from pairjump.propagator import IntegrationParams, propagate_pair
from pairjump.stochastic import Scheme

SHORT = IntegrationParams(0.01, 100)


def zero_model():
    z = np.zeros((2, 2))
    return InteractionHamiltonian(2, 2, [Channel(z, z)])


class TestRunEnsemble:
    def test_zero_coupling_single_trajectory(self):
        psi = ProductState([1, 0], [0, 1])
        stats = run_ensemble(zero_model(), "sse", 1, SHORT, initial=psi)
        np.testing.assert_array_equal(stats.mean_norm, 1)
        np.testing.assert_array_equal(stats.n_plus_mean, 1)
        np.testing.assert_array_equal(stats.lambda_stat, 0)
        assert stats.dead_count == 0 and stats.n_live == 1

    def test_shapes_and_start(self, spin1):
        m, _, _ = spin1
        stats = run_ensemble(m, "osmf", 64, SHORT, master_seed=3)
        assert isinstance(stats, EnsembleStatistics)
        assert stats.times.shape == (101,)
        assert stats.rho_s.shape == (101, 2, 2)
        np.testing.assert_allclose(stats.rho_s[0], [[1, 0], [0, 0]])
        assert stats.scheme is Scheme.OSMF

    def test_matches_single_pair_propagation(self, spin1):
        m, h, psi = spin1
        p = IntegrationParams(0.01, 20)
        stats = run_ensemble(m, "osse", 3, p, master_seed=11, threads=1)
        rhos = []
        for i in range(3):
            traj = propagate_pair(pair_from_state(psi), h, p, "osse", trajectory_streams(11, i))
            rhos.append(traj.pairs[-1])
        np.testing.assert_allclose(stats.rho_s[-1], reconstruct_system_density(rhos), atol=1e-13)

    @pytest.mark.parametrize("scheme", ["sse", "osmf"])
    def test_thread_count_does_not_change_results(self, scheme, monkeypatch):
        monkeypatch.setattr(ensemble, "BLOCK_SIZE", 16)
        m = SpinStarModel(2, 0.5)
        p = IntegrationParams(0.02, 30)
        runs = [run_ensemble(m, scheme, 100, p, master_seed=5, threads=t) for t in (1, 2, 8)]
        for other in runs[1:]:
            for name in ("mean_norm", "rho_s", "n_plus_std", "lambda_stat", "lambda_stat_stderr"):
                np.testing.assert_array_equal(getattr(runs[0], name), getattr(other, name))

    def test_seed_changes_results(self, spin1):
        m, _, _ = spin1
        a = run_ensemble(m, "sse", 20, SHORT, master_seed=1)
        b = run_ensemble(m, "sse", 20, SHORT, master_seed=2)
        assert not np.array_equal(a.mean_norm, b.mean_norm)

    def test_backends_agree(self, spin1):
        from pairjump import kernels
        m, _, _ = spin1
        runs = [run_ensemble(m, "osmf", 50, SHORT, master_seed=4, backend=b)
                for b in kernels.available_backends()]
        for other in runs[1:]:
            np.testing.assert_allclose(runs[0].rho_s, other.rho_s, rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("n_traj", [0, -3, 2.5])
    def test_invalid_count(self, spin1, n_traj):
        with pytest.raises(ValueError):
            run_ensemble(spin1[0], "sse", n_traj, SHORT)

    def test_generic_model_needs_initial_state(self):
        with pytest.raises(ValueError):
            run_ensemble(zero_model(), "sse", 2, SHORT)

    def test_unsupported_model(self):
        with pytest.raises(TypeError):
            run_ensemble("spin", "sse", 2, SHORT)

    def test_dead_trajectories_counted(self, caplog):
        big = ProductState([1e155, 1e155], [1e155, 1e155])
        h = SpinStarModel(1, 0.5)
        with caplog.at_level(logging.WARNING):
            with pytest.raises(EnsembleError):
                run_ensemble(h, "sse", 4, IntegrationParams(1.0, 3), initial=big)

    def test_partial_death_excluded(self, monkeypatch):
        # kill trajectory 0 by feeding it enormous noise
        real = ensemble._NoiseFeed

        class Loud(real):
            def __getitem__(self, key):
                out = super().__getitem__(key).copy()
                out[0] = 1e200
                return out

        monkeypatch.setattr(ensemble, "_NoiseFeed", Loud)
        stats = run_ensemble(SpinStarModel(1, 0.5), "sse", 5, IntegrationParams(0.01, 5))
        assert stats.dead_count == 1 and stats.n_live == 4
        assert np.all(np.isfinite(stats.mean_norm))


@pytest.fixture(scope="module")
def stats():
    return {s: run_ensemble(SpinStarModel(1, 0.5), s, 4000, IntegrationParams(0.01, 200),
                        master_seed=17) for s in Scheme}


class TestEnsembleInvariants:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_trace(self, stats, scheme):
        s = stats[scheme]
        tr = np.trace(s.rho_s, axis1=1, axis2=2)
        err = np.hypot(s.rho_s_stderr[:, 0, 0].real, s.rho_s_stderr[:, 1, 1].real)
        assert np.all(np.abs(tr.real - 1) <= 5 * err + 1e-12)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_hermitian_in_mean(self, stats, scheme):
        s = stats[scheme]
        diff = np.abs(s.rho_s - np.conj(np.swapaxes(s.rho_s, 1, 2)))
        err = np.abs(s.rho_s_stderr) + np.abs(np.swapaxes(s.rho_s_stderr, 1, 2))
        assert np.all(diff <= 5 * err + 1e-12)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_statistic_bounds(self, stats, scheme):
        s = stats[scheme]
        assert np.all(s.lambda_stat >= -10 * s.lambda_stat_stderr - 1e-12)
        assert np.all(s.n_plus_mean >= -5 * s.n_plus_stderr - 1e-12)
        assert np.all(s.n_plus_mean <= 1 + 5 * s.n_plus_stderr + 1e-12)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_tracks_exact_occupation(self, stats, scheme):
        s = stats[scheme]
        exact = analytic_occupation(0.5, s.times)
        assert np.all(np.abs(s.n_plus_mean - exact) <= 5 * s.n_plus_stderr + 0.02)

    def test_fluctuation_ordering(self, stats):
        std = [stats[s].n_plus_std[150] for s in (Scheme.SSE, Scheme.OSMF)]
        assert std[0] > std[1]


class TestReconstruction:
    def test_initial_pure_state(self, spin1):
        _, _, psi = spin1
        rho = reconstruct_system_density([pair_from_state(psi)] * 3)
        np.testing.assert_array_equal(rho, [[1, 0], [0, 0]])

    def test_orthogonal_environments(self):
        pair = DyadicPair(ProductState([1, 0], [1, 0]), ProductState([1, 0], [0, 1]))
        np.testing.assert_array_equal(reconstruct_system_density([pair]), 0)

    def test_empty(self):
        with pytest.raises(ValueError):
            reconstruct_system_density([])

    def test_occupation(self):
        assert occupation_probability([[1, 0], [0, 0]]) == 1
        assert occupation_probability([[0, 0], [0, 1]]) == 0
        with pytest.raises(ValueError):
            occupation_probability(np.eye(3))


class TestFit:
    def test_exponential(self):
        t = np.linspace(0, 3, 301)
        fit = fit_growth_rate((t, np.exp(2 * t)), (0, 3))
        assert fit.lambda_s == pytest.approx(2, abs=1e-10)
        assert fit.residual < 1e-10

    def test_constant(self):
        t = np.linspace(0, 3, 301)
        assert fit_growth_rate((t, np.ones_like(t)), (0, 3)).lambda_s == pytest.approx(0, abs=1e-12)

    def test_window_selects_samples(self):
        t = np.linspace(0, 4, 401)
        y = np.where(t <= 2, np.exp(t), np.exp(2) * np.exp(5 * (t - 2)))
        assert fit_growth_rate((t, y), (0, 2)).lambda_s == pytest.approx(1, abs=1e-9)

    def test_too_few_samples(self):
        t = np.linspace(0, 1, 5)
        with pytest.raises(ValueError, match="need 10"):
            fit_growth_rate((t, np.ones(5)), (0, 1))

    def test_nonpositive(self):
        t = np.linspace(0, 1, 20)
        with pytest.raises(ValueError):
            fit_growth_rate((t, np.zeros(20)), (0, 1))

    def test_spin_star_window(self):
        assert spin_star_fit_window(0.5) == (0.0, 3.0)
        assert spin_star_fit_window(2.0, (0.5, 1.0)) == (0.25, 0.5)


class TestNoise:
    def test_streams_are_distinct_and_reproducible(self):
        a1, a2 = trajectory_streams(3, 0)
        b1, _ = trajectory_streams(3, 0)
        c1, _ = trajectory_streams(3, 1)
        x = a1.standard_normal(4)
        assert np.array_equal(x, b1.standard_normal(4))
        assert not np.array_equal(x, a2.standard_normal(4))
        assert not np.array_equal(x, c1.standard_normal(4))

    def test_lazy_feed_matches_eager(self):
        feed = ensemble._NoiseFeed(7, [2, 3, 4], 150, 3)
        eager = trajectory_noise(7, [2, 3, 4], 150, 3)
        for s in range(150):
            for m in (0, 1):
                np.testing.assert_array_equal(feed[m, :, s], eager[m, :, s])


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("PAIRJUMP_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    with pytest.raises(ValueError):
        resolve_threads(0)
