import numpy as np
import pytest

from coulomb_lab.errors import EmptySampleSet, SchemaError
from coulomb_lab.oracle import QuadratureGas
from coulomb_lab.potential import Quadratic
from coulomb_lab.sampler import (
    CoulombGasSampler,
    GasParams,
    SampleSet,
    check_energy,
    init_configuration,
    integrated_autocorr_time,
    merge_samplesets,
    mh_step,
    rejection_sample_small_N,
    run_chain,
    sample_chains,
)


def params(N=8, beta=1.0, dim=2):
    return GasParams(N, beta, dim, Quadratic(0.5, dim))


def test_params_validation():
    with pytest.raises(ValueError):
        GasParams(0, 1.0, 2, Quadratic(0.5, 2))
    with pytest.raises(ValueError):
        GasParams(4, 1.0, 3, Quadratic(0.5, 2))
    assert params(16, 2.0).theta == pytest.approx(32.0)


def test_chains_are_reproducible_and_independent():
    sched = {"burnIn": 20, "thin": 2, "samples": 30}
    a = sample_chains(params(), sched, seed=3, chains=2)
    b = sample_chains(params(), sched, seed=3, chains=2)
    c = sample_chains(params(), sched, seed=4, chains=2)
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()
    assert not np.array_equal(a.positions[:30], a.positions[30:])


def test_energy_bookkeeping():
    p = params(6, 2.0)
    st = init_configuration(p, seed=1)
    for _ in range(50):
        mh_step(st, p)
    check_energy(st, p)
    assert 0 < st.acceptance <= 1


def test_step_scale_frozen_after_burn_in():
    p = params(5, 1.0)
    st = init_configuration(p, 2)
    S = run_chain(st, p, {"burnIn": 40, "thin": 1, "samples": 20})
    assert S.header["stepScale"] == st.stepScale
    assert S.header["acceptance"] > 0


@pytest.mark.parametrize("dim", [2, 3])
def test_single_particle_is_gaussian(dim):
    # [DERIVED] N=1: density exp(-beta |x|^2 / 2), so E|x|^2 = d / beta
    beta = 2.0
    S = sample_chains(params(1, beta, dim), {"burnIn": 200, "thin": 5, "samples": 20000}, seed=1)
    m = float(np.mean(np.sum(S.positions**2, axis=2)))
    assert m == pytest.approx(dim / beta, rel=0.04)


def test_two_particles_second_moment():
    # [DERIVED] N=2, beta=0.5, d=2: E|x|^2 per particle = 4.5 (centre of mass and relative Gamma laws)
    S = sample_chains(params(2, 0.5, 2), {"burnIn": 500, "thin": 5, "samples": 20000}, seed=2, chains=2)
    m = float(np.mean(np.sum(S.positions**2, axis=2)))
    assert m == pytest.approx(4.5, rel=0.05)
    g = QuadratureGas(params(2, 0.5, 2))
    assert g.rho1(np.zeros((1, 2)))[0] > 0


def test_rejection_sampler_matches_exact_moment():
    S = rejection_sample_small_N(params(2, 0.5, 2), seed=5, count=20000)
    m = float(np.mean(np.sum(S.positions**2, axis=2)))
    assert m == pytest.approx(4.5, rel=0.04)
    assert S.header["kind"] == "rejection"


def test_sampleset_round_trip(tmp_path):
    S = sample_chains(params(4), {"burnIn": 5, "thin": 1, "samples": 7}, seed=0)
    path = tmp_path / "s.bin"
    S.save(path)
    T = SampleSet.load(path)
    assert np.array_equal(S.positions, T.positions)
    assert T.header["schedule"]["samples"] == 7
    raw = path.read_bytes()
    # layout: 8-byte magic, uint32 LE header length, JSON header, float64 payload
    n = int.from_bytes(raw[8:12], "little")
    assert len(raw) == 12 + n + 8 * S.positions.size


def test_sampleset_errors(tmp_path):
    empty = tmp_path / "e.bin"
    empty.write_bytes(b"")
    with pytest.raises(EmptySampleSet):
        SampleSet.load(empty)
    bad = tmp_path / "b.bin"
    bad.write_bytes(b"notmagic" + b"\0" * 8)
    with pytest.raises(SchemaError):
        SampleSet.load(bad)


def test_merge_is_order_independent():
    sched = {"burnIn": 5, "thin": 1, "samples": 4}
    p = params(3)
    a = run_chain(init_configuration(p, 1, 0), p, sched)
    b = run_chain(init_configuration(p, 1, 1), p, sched)
    assert merge_samplesets([a, b]).digest() == merge_samplesets([b, a]).digest()


def test_autocorr_time():
    rng = np.random.default_rng(0)
    assert integrated_autocorr_time(rng.normal(size=20000)) == pytest.approx(1.0, abs=0.15)
    x = np.zeros(20000)
    e = rng.normal(size=20000)
    for k in range(1, x.size):
        x[k] = 0.9 * x[k - 1] + e[k]
    # AR(1): tau = (1 + phi) / (1 - phi) = 19
    assert integrated_autocorr_time(x) == pytest.approx(19.0, rel=0.2)


def test_estimator_wrapper():
    s = CoulombGasSampler(N=4, beta=1.0, samples=10, burn_in=10, thin=1, seed=0).fit(Quadratic(0.5, 2))
    assert s.transform().shape == (10, 4, 2)
    assert 0 < s.acceptance_ <= 1
