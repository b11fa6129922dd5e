"""Cost model: derivation, fitting, serialization."""

import io
import math
import random

import pytest

from mgwfbp import (
    Collective,
    CollectiveParams,
    CommModel,
    Measurement,
    allreduce_time,
    derive_ab,
    fit_ab,
    gamma_per_byte,
    load_measurements,
    p2p_time,
    save_measurements,
)


def test_comm_model_validation():
    CommModel(a=0.0, b=0.0)
    with pytest.raises(ValueError):
        CommModel(a=-1e-9, b=0.0)
    with pytest.raises(ValueError):
        CommModel(a=0.0, b=-1e-12)
    with pytest.raises(ValueError):
        CommModel(a=math.nan, b=0.0)
    with pytest.raises(ValueError):
        CommModel(a=0.0, b=math.inf)


def test_allreduce_time_linearity():
    model = CommModel(a=1.5, b=0.25)
    assert allreduce_time(0, model) == 1.5
    assert allreduce_time(4, model) == 2.5
    assert model.allreduce_time(16) == 1.5 + 4.0
    with pytest.raises(ValueError):
        allreduce_time(-1, model)


def test_superadditive_gap_is_exactly_a():
    # dyadic (a, b) and power-of-two sizes make every term exact in floats
    rng = random.Random(7)
    for _ in range(2000):
        a = rng.randrange(1, 1 << 20) / (1 << 16)
        b = rng.randrange(0, 1 << 20) / (1 << 40)
        m1 = 1 << rng.randrange(0, 24)
        m2 = 1 << rng.randrange(0, 24)
        model = CommModel(a=a, b=b)
        gap = allreduce_time(m1, model) + allreduce_time(m2, model) - allreduce_time(m1 + m2, model)
        assert gap == a


def test_p2p_and_gamma_helpers():
    assert p2p_time(1e-6, 1e-9, 1000) == 1e-6 + 1e-9 * 1000
    with pytest.raises(ValueError):
        p2p_time(-1e-6, 0.0, 1)
    with pytest.raises(ValueError):
        p2p_time(0.0, 0.0, -5)
    assert gamma_per_byte(4e-9, 4) == 1e-9
    with pytest.raises(ValueError):
        gamma_per_byte(1e-9, 0)


def test_collective_params_validation():
    CollectiveParams(Collective.RING, 3, 1e-6, 1e-9, 1e-10)  # ring takes any n >= 2
    with pytest.raises(ValueError):
        CollectiveParams(Collective.RING, 1, 1e-6, 1e-9, 1e-10)
    with pytest.raises(ValueError):
        CollectiveParams(Collective.BINARY_TREE, 6, 1e-6, 1e-9, 1e-10)
    p = CollectiveParams(Collective.BINARY_TREE, 4, 1e-6, 1e-9, 1e-10)
    assert p.with_nodes(16).n_nodes == 16
    with pytest.raises(ValueError):
        p.with_nodes(5)


def test_derive_ab_ring():
    # alpha chosen dyadic so 2(N-1)*alpha is exact
    alpha, beta, gamma = 2.0 ** -15, 2.0 ** -30, 2.0 ** -32
    for n in (2, 3, 4, 8, 5):
        m = derive_ab(CollectiveParams(Collective.RING, n, alpha, beta, gamma))
        assert m.a == 2 * (n - 1) * alpha
        assert m.b == (2 * (n - 1) / n) * beta + ((n - 1) / n) * gamma


def test_derive_ab_logarithmic_families():
    alpha, beta, gamma = 2.0 ** -14, 2.0 ** -28, 2.0 ** -31
    for n, steps in ((2, 1), (4, 2), (8, 3), (64, 6)):
        bt = derive_ab(CollectiveParams(Collective.BINARY_TREE, n, alpha, beta, gamma))
        assert bt.a == 2 * steps * alpha
        assert bt.b == steps * (2 * beta + gamma)
        rd = derive_ab(CollectiveParams(Collective.RECURSIVE_DOUBLING, n, alpha, beta, gamma))
        assert rd.a == steps * alpha
        assert rd.b == steps * (beta + gamma)
        rhd = derive_ab(CollectiveParams(Collective.RECURSIVE_HALVING_DOUBLING, n, alpha, beta, gamma))
        assert rhd.a == 2 * steps * alpha
        assert rhd.b == 2 * beta - (2 * beta + gamma) / n + gamma


def test_derive_ab_startup_grows_with_ring_size():
    alpha = 45.26e-6
    prev = 0.0
    for n in (2, 4, 8, 16, 32):
        a = derive_ab(CollectiveParams(Collective.RING, n, alpha, 0.0, 0.0)).a
        assert a > prev
        prev = a


def test_fit_ab_exact_recovery():
    truth = CommModel(a=3.2e-4, b=1.7e-9)
    samples = [
        Measurement(nbytes=m, seconds=allreduce_time(m, truth), n_nodes=4)
        for m in (1 << 10, 1 << 12, 1 << 14, 1 << 17, 1 << 20, 1 << 22)
    ]
    fitted = fit_ab(samples)
    assert math.isclose(fitted.a, truth.a, rel_tol=1e-12)
    assert math.isclose(fitted.b, truth.b, rel_tol=1e-12)


def test_fit_ab_refusals_and_clamp():
    with pytest.raises(ValueError):
        fit_ab([Measurement(1024, 1e-3, 4)])
    same_size = [Measurement(1024, 1e-3, 4), Measurement(1024, 1.1e-3, 4)]
    with pytest.raises(ValueError):
        fit_ab(same_size)
    mixed_nodes = [Measurement(1024, 1e-3, 4), Measurement(2048, 2e-3, 8)]
    with pytest.raises(ValueError):
        fit_ab(mixed_nodes)
    shrinking = [Measurement(1024, 2e-3, 4), Measurement(4096, 1e-3, 4)]
    with pytest.raises(ValueError):
        fit_ab(shrinking)
    # points on a steep line through a negative intercept: clamp a to 0
    noisy = [Measurement(1000, 1e-6, 4), Measurement(2000, 1.1e-3, 4)]
    fitted = fit_ab(noisy)
    assert fitted.a == 0.0
    assert fitted.b > 0


def test_model_record_round_trip():
    model = CommModel(a=0.0012345, b=1.5e-9)
    again = CommModel.loads(model.dumps())
    assert again == model
    with pytest.raises(ValueError):
        CommModel.loads("a=1 b=2")


def test_measurement_validation():
    with pytest.raises(ValueError):
        Measurement(0, 1e-3, 4)
    with pytest.raises(ValueError):
        Measurement(1024, 0.0, 4)
    with pytest.raises(ValueError):
        Measurement(1024, 1e-3, 1)


def test_measurement_csv_round_trip(tmp_path):
    rng = random.Random(11)
    samples = [
        Measurement(nbytes=rng.randrange(1, 1 << 24), seconds=rng.random() * 1e-2 + 1e-6, n_nodes=4)
        for _ in range(50)
    ]
    path = tmp_path / "m.csv"
    save_measurements(samples, path)
    assert load_measurements(path) == samples
    # file objects work too
    buf = io.StringIO()
    save_measurements(samples, buf)
    buf.seek(0)
    assert load_measurements(buf) == samples


def test_measurement_csv_header_checked(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("size,time,nodes\n1024,0.001,4\n")
    with pytest.raises(ValueError):
        load_measurements(path)
