"""Acceptance suite: one test, and one PASS/FAIL summary line, per criterion."""

import json
import time

import numpy as np
from numpy.polynomial import chebyshev

from net3 import autodiff as ad
from net3.cli import main
from net3.config import TrainConfig
from net3.data import SynthConfig, synthesize
from net3.graph import ModeNetwork, chebyshev_matrix_poly, laplacian, spectral_oracle
from net3.model import forward, init_params, loss, loss_terms
from net3.params import tree_flatten, tree_unflatten
from net3.tensor import vec
from net3.tgcn import (
    FlatGcnParams,
    TgclParams,
    flat_graph,
    flat_to_tensor,
    gcn_flat_forward,
    indicator_vectors,
    network_modes,
    tensor_to_flat,
    tgcl_forward,
)
from net3.training import value_and_grad
from net3.trnn import (
    count_params_mlstm,
    count_params_tlstm,
    reconstruct,
    reduce,
    rho_upper_bound,
)
from net3.workflows import (
    evaluate_future,
    evaluate_recovery,
    prepare_future,
    prepare_recovery,
    train_task,
)

from conftest import random_adjacency, random_network

REFERENCE_COUNTS = {
    "Motes": ((54, 4), 0.8, 18_552, 117_504, 84.21),
    "Revenue": ((410, 3), 0.2, 87_967, 669_120, 86.85),
    "Traffic": ((1000, 2), 0.1, 180_554, 1_088_000, 83.40),
}

REFERENCE_RHO_MAX = {
    "Motes": ((54, 4), 2.17),
    "Soil": ((42, 5, 2), 2.43),
    "Revenue": ((410, 3), 0.64),
    "Traffic": ((1000, 2), 0.31),
    "20CR": ((30, 30, 20, 6), 57.25),
}


def test_criterion_1_parameter_counts(acceptance, capsys):
    start = time.perf_counter()
    bad = []
    for name, (dims, rho, tl, ml, pct) in REFERENCE_COUNTS.items():
        assert main(["params", ",".join(map(str, dims)), str(rho), "8", "8", "--json"]) == 0
        rep = json.loads(capsys.readouterr().out)
        got = (rep["tlstm"], rep["mlstm"], rep["reduction_pct"])
        if got != (tl, ml, pct):
            bad.append(f"{name} {got}")
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 1.0
    acceptance(1, ok, f"Motes/Revenue/Traffic counts exact, {elapsed:.3f}s" if ok else f"mismatch {bad}, {elapsed:.3f}s")


def test_criterion_2_rho_max(acceptance):
    start = time.perf_counter()
    parts, bad = [], []
    for name, (dims, expected) in REFERENCE_RHO_MAX.items():
        got = rho_upper_bound(dims, 8, 8)
        parts.append(f"{name} {got:.4f}/{expected}")
        if abs(got - expected) > 0.005:
            bad.append(name)
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 1.0
    detail = "; ".join(parts) + (f"; outside 0.005: {', '.join(bad)}" if bad else "") + f"; {elapsed:.4f}s"
    acceptance(2, ok, detail)


def kronecker_oracle(x, nets, thetas):
    """sum_p theta_p (B_M kron ... kron B_1) vec(x) with B_m = A~_m if p_m else I."""
    active = network_modes(nets)
    total = np.zeros(x.size)
    for p, theta in thetas.items():
        bits = dict(zip(active, p))
        mat = np.ones((1, 1))
        for m, net in enumerate(nets):
            b = net.normalized if bits.get(m) else np.eye(net.size)
            mat = np.kron(b, mat)
        total += theta * (mat @ vec(x))
    return total


def test_criterion_3_kronecker_oracle(acceptance):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, instances = 0.0, 0
    for _ in range(150):
        n_modes = int(rng.integers(1, 4))
        dims = [int(n) for n in rng.integers(1, 6, size=n_modes)]
        nets = [random_network(rng, n, identity=n == 1 or rng.random() < 0.25) for n in dims]
        k = len(network_modes(nets))
        thetas = {p: float(rng.standard_normal()) for p in indicator_vectors(k)}
        params = TgclParams({p: np.array([[t]]) for p, t in thetas.items()}, "identity")
        x = rng.standard_normal(dims)
        out = tgcl_forward(x[..., None], nets, params)[..., 0]
        worst = max(worst, float(np.abs(vec(out) - kronecker_oracle(x, nets, thetas)).max()))
        instances += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and instances >= 100 and elapsed < 10.0
    acceptance(3, ok, f"{instances} instances, max abs error {worst:.2e}, {elapsed:.2f}s")


def test_criterion_4_chebyshev_spectral(acceptance):
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in range(2, 9):
        for _ in range(10):
            lap = laplacian(random_adjacency(rng, n, density=0.8))
            oracle = spectral_oracle(lap)
            if oracle.lambda_max <= 1e-12:
                continue
            scaled = 2.0 * lap / oracle.lambda_max - np.eye(n)
            lam = oracle.scaled_eigvals()
            for p in range(5):
                coeffs = np.zeros(p + 1)
                coeffs[p] = 1.0
                expected = oracle.apply(lambda v: chebyshev.chebval(v, coeffs), lam)
                worst = max(worst, float(np.abs(chebyshev_matrix_poly(scaled, p) - expected).max()))
    acceptance(4, worst <= 1e-8, f"p<=4, sizes 2..8, max abs error {worst:.2e}")


def test_criterion_5_gradient_check(acceptance):
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    nets = [random_network(rng, 2), random_network(rng, 2)]
    params = init_params(TrainConfig(hidden=3, hidden_rnn=3, rho=1.0), nets, rng)
    params.factors = [u + 0.1 * rng.standard_normal(u.shape) for u in params.factors]
    x = rng.standard_normal((2, 3, 2, 2))
    y = rng.standard_normal((2, 2, 2))
    mask = np.array([[[True, True], [False, True]], [[True, True], [True, True]]])
    mu1 = mu2 = 1e-3
    _, grads = value_and_grad(params, nets, x, y, mask, mu1, mu2)
    flat = tree_flatten(params)

    def objective(name, value):
        p = tree_unflatten(params, {**flat, name: value})
        return float(loss(forward(x, nets, p), y, p, mu1, mu2, mask))

    worst, worst_name, h = 0.0, "", 1e-5
    for name, v in flat.items():
        num = np.zeros_like(v)
        for idx in np.ndindex(*v.shape):
            e = np.zeros_like(v)
            e[idx] = h
            num[idx] = (objective(name, v + e) - objective(name, v - e)) / (2 * h)
        denom = max(np.linalg.norm(num), np.linalg.norm(grads[name]), 1e-12)
        rel = float(np.linalg.norm(grads[name] - num) / denom)
        if rel > worst:
            worst, worst_name = rel, name
    trace = forward(x, nets, params)
    terms = loss_terms(trace, y, params, mask)
    all_terms = all(float(t) > 0 for t in terms.values())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and all_terms and elapsed < 30.0
    acceptance(5, ok, f"{len(flat)} blocks, worst relative error {worst:.2e} ({worst_name}), {elapsed:.1f}s")


def test_criterion_6_reduction_oracles(acceptance):
    rng = np.random.default_rng(5)
    # (a) one mode: tensor layer and flat layer agree bit for bit
    nets = [random_network(rng, 7)]
    t0, t1 = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    x = rng.standard_normal((2, 7, 3))
    a_tensor = tgcl_forward(x, nets, TgclParams({(0,): t0, (1,): t1}, "relu"))
    a_flat = flat_to_tensor(gcn_flat_forward(tensor_to_flat(x, 1), flat_graph(nets), FlatGcnParams(t0, t1, "relu")), (7,))
    ok_a = bool(np.array_equal(a_tensor, a_flat))

    # (b) full core with identity factors
    nets2 = [random_network(rng, 4), random_network(rng, 3)]
    params = init_params(TrainConfig(rho=1.0), nets2, rng)
    params.factors = [np.eye(4), np.eye(3)]
    h = rng.standard_normal((5, 4, 3, 8))
    ok_b = bool(np.array_equal(reduce(h, params.factors), h) and np.array_equal(reconstruct(h, params.factors), h))
    trace = forward(rng.standard_normal((2, 4, 4, 3)), nets2, params)
    terms = loss_terms(trace, np.zeros((2, 4, 3)), params)
    ok_b = ok_b and float(terms["tucker"]) == 0.0 and float(terms["orthonormality"]) == 0.0

    # (c) identity networks leave only the self term
    eye_nets = [ModeNetwork.identity(4), ModeNetwork.identity(3)]
    theta = rng.standard_normal((2, 5))
    xc = rng.standard_normal((4, 3, 2))
    out = tgcl_forward(xc, eye_nets, TgclParams({(): theta}, "identity"))
    ok_c = bool(np.array_equal(out, ad.mode_product(xc, theta, -1)))

    flags = {"a": ok_a, "b": ok_b, "c": ok_c}
    acceptance(6, all(flags.values()), " ".join(f"({k}) {'ok' if v else 'broken'}" for k, v in flags.items()))


def test_criterion_7_end_to_end(acceptance):
    start = time.perf_counter()
    ds = synthesize(SynthConfig(dims=(6, 4), core=(3, 2), T=400, noise=0.05), seed=0)
    config = TrainConfig(epochs=60, batch_size=32, seed=0)
    future = prepare_future(ds, 0.2)
    fut = evaluate_future(future, train_task(future, config).params, config.omega)
    recovery = prepare_recovery(ds, 0.2, seed=1)
    rec = evaluate_recovery(recovery, train_task(recovery, config).params, config.omega)
    elapsed = time.perf_counter() - start
    fut_gain = 1 - fut["rmse"] / fut["persistence_rmse"]
    rec_gain = 1 - rec["rmse"] / rec["mean_impute_rmse"]
    ok = fut_gain >= 0.2 and rec_gain >= 0.2 and elapsed < 300
    acceptance(
        7,
        ok,
        f"future {fut['rmse']:.3f} vs persistence {fut['persistence_rmse']:.3f} ({fut_gain:.0%} lower); "
        f"recovery {rec['rmse']:.3f} vs mean {rec['mean_impute_rmse']:.3f} ({rec_gain:.0%} lower); {elapsed:.0f}s",
    )


def test_criterion_8_determinism(acceptance, tmp_path, capsys):
    data = tmp_path / "ds"
    assert main(["synth", "--out", str(data), "--T", "150", "--seed", "1"]) == 0
    metrics, blobs = [], []
    for run in ("a", "b"):
        capsys.readouterr()
        assert main(["train", "--data", str(data), "--out", str(tmp_path / run), "--epochs", "3", "--seed", "9"]) == 0
        metrics.append(capsys.readouterr().out)
        blobs.append((tmp_path / run / "checkpoint.bin").read_bytes())
    ok = metrics[0] == metrics[1] and blobs[0] == blobs[1]
    acceptance(8, ok, f"checkpoints {len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}, metrics identical={metrics[0] == metrics[1]}")


def test_criterion_9_rho_below_bound_saves_parameters(acceptance):
    rng = np.random.default_rng(99)
    violations = []
    for _ in range(1000):
        dims = [int(n) for n in rng.integers(2, 65, size=rng.integers(1, 4))]
        d, dp = (int(v) for v in rng.integers(1, 17, size=2))
        bound = rho_upper_bound(dims, d, dp)
        rho = bound * (1.0 - rng.random())  # in (0, bound]
        tl, ml = count_params_tlstm(dims, rho, d, dp), count_params_mlstm(dims, d, dp)
        if not tl < ml:
            violations.append((dims, d, dp, round(rho, 4), round(bound, 4), tl, ml))
    detail = f"{1000 - len(violations)}/1000 cases hold"
    if violations:
        detail += f"; first counterexample dims={violations[0][0]} d={violations[0][1]} d'={violations[0][2]} " \
                  f"rho={violations[0][3]} (bound {violations[0][4]}): {violations[0][5]} >= {violations[0][6]}"
    acceptance(9, not violations, detail)
