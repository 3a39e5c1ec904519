"""Acceptance suite: one test per shipping criterion, at stated tolerances.

Each test prints a single ``[criterion N] PASS`` line on success (visible
with ``pytest -s`` or in the captured output), so the suite doubles as a
checklist.
"""

import time

import numpy as np

from memwalk import (
    PairedOperator,
    RateTensor,
    TransitionTensor,
    build_laplacian,
    contract_power,
    integrate_mean_field,
    lift_transition,
    marginalize,
    mean_field_rhs,
    predict_limit,
    run_continuous_ensemble,
    run_discrete_ensemble,
    stationary_joint,
    step_joint,
    total_variation,
    zeig_fixed_point,
)
from memwalk import io as mio
from memwalk.cli import main

from conftest import (
    DATA_DIR,
    augmented_matrix_oracle,
    random_transition,
    reversible_rates,
    stationary_eig_oracle,
    supersymmetric_rates,
)

TRIANGLES = str(DATA_DIR / "two_triangles.json")
ALLONES_RATE = str(DATA_DIR / "allones_rate.coo")
ALLONES_X0 = str(DATA_DIR / "allones_x0.txt")


def report(number, text):
    print(f"[criterion {number}] PASS: {text}")


def run_cli(capsys, *argv):
    start = time.perf_counter()
    code = main(list(argv))
    elapsed = time.perf_counter() - start
    out = capsys.readouterr().out
    return code, out, elapsed


def parse_marginal_rows(text):
    rows = {}
    for line in text.splitlines():
        if line.startswith("#") or line.startswith("class,"):
            continue
        cells = line.split(",")
        rows[int(cells[0])] = np.array([float(v) for v in cells[2:]])
    return rows


def test_criterion_01_memory_walk_stationaries(capsys):
    code, out, elapsed = run_cli(
        capsys, "stationary", "--input", TRIANGLES, "--discrete", "--all"
    )
    assert code == 0
    rows = parse_marginal_rows(out)
    assert len(rows) == 2
    target1 = np.array([1 / 3, 1 / 3, 1 / 3, 0.0, 0.0])
    target2 = np.array([0.0, 0.0, 1 / 3, 1 / 3, 1 / 3])
    assert np.max(np.abs(rows[1] - target1)) <= 1e-8
    assert np.max(np.abs(rows[2] - target2)) <= 1e-8
    assert elapsed < 1.0
    report(1, f"two class marginals at 1e-8, {elapsed:.3f}s")


def test_criterion_02_projected_graph_stationary(capsys):
    code, out, elapsed = run_cli(capsys, "stationary", "--input", TRIANGLES, "--project")
    assert code == 0
    rows = parse_marginal_rows(out)
    target = np.array([1 / 6, 1 / 6, 1 / 3, 1 / 6, 1 / 6])
    assert np.max(np.abs(rows[1] - target)) <= 1e-10
    assert elapsed < 1.0
    report(2, f"projected stationary at 1e-10, {elapsed:.3f}s")


def test_criterion_03_exact_vs_mean_field_reproduction(capsys, tmp_path):
    base = tmp_path / "compare"
    code, _, elapsed = run_cli(
        capsys,
        "integrate", "--input", ALLONES_RATE, "--both", "--x0", ALLONES_X0,
        "--t-end", "5", "--dt", "1e-3", "--output", str(base),
    )
    assert code == 0
    exact = mio.read_trajectory_csv(tmp_path / "compare.exact.csv")
    mean = mio.read_trajectory_csv(tmp_path / "compare.meanfield.csv")
    assert np.max(np.abs(exact.final - 1 / 6)) <= 1e-6
    assert np.max(np.abs(mean.final - 1 / 6)) <= 1e-6
    sup_gap = float(np.max(np.abs(exact.states - mean.states)))
    assert sup_gap <= 0.02
    x0 = mio.load_vector(ALLONES_X0)
    closed_form = 1 / 6 + (x0[None, :] - 1 / 6) * np.exp(-6.0 * mean.times[:, None])
    assert np.max(np.abs(mean.states - closed_form)) <= 1e-6
    assert elapsed < 60.0
    report(3, f"uniform limit at 1e-6, sup gap {sup_gap:.2e}, {elapsed:.1f}s")


def test_criterion_04_unfolding_homomorphism():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 4))
        rows = tuple(int(d) for d in rng.integers(1, 4, size=N))
        mids = tuple(int(d) for d in rng.integers(1, 4, size=N))
        cols = tuple(int(d) for d in rng.integers(1, 4, size=N))
        A = PairedOperator(
            rows, mids, rng.random((np.prod(rows), np.prod(mids))) * (rng.random((np.prod(rows), np.prod(mids))) < 0.5)
        )
        B = PairedOperator(
            mids, cols, rng.random((np.prod(mids), np.prod(cols))) * (rng.random((np.prod(mids), np.prod(cols))) < 0.5)
        )
        lhs = (A @ B).unfolded.toarray()
        rhs = A.unfolded.toarray() @ B.unfolded.toarray()
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0)
    assert worst <= 1e-12
    report(4, f"100 operator pairs, worst deviation {worst:.2e}")


def test_criterion_05_oracle_equivalence():
    rng = np.random.default_rng(505)
    worst_marginal = 0.0
    for n, m in [(2, 3), (3, 3), (2, 4)]:
        for _ in range(20):
            P = random_transition(n, m, rng)
            T = TransitionTensor(P)
            lifted = lift_transition(T).unfolded.toarray()
            oracle = augmented_matrix_oracle(P)
            assert np.array_equal(lifted, oracle)
            summary = stationary_joint(T)
            pi_oracle = stationary_eig_oracle(oracle)
            marg_oracle = pi_oracle.reshape((n,) * (m - 1), order="F").sum(
                axis=tuple(range(1, m - 1))
            )
            gap = float(np.max(np.abs(marginalize(summary.stationary) - marg_oracle)))
            worst_marginal = max(worst_marginal, gap)
    assert worst_marginal <= 1e-10
    report(5, f"60 lifts exact, worst marginal gap {worst_marginal:.2e}")


def test_criterion_06_conservation_and_positivity():
    rng = np.random.default_rng(606)
    worst_min = 0.0
    worst_drift = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(2, 5))
        R = rng.random((n,) * m) * (rng.random((n,) * m) < 0.7)
        lap = build_laplacian(RateTensor(R))
        x0 = rng.random(n) * (rng.random(n) < 0.85)
        record = integrate_mean_field(lap, x0, t_end=20.0)
        worst_min = min(worst_min, float(record.states.min()))
        worst_drift = max(worst_drift, float(np.max(np.abs(record.mass - x0.sum()))))
    assert worst_min >= -1e-9
    assert worst_drift <= 1e-9
    report(6, f"50 trajectories, min entry {worst_min:.2e}, drift {worst_drift:.2e}")


def test_criterion_07_detailed_balance_convergence():
    rng = np.random.default_rng(707)
    cases = []
    for _ in range(10):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(2, 5))
        cases.append((supersymmetric_rates(n, m, rng), np.ones(n)))
    for _ in range(10):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(2, 5))
        cases.append(reversible_rates(n, m, rng))
    worst_residual = 0.0
    worst_limit = 0.0
    for R, xstar in cases:
        rates = RateTensor(R)
        lap = build_laplacian(rates)
        residual = float(np.max(np.abs(contract_power(lap.laplacian, xstar))))
        worst_residual = max(worst_residual, residual)
        x0 = rng.random(rates.n) + 0.05
        record = integrate_mean_field(lap, x0, t_end=60.0, xstar=xstar)
        total = 60.0
        while np.abs(mean_field_rhs(lap, record.final)).sum() > 1e-8 and total < 400.0:
            record = integrate_mean_field(lap, record.final, t_end=60.0, xstar=xstar)
            total += 60.0
        assert np.abs(mean_field_rhs(lap, record.final)).sum() <= 1e-8
        assert np.all(np.diff(record.lyapunov) <= 1e-9)
        limit = predict_limit(rates, xstar, x0)
        gap = float(np.max(np.abs(record.final - limit)))
        worst_limit = max(worst_limit, gap)
    assert worst_residual <= 1e-12
    assert worst_limit <= 1e-6
    report(
        7,
        f"20 balanced systems, equilibrium residual {worst_residual:.2e}, "
        f"limit gap {worst_limit:.2e}",
    )


def test_criterion_08_monte_carlo_validation(triangles_transition):
    target = np.array([1 / 3, 1 / 3, 1 / 3, 0.0, 0.0])
    discrete_pass = 0
    for seed in range(10):
        result = run_discrete_ensemble(
            triangles_transition, (1, 2), steps=100000, walkers=1, seed=seed
        )
        if total_variation(result.occupation, target) <= 0.02:
            discrete_pass += 1
    assert discrete_pass >= 9
    rates = RateTensor(np.ones((6,) * 5))
    continuous_pass = 0
    worst_tv = 0.0
    for seed in range(10):
        result = run_continuous_ensemble(rates, None, t_end=5.0, walkers=200, seed=seed)
        tv = total_variation(result.occupation, np.full(6, 1 / 6))
        worst_tv = max(worst_tv, tv)
        if tv <= 0.03:
            continuous_pass += 1
    assert continuous_pass >= 9
    report(
        8,
        f"discrete {discrete_pass}/10 within 0.02, "
        f"continuous {continuous_pass}/10 within 0.03 (worst {worst_tv:.3f})",
    )


def test_criterion_09_closure_fixed_point():
    rng = np.random.default_rng(909)
    worst = 0.0
    for _ in range(20):
        P = random_transition(3, 3, rng)
        T = TransitionTensor(P)
        z = zeig_fixed_point(T, tol=1e-10, max_iter=10000)
        residual = float(np.abs(contract_power(P, z) - z).sum())
        worst = max(worst, residual)
    assert worst <= 1e-10
    report(9, f"20 chains converged, worst residual {worst:.2e}")


def test_criterion_10_convergence_rate():
    rng = np.random.default_rng(1010)
    chains = []
    attempts = 0
    while len(chains) < 10 and attempts < 500:
        attempts += 1
        P = random_transition(3, 3, rng, alpha=0.06, floor=0.02)
        mods = np.sort(np.abs(np.linalg.eigvals(augmented_matrix_oracle(P))))[::-1]
        if 0.78 <= mods[1] <= 0.99 and mods[2] <= 0.9 * mods[1]:
            chains.append(P)
    assert len(chains) == 10
    worst_rel = 0.0
    for P in chains:
        T = TransitionTensor(P)
        summary = stationary_joint(T)
        lam2 = summary.lambda2_modulus
        star = summary.stationary.array
        arr = rng.dirichlet(np.ones(9)).reshape((3, 3))
        ts, logs = [], []
        for t in range(1, 101):
            arr = step_joint(T, arr)
            if t >= 10:
                gap = float(np.abs(arr - star).sum())
                ts.append(t)
                logs.append(np.log(gap))
        slope = np.polyfit(ts, logs, 1)[0]
        rel = abs(slope - np.log(lam2)) / abs(np.log(lam2))
        worst_rel = max(worst_rel, rel)
    assert worst_rel <= 0.10
    report(10, f"10 chains, worst slope error {worst_rel:.1%} of log lambda2")
