"""Acceptance gate: one PASS/FAIL line per criterion in the terminal summary."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from steercomp.cli import main
from steercomp.compensator import CompensatorGains, CompensatorState, Mode, compensator_step
from steercomp.features import FeatureMatrix, center_and_covariance, contribution_rates, pca
from steercomp.metrics import cc, ce, improvement, tracking_metrics
from steercomp.plant import (
    ScenarioConfig, VehicleState, bicycle_step, run_open_loop, run_simulation, simulate_training_log,
)
from steercomp.predictor import TdnnConfig, assemble_dataset, evaluate, gradient_check, init_model, train_ensemble

from conftest import record_acceptance
from test_plant import kasa_circle_fit


@pytest.fixture(scope="module")
def trained():
    """Ensemble trained on the mixed corpus, timed once and shared."""
    config = ScenarioConfig(seed=0)
    t0 = time.perf_counter()
    log = simulate_training_log(config, "mixed", min_samples=6000)
    tcfg = TdnnConfig(taps=5, horizon_steps=4, learning_rate=0.001, epochs=500, seed=0)
    ds = assemble_dataset(log, config.features, tcfg)
    ensemble, reports = train_ensemble(ds, tcfg, members=10)
    elapsed = time.perf_counter() - t0
    return log, ds, ensemble, reports, elapsed


def test_1_delay_recovery(tmp_path, capsys):
    t0 = time.perf_counter()
    T = 0.05
    t = np.arange(2000) * T
    log = run_open_loop(ScenarioConfig(seed=0), 0.3 * np.sin(2 * math.pi * 0.5 * t))
    path = tmp_path / "sine.csv"
    from steercomp.telemetry import export_csv
    export_csv(log, path)
    capsys.readouterr()
    rc = main(["analyze", "delay", "--input", str(path), "--max-shift", "0.4", "--step", "0.05"])
    out = capsys.readouterr().out
    values = dict(line.split("=", 1) for line in out.splitlines() if "=" in line)
    elapsed = time.perf_counter() - t0
    shift, ratio = float(values["best_shift"]), float(values["ratio"])
    ok = rc == 0 and abs(shift - 0.20) <= T + 1e-9 and abs(ratio - 0.287) <= 0.05 and elapsed < 1.0
    with capsys.disabled():
        record_acceptance(1, "delay recovery", ok,
                          f"best_shift={shift:.3f} s ratio={ratio:.4f} ({elapsed:.2f} s)")
    assert ok


REFERENCE_SPECTRUM = [117.383, 116.385, 11.674, 0.033, 0.032, 0.03, 0.027, 0.021, 0.004, 0.004, 0.001]


def test_2_pca_fidelity(capsys):
    t0 = time.perf_counter()
    rates = 100 * contribution_rates(REFERENCE_SPECTRUM)
    ref_ok = all(abs(a - b) <= 0.05 for a, b in zip(rates[:3], (47.80, 47.39, 4.75)))

    rng = np.random.default_rng(0)
    m, n = 2000, 8
    basis, _ = np.linalg.qr(rng.normal(size=(n, n)))
    latent = rng.normal(size=(m, 3)) * np.array([10.0, 6.0, 3.0])
    data = latent @ basis[:, :3].T + 0.05 * rng.normal(size=(m, n))
    _, cov = center_and_covariance(FeatureMatrix(tuple(f"f{i}" for i in range(n)), data))
    res = pca(cov, top_k=3)
    top3 = float(res.contribution_rates[:3].sum())
    total = float(res.contribution_rates.sum())
    elapsed = time.perf_counter() - t0
    ok = ref_ok and top3 >= 0.99 and abs(total - 1.0) <= 1e-9 and elapsed < 1.0
    with capsys.disabled():
        record_acceptance(2, "PCA fidelity", ok,
                          f"rates {rates[0]:.2f}/{rates[1]:.2f}/{rates[2]:.2f}%, synthetic top-3 "
                          f"{100 * top3:.3f}%, sum-1={total - 1:.1e} ({elapsed:.2f} s)")
    assert ok


def test_3_gradient_correctness(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        model = init_model(TdnnConfig(seed=i))
        rng = np.random.default_rng(1000 + i)
        worst = max(worst, gradient_check(model, (rng.normal(size=15), float(rng.normal()))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 5.0
    with capsys.disabled():
        record_acceptance(3, "gradient correctness", ok,
                          f"max relative error {worst:.2e} over 100 pairs ({elapsed:.2f} s)")
    assert ok


@pytest.mark.slow
def test_4_predictor_quality(trained, capsys):
    log, ds, ensemble, reports, elapsed = trained
    hcc, hce = evaluate(ensemble, ds, "holdout")
    ok = len(log) >= 6000 and hcc >= 0.85 and hce >= 0.80 and elapsed < 90.0
    with capsys.disabled():
        record_acceptance(4, "predictor quality", ok,
                          f"holdout CC={hcc:.4f} CE={hce:.4f} on {len(log)} samples, "
                          f"10 members x 500 epochs ({elapsed:.1f} s)")
    assert ok


@pytest.mark.slow
def test_5_closed_loop_improvement(trained, capsys):
    ensemble = trained[2]
    t0 = time.perf_counter()
    base = ScenarioConfig(seed=0)
    off = tracking_metrics(run_simulation(base))
    on = tracking_metrics(run_simulation(replace(base, compensator_enabled=True), predictor=ensemble))
    elapsed = time.perf_counter() - t0
    d_max = improvement(off.max_tracking_error, on.max_tracking_error)
    d_osc = improvement(off.oscillation_index, on.oscillation_index)
    ok = d_max >= 0.30 and d_osc >= 0.15 and elapsed < 10.0
    with capsys.disabled():
        record_acceptance(5, "closed-loop improvement", ok,
                          f"max error {off.max_tracking_error:.4f}->{on.max_tracking_error:.4f} m "
                          f"({100 * d_max:.1f}%), oscillation {off.oscillation_index:.4f}->"
                          f"{on.oscillation_index:.4f} ({100 * d_osc:.1f}%) ({elapsed:.2f} s)")
    assert ok


def test_6_compensator_unit_suite(capsys):
    checks = {}
    g = CompensatorGains()
    T = g.sample_period

    yaw = np.linspace(-0.2, 0.2, 2001)
    state, modes_ok = CompensatorState(), True
    for w in yaw:
        _, state = compensator_step(state, 0.01, w, g)
        modes_ok &= (state.mode is Mode.PI) == (abs(w) <= math.radians(2.0))
    checks["schedule"] = modes_ok

    errs = 0.05 * np.sign(np.sin(np.arange(60) * 0.7)) + 0.01
    state, resets_ok, prev = CompensatorState(), True, None
    for e in errs:
        before = state.integrator
        _, state = compensator_step(state, e, 0.0, g)
        expected = (0.0 if prev is not None and e * prev < 0 else before) + T * e
        resets_ok &= state.integrator == pytest.approx(expected, abs=1e-15)
        prev = e
    checks["reset"] = resets_ok

    gp = CompensatorGains(kp=0.8, ki=0.0)
    state, prop_ok = CompensatorState(), True
    for e in (0.1, -0.2, 0.3, 0.05):
        u1, state = compensator_step(state, e, 0.0, gp)
        prop_ok &= u1 == pytest.approx(0.8 * e, abs=1e-15)
    checks["proportional"] = prop_ok

    gd = CompensatorGains(kp=0.0, kd=0.5, output_limit=100.0)
    seq = [0.0, 0.1, 0.05, -0.2]
    state, outs = CompensatorState(), []
    for e in seq:
        u1, state = compensator_step(state, e, 1.0, gd)
        outs.append(u1)
    hand = [0.0, 0.5 * 0.1 / T, 0.5 * -0.05 / T, 0.5 * -0.25 / T]
    checks["derivative"] = all(abs(a - b) <= 1e-12 for a, b in zip(outs, hand))

    state, zero_ok = CompensatorState(), True
    for w in np.linspace(-0.3, 0.3, 500):
        u1, state = compensator_step(state, 0.0, w, g)
        zero_ok &= u1 == 0.0
    checks["zero input"] = zero_ok

    ok = all(checks.values())
    with capsys.disabled():
        record_acceptance(6, "compensator unit suite", ok,
                          ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


def test_7_manifest_replay(tmp_path, capsys):
    import hashlib

    def digest(p):
        return hashlib.sha256(p.read_bytes()).hexdigest()

    sim = tmp_path / "sim.csv"
    gen = tmp_path / "gen.csv"
    model = tmp_path / "model.txt"
    assert main(["simulate", "--seed", "4", "--out", str(sim)]) == 0
    assert main(["generate", "--excitation", "dlc", "--seed", "2", "--out", str(gen)]) == 0
    assert main(["train", "--input", str(gen), "--restarts", "2", "--epochs", "5",
                 "--seed", "3", "--out", str(model)]) == 0
    results = []
    for src in (sim, gen, model):
        hashes = []
        for k in range(2):
            dst = tmp_path / f"replay{k}_{src.name}"
            assert main(["replay", str(src) + ".manifest", "--out", str(dst)]) == 0
            hashes.append(digest(dst))
        results.append(hashes[0] == hashes[1] == digest(src))
    capsys.readouterr()
    ok = all(results)
    with capsys.disabled():
        record_acceptance(7, "determinism", ok,
                          f"simulate/generate/train replays identical: {results}")
    assert ok


def test_8_oracle_equivalences(capsys):
    L, v, T, delta = 2.85, 8.33, 0.05, 0.15
    s, xs, ys = VehicleState(speed=v), [], []
    for _ in range(2000):
        s = bicycle_step(s, delta, v, T, L)
        xs.append(s.x)
        ys.append(s.y)
    _, _, radius = kasa_circle_fit(np.array(xs), np.array(ys))
    r_err = abs(radius / (L / math.tan(delta)) - 1.0)

    a, b, d = 5.0, 2.0, 1.0
    mid, rad = (a + d) / 2, math.hypot((a - d) / 2, b)
    res = pca(np.array([[a, b], [b, d]]), top_k=2)
    eig_err = float(np.max(np.abs(res.eigenvalues - [mid + rad, mid - rad])))

    # hand-computed: means 2 and 7/3; CC = 3 / sqrt(2 * 14/3); CE = 1 - 1/2
    cc_err = abs(cc([1, 2, 3], [1, 2, 4]) - 3 / math.sqrt(2 * 14 / 3))
    ce_err = abs(ce([1, 2, 3], [1, 2, 4]) - 0.5)
    ce2_err = abs(ce([0, 1, 2], [2, 1, 0]) + 3.0)
    ok = r_err <= 0.01 and eig_err <= 1e-12 and max(cc_err, ce_err, ce2_err) <= 1e-12
    with capsys.disabled():
        record_acceptance(8, "oracle equivalences", ok,
                          f"radius rel err {r_err:.2e}, 2x2 eig err {eig_err:.1e}, "
                          f"CC/CE err {max(cc_err, ce_err, ce2_err):.1e}")
    assert ok
