"""End-to-end acceptance gate.

One test per numbered criterion; each prints a single PASS/FAIL line
(visible with ``pytest -s`` or on failure) in addition to the usual
pytest verdict.  Criterion 9 is an informational magnitude check: a miss
is reported, not failed.
"""

import dataclasses
import time

import numpy as np
import pytest

from cfmimo import harness
from cfmimo.beamforming import bcd_sd
from cfmimo.config import (Beamforming, CircuitModel, CsiModel, Mode,
                           Objective, SystemConfig)
from cfmimo.optimizer import (BlockRateModel, gee_max_downlink,
                              zero_interference_tensor)
from cfmimo.oracles import gee_grid_search
from cfmimo.rates import downlink_rate, downlink_rates, signal_matrices
from cfmimo.training import (PilotBook, generate_pilots, lmmse_estimate,
                             training_signal)

from conftest import small_config

REFERENCE = "configs/reference.yaml"


def _report(n, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    print(f"[criterion {n}] {verdict} — {detail}")
    assert ok, f"criterion {n}: {detail}"


@pytest.fixture(scope="module")
def pipeline_tensors():
    cfg = small_config(n_aps=3, n_ms=3, n_ap_ant=8, n_ms_ant=2, p_max_w=0.1)
    return cfg, [harness.prepare_drop(cfg, seed).tensor_true
                 for seed in range(5)]


def test_criterion_1_small_instance_optimality():
    cfg = small_config(p_streams=1, n_ms_ant=2)
    start = time.time()
    worst = 0.0
    for seed in range(20):
        tensor = harness.prepare_drop(
            dataclasses.replace(cfg, seed=seed), 0).tensor_true
        _, trace = gee_max_downlink(tensor, cfg.optimizer, cfg.p_max_w,
                                    cfg.delta, cfg.circuit_model, cfg.p_c_w)
        ref, _ = gee_grid_search(tensor, cfg.p_max_w, cfg.delta,
                                 cfg.circuit_model, cfg.p_c_w, points=20)
        if ref > 0:
            worst = max(worst, (ref - trace[-1]) / ref)
    elapsed = time.time() - start
    _report(1, worst < 0.02 and elapsed < 60.0,
            f"worst gap vs 20-pt grid {worst:.3%} over 20 drops "
            f"in {elapsed:.1f}s")


def test_criterion_2_monotone_gee_traces():
    cfg = SystemConfig.from_yaml(REFERENCE)
    cfg = dataclasses.replace(cfg, n_aps=20, n_ms=4, drops=50)
    worst = 0.0
    for i in range(cfg.drops):
        d = harness.run_drop(cfg, i)
        assert d.ok, d.error
        t = d.trace
        drops_in_trace = -np.diff(t) / np.maximum(np.abs(t[:-1]), 1.0)
        worst = max(worst, float(drops_in_trace.max()))
    _report(2, worst <= 1e-9,
            f"max relative trace decrease {worst:.2e} over 50 drops (M=20, K=4)")


def test_criterion_3_p1_p2_p3(pipeline_tensors):
    cfg, tensors = pipeline_tensors
    rng = np.random.default_rng(42)
    p_max = cfg.p_max_w
    worst_p1 = worst_p2 = worst_p3 = 0.0
    for _ in range(100):
        tensor = tensors[int(rng.integers(len(tensors)))]
        # interior expansion points: the sqrt terms are non-smooth at 0
        eta = rng.uniform(0.01, 1.0 / tensor.n_users,
                          (tensor.n_aps, tensor.n_users)) * p_max
        m = int(rng.integers(tensor.n_aps))
        model = BlockRateModel(tensor, eta, m, 1e-13)
        n = model.block_users.size
        x0 = eta[m, model.block_users]
        lbm = model.lower_bound_model(x0)
        r0 = model.rates(x0)
        worst_p2 = max(worst_p2, float(np.max(
            np.abs(lbm.values(x0) - r0) / np.maximum(np.abs(r0), 1.0))))
        # gradients compared in per-Hz units so the absolute tolerance
        # is meaningful at O(1) scale
        bw = tensor.bandwidth_hz
        grads = lbm.grads(x0) / bw
        for k in range(tensor.n_users):
            fd = np.zeros(n)
            h = 1e-6 * p_max
            for j in range(n):
                e = np.zeros(n)
                e[j] = h
                fd[j] = (model.rates(x0 + e)[k]
                         - model.rates(x0 - e)[k]) / (2 * h * bw)
            err = np.abs(grads[k] - fd)
            tol = np.maximum(1e-4, 1e-3 * np.abs(fd))
            worst_p3 = max(worst_p3, float(np.max(err / tol)))
        for _ in range(100):
            x = rng.uniform(0, p_max / n, n)
            r = model.rates(x)
            gap = (lbm.values(x) - r) / np.maximum(np.abs(r), 1.0)
            worst_p1 = max(worst_p1, float(gap.max()))
    ok = worst_p1 <= 1e-9 and worst_p2 <= 1e-9 and worst_p3 <= 1.0
    _report(3, ok, f"P1 worst rel excess {worst_p1:.2e}, "
                   f"P2 worst rel gap {worst_p2:.2e}, "
                   f"P3 worst grad err/tol {worst_p3:.2f}")


def test_criterion_4_concavity(pipeline_tensors):
    cfg, tensors = pipeline_tensors
    rng = np.random.default_rng(43)
    p_max = cfg.p_max_w
    worst = 0.0
    for _ in range(1000):
        tensor = tensors[int(rng.integers(len(tensors)))]
        eta = rng.uniform(0, p_max / 3, (3, 3))
        m = int(rng.integers(3))
        model = BlockRateModel(tensor, eta, m, 1e-13)
        n = model.block_users.size
        a = rng.uniform(0, p_max / n, n)
        b = rng.uniform(0, p_max / n, n)
        for g in (model.g1_vals, model.g2_vals):
            gap = ((g(a) + g(b)) / 2 - g((a + b) / 2)) \
                / np.maximum(np.abs(g((a + b) / 2)), 1.0)
            worst = max(worst, float(gap.max()))
    # interference-free sum-rate segments
    for _ in range(1000):
        tensor = zero_interference_tensor(
            tensors[int(rng.integers(len(tensors)))])
        a = rng.uniform(0, p_max / 3, (3, 3))
        b = rng.uniform(0, p_max / 3, (3, 3))
        mid = downlink_rates(tensor, (a + b) / 2).sum()
        end = (downlink_rates(tensor, a).sum()
               + downlink_rates(tensor, b).sum()) / 2
        worst = max(worst, (end - mid) / max(abs(mid), 1.0))
    _report(4, worst <= 1e-9,
            f"worst relative midpoint-concavity violation {worst:.2e} "
            f"over 1000 segments each for g1/g2 and the ZF sum-rate")


def test_criterion_5_rate_forms_and_leakage(pipeline_tensors):
    from conftest import random_tensor
    rng = np.random.default_rng(44)
    worst_form = 0.0
    for _ in range(100):
        tensor = random_tensor(rng, n_aps=int(rng.integers(1, 4)),
                               n_users=int(rng.integers(1, 4)),
                               p=int(rng.integers(1, 3)),
                               noise_var=10 ** rng.uniform(-4, 0))
        eta = rng.uniform(0, 1, (tensor.n_aps, tensor.n_users))
        for k in range(tensor.n_users):
            a = downlink_rate(tensor, eta, k, form="direct")
            b = downlink_rate(tensor, eta, k, form="g1g2")
            worst_form = max(worst_form, abs(a - b) / max(abs(a), 1e-12))
    cfg, tensors = pipeline_tensors
    worst_leak = 0.0
    for tensor in tensors:
        eta = np.full((3, 3), cfg.p_max_w / 3)
        for k in range(3):
            mats = signal_matrices(tensor, eta, k)
            own = np.linalg.norm(mats[k])
            for l in range(3):
                if l != k:
                    worst_leak = max(worst_leak,
                                     np.linalg.norm(mats[l]) / own)
    ok = worst_form <= 1e-9 and worst_leak < 1e-6
    _report(5, ok, f"rate-form worst rel diff {worst_form:.2e}; "
                   f"ZF leakage worst ratio {worst_leak:.2e}")


def test_criterion_6_bcd_sd_and_hybrid():
    worst_inc = 0.0
    for trial in range(100):
        rng = np.random.default_rng(trial)
        q = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
        _, _, res = bcd_sd(q, 3, rng)
        worst_inc = max(worst_inc, float(np.diff(res).max() / res[0]))
    rng = np.random.default_rng(45)
    q = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    _, _, res = bcd_sd(q, 6, rng)
    recon = res[-1] / np.linalg.norm(q)

    cfg_fd = small_config(n_aps=3, n_ms=2, n_ap_ant=4)
    cfg_hy = dataclasses.replace(cfg_fd, beamforming=Beamforming.HY, n_rf=4)
    worst_rate = 0.0
    for i in range(5):
        fd = harness.run_drop(cfg_fd, i)
        hy = harness.run_drop(cfg_hy, i)
        assert fd.ok and hy.ok
        worst_rate = max(worst_rate, float(np.max(
            np.abs(hy.dl_rates - fd.dl_rates)
            / np.maximum(fd.dl_rates, 1.0))))
    ok = worst_inc <= 1e-12 and recon < 1e-6 and worst_rate < 1e-4
    _report(6, ok, f"residual max increase {worst_inc:.2e}; "
                   f"N_RF=N_AP reconstruction {recon:.2e}; "
                   f"HY vs FD rate worst rel diff {worst_rate:.2e}")


def test_criterion_7_lmmse():
    rng = np.random.default_rng(46)

    def draw(k, n_ap, p):
        return (rng.standard_normal((k, n_ap, p))
                + 1j * rng.standard_normal((k, n_ap, p))) / np.sqrt(2)

    book = generate_pilots(4, 2, 8, rng, orthogonal=True)
    s = draw(4, 6, 2)
    y = training_signal(s, book, 0.0, rng)
    recovery = float(np.abs(lmmse_estimate(y, book, 0.0) - s).max())

    book = generate_pilots(3, 1, 8, rng, power_w=0.1)
    sigma2 = 0.2
    mse_lmmse = mse_ls = 0.0
    phi = np.concatenate([np.sqrt(book.powers[k]) * book.pilots[k]
                          for k in range(3)], axis=0)
    pinv = np.linalg.pinv(phi)
    for _ in range(10_000):
        s = draw(3, 2, 1)
        y = training_signal(s, book, sigma2, rng)
        mse_lmmse += np.linalg.norm(lmmse_estimate(y, book, sigma2) - s) ** 2
        ls = np.transpose((y @ pinv).reshape(2, 3, 1), (1, 0, 2))
        mse_ls += np.linalg.norm(ls - s) ** 2

    ortho = generate_pilots(2, 1, 8, rng, orthogonal=True)
    shared = PilotBook(pilots=np.repeat(ortho.pilots[:1], 2, axis=0),
                       powers=ortho.powers.copy())
    sigma2 = 0.05
    mse_shared = mse_ortho = 0.0
    for _ in range(5000):
        s = draw(2, 2, 1)
        w = (rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))) \
            * np.sqrt(sigma2 / 2)
        for which, acc in ((shared, "s"), (ortho, "o")):
            y = sum(np.sqrt(which.powers[k]) * s[k] @ which.pilots[k]
                    for k in range(2)) + w
            err = np.linalg.norm(
                lmmse_estimate(y, which, sigma2)[0] - s[0]) ** 2
            if acc == "s":
                mse_shared += err
            else:
                mse_ortho += err
    ok = recovery < 1e-8 and mse_lmmse <= mse_ls and mse_shared > mse_ortho
    _report(7, ok, f"noiseless recovery err {recovery:.2e}; "
                   f"LMMSE/LS MSE ratio {mse_lmmse / mse_ls:.4f}; "
                   f"contamination MSE ratio {mse_shared / mse_ortho:.3f}")


def test_criterion_8_scaled_paper_behavior():
    """100-drop UC (M=80, K=6, N=1) reproduction of the qualitative
    optimized-vs-uniform behavior, with warm-started power sweeps."""
    cfg = SystemConfig.from_yaml(REFERENCE)
    assert (cfg.n_aps, cfg.n_ms, cfg.uc_n) == (80, 6, 1)
    assert cfg.mode is Mode.UC and cfg.csi is CsiModel.PERFECT \
        and cfg.beamforming is Beamforming.FD
    budgets = [0.02, 0.05, 0.1, 0.2, 0.5]
    drops = 100
    start = time.time()

    sr_opt, sr_uni = [], []
    gee_opt = np.zeros((drops, len(budgets)))
    gee_uni = np.zeros((drops, len(budgets)))
    sr_curve = np.zeros((drops, len(budgets)))
    for i in range(drops):
        ctx = harness.prepare_drop(cfg, i)
        d_sr = harness.allocate_and_measure(
            dataclasses.replace(cfg, objective=Objective.SUMRATE), ctx, i)
        d_un = harness.allocate_and_measure(
            dataclasses.replace(cfg, objective=Objective.UNIFORM), ctx, i)
        sr_opt.append(d_sr.dl_rates.mean())
        sr_uni.append(d_un.dl_rates.mean())
        prev_g = prev_s = None
        for p, budget in enumerate(budgets):
            cfg_p = dataclasses.replace(cfg, p_max_w=budget)
            eta0 = None if prev_g is None \
                else harness._clamp_feasible(prev_g, budget)
            d_g = harness.allocate_and_measure(
                dataclasses.replace(cfg_p, objective=Objective.GEE),
                ctx, i, eta0=eta0)
            prev_g = d_g.eta
            d_u = harness.allocate_and_measure(
                dataclasses.replace(cfg_p, objective=Objective.UNIFORM),
                ctx, i)
            eta0s = None if prev_s is None \
                else harness._clamp_feasible(prev_s, budget)
            d_s = harness.allocate_and_measure(
                dataclasses.replace(cfg_p, objective=Objective.SUMRATE),
                ctx, i, eta0=eta0s)
            prev_s = d_s.eta
            gee_opt[i, p] = d_g.gee_dl
            gee_uni[i, p] = d_u.gee_dl
            sr_curve[i, p] = d_s.dl_rates.sum()
    elapsed = time.time() - start

    # (a) N=1 coincidence of optimized and uniform sum-rate allocation
    rel_a = abs(np.mean(sr_opt) - np.mean(sr_uni)) / np.mean(sr_uni)
    ok_a = rel_a <= 1e-3
    # (b) optimized GEE strictly above uniform at every swept budget
    mean_opt = gee_opt.mean(axis=0)
    mean_uni = gee_uni.mean(axis=0)
    ok_b = bool(np.all(mean_opt > mean_uni))
    # (c) GEE saturates (never decreases past its peak) and the ZF
    # sum-rate curve is non-decreasing in the budget
    tol = 1e-6
    ok_c = bool(np.all(np.diff(mean_opt) >= -tol * mean_opt[:-1])
                and np.all(np.diff(sr_curve.mean(axis=0))
                           >= -tol * sr_curve.mean(axis=0)[:-1]))
    ok_time = elapsed < 30 * 60
    detail = (f"(a) sum-rate opt/uniform rel diff {rel_a:.2e}; "
              f"(b) GEE opt>uniform at all budgets {ok_b} "
              f"(margins {np.array2string(mean_opt / mean_uni, precision=2)}); "
              f"(c) saturation+monotone sum-rate {ok_c}; "
              f"runtime {elapsed / 60:.1f} min")
    _report(8, ok_a and ok_b and ok_c and ok_time, detail)


def test_criterion_9_magnitude_informational():
    cfg = SystemConfig.from_yaml(REFERENCE)
    cfg = dataclasses.replace(cfg, beamforming=Beamforming.HY,
                              csi=CsiModel.ESTIMATED, p_max_w=0.1, drops=10)
    rates = []
    for i in range(cfg.drops):
        d = harness.run_drop(cfg, i)
        assert d.ok, d.error
        rates.append(d.dl_rates.mean())
    mean = float(np.mean(rates))
    target = 1.5e9
    within = target / 3 <= mean <= target * 3
    verdict = "PASS" if within else "INFO (missed; see model-gap note)"
    print(f"[criterion 9] {verdict} — mean DL rate/user {mean / 1e9:.2f} "
          f"Gbit/s vs {target / 1e9:.1f} Gbit/s reference "
          f"(factor {mean / target:.2f})")
    # informational gate: a miss is documented, never failed
