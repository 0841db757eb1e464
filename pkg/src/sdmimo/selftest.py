"""Fast invariant checks on small arrays (M <= 8), runnable without pytest."""

from __future__ import annotations

import time

import numpy as np
from scipy import integrate

from . import numerics
from .blocks import as_dense
from .channel import ScenarioGeometry, cov_x
from .coupling import CouplingParams, build_coupling, coupling_matrix, impedance_matrix
from .estimator import lmmse_estimate, scenario_estimator
from .rate import data_phase_model, draw_estimates, sum_se, zf_receiver
from .scenario import Scenario
from .sigma_delta import QuantizerSpec, SigmaDeltaFront, build_feedback


def _numerics():
    worst = 0.0
    for x in (0.3, 1.7, 2.5, 7.9, 8.1, 20.0):
        si = integrate.quad(lambda t: np.sinc(t / np.pi), 0, x, limit=200, epsabs=1e-13)[0]
        ci = numerics.EULER_GAMMA + np.log(x) + integrate.quad(
            lambda t: (np.cos(t) - 1) / t, 0, x, limit=200, epsabs=1e-13)[0]
        worst = max(worst, abs(numerics.sin_integral(x) - si), abs(numerics.cos_integral(x) - ci))
    lv = numerics.lloyd_max(2)
    err = np.max(np.abs(lv.levels - np.array([-1.5104, -0.4528, 0.4528, 1.5104])))
    return [("Si/Ci vs quadrature", worst, 1e-10), ("two-bit Lloyd-Max levels", err, 1e-4)]


def _coupling():
    Z = impedance_matrix(6, 0.2)
    T = coupling_matrix(Z, 50.0)
    res = np.max(np.abs(T @ (np.eye(6) + Z / 50.0) - np.eye(6)))
    off = build_coupling(6, 0.2, enabled=False)
    p = CouplingParams()
    expect = 2 * 1.380649e-23 * p.T_A * p.B * p.R * np.eye(6)
    rel = np.max(np.abs(off.C_N - expect)) / expect[0, 0]
    return [("T (I + Z/R) = I", res, 1e-12), ("Z symmetric", np.max(np.abs(Z - Z.T)), 0.0),
            ("decoupled C_N = 2kTBR I (relative)", rel, 1e-12)]


def _channel():
    sc = Scenario.build(ScenarioGeometry(M=4, K=2, N=2), snr_db=5)
    Phi = sc.pilots.dense(4)
    brute = Phi @ sc.stats.C_g().dense() @ Phi.conj().T + np.kron(np.eye(2), sc.C_N)
    scale = np.max(np.abs(brute))
    return [("C_x vs Kronecker construction (relative)", np.max(np.abs(as_dense(sc.cov_x()) - brute)) / scale, 1e-10)]


def _sigma_delta():
    worst = 0.0
    for M in (2, 8):
        for psi in (0.0, 0.3):
            fb = build_feedback(M, 1, psi)
            S = fb.V_d @ np.linalg.inv(fb.U_d)
            worst = max(worst, np.max(np.abs(S - np.exp(-1j * psi) * np.eye(M, k=-1))))
    fb = build_feedback(8, 2, 0.3)
    front = SigmaDeltaFront.design(np.ones(16), fb, QuantizerSpec(1))
    rng = np.random.default_rng(1)
    x = (rng.standard_normal((50, 16)) + 1j * rng.standard_normal((50, 16))) / np.sqrt(2)
    y, r = front.forward(x, return_input=True)
    U = np.kron(np.eye(2), fb.U_d)
    ident = np.max(np.abs((y - x) @ U.T - (y - r)))
    return [("V U^-1 = e^{-j psi} shift", worst, 1e-12), ("U (y - x) = y - r", ident, 1e-12)]


def _estimator():
    sc = Scenario.build(ScenarioGeometry(M=8, K=4, N=4), snr_db=10)
    rng = np.random.default_rng(2)
    g, x = sc.draw(rng, 20)
    worst = 0.0
    for tag in ("sigma-delta-1bit", "conv-2bit"):
        est = scenario_estimator(sc, tag)
        y = est.quantize(x)
        fast = est.estimate(y)
        worst = max(worst, np.max(np.abs(fast - est.dense_estimate(y))) / np.max(np.abs(fast)))
    est = scenario_estimator(sc, "unquantized")
    Phi = sc.pilots.dense(8)
    C_g = sc.stats.C_g().dense()
    C_x = Phi @ C_g @ Phi.conj().T + np.kron(np.eye(4), sc.C_N)
    direct = (C_g @ Phi.conj().T @ np.linalg.solve(C_x, x.T)).T
    classical = np.max(np.abs(est(x) - direct)) / np.max(np.abs(direct))
    return [("block-diagonal vs dense estimate (relative)", worst, 1e-10),
            ("unquantized vs classical LMMSE (relative)", classical, 1e-10)]


def _rate():
    sc = Scenario.build(ScenarioGeometry(M=8, K=3, N=3), snr_db=10)
    model = data_phase_model("sigma-delta-1bit", sc.stats, sc.C_N, sc.rho)
    est = scenario_estimator(sc, "sigma-delta-1bit")
    C_ghat, _ = est.covariance()
    G = draw_estimates(C_ghat.blocks, np.random.default_rng(3), 10)
    W = zf_receiver(G, model.C_tn)
    err = np.max(np.abs(np.swapaxes(W.conj(), -1, -2) @ G - np.eye(3)))
    return [("ZF W^H G_hat = I", err, 1e-10), ("SE pilot factor", abs(sum_se([1.0], 200, 10) - 0.95), 1e-15)]


SUITES = {
    "numerics": _numerics,
    "coupling": _coupling,
    "channel": _channel,
    "sigma_delta": _sigma_delta,
    "estimator": _estimator,
    "rate": _rate,
}


def selftest(out=print) -> bool:
    """Run every suite, print one line per check, return True when all pass."""
    ok = True
    t0 = time.perf_counter()
    for name, suite in SUITES.items():
        try:
            checks = suite()
        except Exception as exc:  # a crash counts as a failed suite
            out(f"FAIL  {name:12s} raised {type(exc).__name__}: {exc}")
            ok = False
            continue
        for label, value, tol in checks:
            passed = bool(value <= tol)
            ok &= passed
            out(f"{'PASS' if passed else 'FAIL'}  {name:12s} {label}: {value:.3e} (tol {tol:.0e})")
    out(f"{'all checks passed' if ok else 'FAILURES'} in {time.perf_counter() - t0:.1f} s")
    return ok
