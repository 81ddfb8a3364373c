#!/usr/bin/env python3
"""Smoke test of the omcal_py extension module.

Builds nothing itself: it locates the cdylib produced by
`cargo build -p omcal-python` (debug or release), stages it under an
importable name, and exercises the main types and operations end to end.

Run from the repository root:

    cargo build -p omcal-python
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def stage_module() -> None:
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libomcal_py.so", "omcal_py.so", "libomcal_py.dylib", "omcal_py.pyd")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("omcal_py cdylib not found; run `cargo build -p omcal-python` first")
    stage = Path(tempfile.mkdtemp(prefix="omcal_py_"))
    suffix = ".pyd" if built.suffix == ".pyd" else ".so"
    shutil.copy2(built, stage / f"omcal_py{suffix}")
    sys.path.insert(0, str(stage))


def approx(a: float, b: float, rel: float = 1e-9) -> bool:
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def main() -> None:
    stage_module()
    import omcal_py as om

    two_pi = om.TWO_PI
    checks = 0

    def check(name: str, ok: bool) -> None:
        nonlocal checks
        checks += 1
        print(f"  [{'ok' if ok else 'FAIL'}] {name}")
        if not ok:
            sys.exit(1)

    print("omcal_py smoke test")

    cavity = om.OpticalCavity(two_pi * 195.55e12, two_pi * 1.5e9, two_pi * 1.0e9)
    chi = cavity.susceptibility(0.0, 0.0)
    check("susceptibility peaks at 2/kappa", approx(chi.real, 2.0 / cavity.kappa) and chi.imag == 0.0)

    env = om.Environment(295.0)
    n_th = env.thermal_occupation(two_pi * 7.65e9)
    check("thermal occupation near 803", approx(n_th, 803.50361374482326))

    mech = om.MechanicalMode.thermal(two_pi * 7.65e9, two_pi * 4.91e6, two_pi * 452e3, n_th)
    drive = om.Drive(two_pi * 195.55e12, 1e-6, two_pi * 7.63e9, 0.1)
    check(
        "cooperativity arithmetic",
        approx(
            mech.cooperativity(om.OpticalCavity(two_pi * 195.55e12, two_pi * 1.47e9, two_pi * 1.0e9)),
            6.7384252578807193e-5,
        ),
    )

    interf = om.Interferometer(0.28, 1.0, 0.0, 0.0, 140e-6, 3.05).with_combined_phase(
        0.77 * math.pi, drive.omega_l
    )
    check("combined phase round trip", approx(interf.combined_phase(drive.omega_l), 0.77 * math.pi, 1e-6))
    try:
        interf.path_phase(3, two_pi * 7.65e9)
        check("invalid path index rejected", False)
    except ValueError:
        check("invalid path index rejected", True)

    ss = om.steady_state(cavity, drive, mech, 0.0)
    check("carrier amplitude is real on resonance", abs(ss["a0"].imag) < 1e-12 * abs(ss["a0"].real))

    fano = om.fano_identification(cavity, drive, interf)
    check("fano constraint root", approx(math.cos(fano["psi_root"]), (1.0 - math.sqrt(5.0)) / 2.0, 1e-12))

    grid = [two_pi * (-4e9 + i * 2e7) for i in range(401)]
    sweep = om.g0_bias_sweep(cavity, drive, mech, interf, grid, mech.g0)
    values = [g for (_, g) in sweep["points"]]
    ptp = (max(values) - min(values)) / (sum(values) / len(values))
    check("g0 bias band 2-6%", 0.02 <= ptp <= 0.06)

    bare = om.Interferometer(0.0, 1.0, 0.0, 0.0, 140e-6, 3.05)
    trace = om.synthesize_psd(
        cavity, drive, mech, bare, env, two_pi * 1e9, 7.56e9, 1e5, 1601, 2e5, noise_floor=1e-4
    )
    estimate = om.estimate_g0(trace, mech.omega_m, drive.omega_c, mech.gamma_m, drive.phi0, n_th)
    check("estimator round trip within 0.5%", abs(estimate["g0"] / mech.g0 - 1.0) < 5e-3)

    truth = (0.9, 2.0 * 2.47e9, -0.05, 2.47e9, 0.0)
    deltas = [-8e9 + i * 2e7 for i in range(801)]

    def lineshape(d):
        h, a, q, kappa, d0 = truth
        u = d - d0
        return h - a * ((1 - q * q) * kappa / 2 - q * u) / (kappa * kappa / 4 + u * u)

    fit = om.fit_fano(deltas, [lineshape(d) for d in deltas])
    check(
        "fano fit recovers kappa",
        fit["converged"] and approx(fit["params"]["kappa"], truth[3], 1e-6),
    )

    print(f"all {checks} checks passed")


if __name__ == "__main__":
    main()
