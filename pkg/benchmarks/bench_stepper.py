"""Compare the compiled transient stepper against the pure-Python one.

Runs the same fixed-step transient (the bundled ideal-switch class-E
design, a nonlinear stiff circuit with a realistic mix of device types)
through both backends, checks they agree to solver tolerance, and
reports wall-clock timings.

Usage: python3 benchmarks/bench_stepper.py [n_periods]
"""

import sys
import time

import numpy as np

import importlib

from rfsim.engine import compiled

# the package re-exports the transient() function under the module's
# name, so fetch the module itself explicitly
tr = importlib.import_module("rfsim.engine.transient")
from rfsim.refbench import classe_netlist

F0 = 1e6
SAMPLES_PER_PERIOD = 256


def run(backend_impl, cc, n_periods):
    h = 1.0 / (F0 * SAMPLES_PER_PERIOD)
    n_steps = n_periods * SAMPLES_PER_PERIOD
    from rfsim.engine.dc import dc_operating_point
    state = tr.initial_state(cc, dc_operating_point(cc))
    out = np.empty((n_steps, cc.n))

    saved = tr._impl
    tr._impl = backend_impl
    try:
        t0 = time.perf_counter()
        tr.run_steps(tr.make_context(cc, h, backward_euler=True),
                     state, 1, out[:1])
        tr.run_steps(tr.make_context(cc, h), state, n_steps - 1, out[1:])
        elapsed = time.perf_counter() - t0
    finally:
        tr._impl = saved
    return out, elapsed


def main():
    n_periods = int(sys.argv[1]) if len(sys.argv) > 1 else 50
    cc = compiled.compile_circuit(classe_netlist("reference"))
    n_steps = n_periods * SAMPLES_PER_PERIOD

    try:
        from rfsim.engine import _stepper
    except ImportError:
        print("compiled backend not built; nothing to compare")
        return 1

    out_py, t_py = run(None, cc, n_periods)
    out_cy, t_cy = run(_stepper, cc, n_periods)

    diff = np.abs(out_py - out_cy).max()
    print(f"circuit unknowns : {cc.n}")
    print(f"steps            : {n_steps}")
    print(f"python backend   : {t_py:8.3f} s "
          f"({n_steps / t_py:10.0f} steps/s)")
    print(f"cython backend   : {t_cy:8.3f} s "
          f"({n_steps / t_cy:10.0f} steps/s)")
    print(f"speedup          : {t_py / t_cy:8.1f}x")
    print(f"max |difference| : {diff:.3e}")
    return 0 if diff < 1e-9 else 2


if __name__ == "__main__":
    sys.exit(main())
