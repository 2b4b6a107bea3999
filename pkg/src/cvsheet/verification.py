"""Measurement helpers for convergence and linear-regime checks."""
from __future__ import annotations

import numpy as np

from .evolution import step
from .lifting import DEFAULT_CUTOFF


def integrate_to(state, t_end, nsteps, chi=DEFAULT_CUTOFF, callback=None, **kw):
    """Take ``nsteps`` equal RK4 steps to ``t_end``; ``callback(state, k)`` after each."""
    dt = (t_end - state.time) / nsteps
    for k in range(1, nsteps + 1):
        state = step(state, dt, chi, **kw)
        if callback is not None:
            callback(state, k)
    return state


def mode_coefficient(f, mode):
    """Fourier coefficient ``c_k`` of the front for the integer wave vector ``mode``."""
    k1, k2 = mode
    return complex(f.coeffs[k1 % f.grid.n1, k2 % f.grid.n2])


def fit_frequency(times, coeffs):
    """Least-squares slope of the unwrapped phase of ``coeffs``."""
    phase = np.unwrap(np.angle(np.asarray(coeffs)))
    return float(np.polyfit(np.asarray(times, float), phase, 1)[0])


def fit_growth(times, coeffs):
    """Least-squares slope of ``log |coeffs|``."""
    return float(np.polyfit(np.asarray(times, float), np.log(np.abs(np.asarray(coeffs))), 1)[0])


def state_vector(state):
    """All evolved unknowns of a state flattened into one array."""
    return np.concatenate([
        state.vp.data.ravel(), state.vm.data.ravel(),
        state.Bp.data.ravel(), state.Bm.data.ravel(),
        state.f.values.ravel(),
    ])


def richardson_orders(solutions):
    """Observed orders from solutions at step sizes ``h, h/2, h/4, ...``.

    ``log2(|u_h - u_{h/2}| / |u_{h/2} - u_{h/4}|)`` for each consecutive triple.
    """
    diffs = [float(np.abs(a - b).max()) for a, b in zip(solutions[:-1], solutions[1:])]
    return [float(np.log2(d0 / d1)) for d0, d1 in zip(diffs[:-1], diffs[1:])], diffs
