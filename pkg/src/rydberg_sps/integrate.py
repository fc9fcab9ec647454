"""Adaptive Runge-Kutta integration of complex linear ODE systems.

Thin wrapper around scipy's embedded Dormand-Prince 8(5,3) scheme that adds
breakpoints (the right-hand side may jump there), sampling on a requested
time grid and a stiffness error on step-size collapse.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StiffnessError

METHOD = "DOP853"


def integrate(fun, y0, t_start, t_end, sample_times=None, breakpoints=(), tol=1e-8,
              atol=None, max_step=np.inf, method=METHOD):
    """Integrate ``dy/dt = fun(t, y)`` from ``t_start`` to ``t_end``.

    ``fun`` may depend on which side of a breakpoint it is evaluated; it is
    called as ``fun(t, y, segment)`` where ``segment`` is the index of the
    sub-interval being integrated.  Returns ``(times, states)`` at the
    requested sample times (always including ``t_end``) and the final state.
    """
    y = np.asarray(y0, dtype=complex).copy()
    if sample_times is None:
        sample_times = np.array([t_end])
    sample_times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(sample_times) < 0):
        raise ValueError("sample times must be sorted")
    cuts = sorted({float(b) for b in breakpoints if t_start < b < t_end})
    edges = [float(t_start)] + cuts + [float(t_end)]
    atol = tol if atol is None else atol

    out = np.empty((len(sample_times), len(y)), dtype=complex)
    filled = np.zeros(len(sample_times), dtype=bool)
    at_start = sample_times == t_start
    out[at_start] = y
    filled |= at_start

    for seg, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if b <= a:
            continue
        inside = (sample_times > a) & (sample_times <= b) & ~filled
        t_eval = sample_times[inside]
        if len(t_eval) == 0 or t_eval[-1] != b:
            t_eval = np.append(t_eval, b)
        sol = solve_ivp(lambda t, z: fun(t, z, seg), (a, b), y, method=method,
                        t_eval=t_eval, rtol=tol, atol=atol, max_step=max_step)
        if sol.status != 0:
            raise StiffnessError(f"integration failed on [{a:.6g}, {b:.6g}] ns at "
                                 f"t={sol.t[-1] if len(sol.t) else a:.6g}: {sol.message}")
        idx = np.flatnonzero(inside)
        out[idx] = sol.y[:, :len(idx)].T
        filled[idx] = True
        y = sol.y[:, -1]
    if not filled.all():
        raise ValueError("sample times outside the integration window")
    return sample_times, out, y
