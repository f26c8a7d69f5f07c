"""Compiled inner loops for the synthetic-field mode sum and particle RK4.

Arrays are structure-of-arrays: positions ``xs`` have shape ``(d, P)`` so the
innermost loop runs over particles and vectorises. Each particle is updated
independently, so results do not depend on how particles are partitioned.
"""
import numpy as np
from numba import njit

from ._trig import fast_cos

_OPTS = dict(error_model="numpy", fastmath={"contract"}, cache=True)


@njit(**_OPTS)
def velocity_soa(xs, t, amp, kv, om, ph, out):
    """out[:, p] = sum_n amp[n] * cos(om[n] t + kv[n] . xs[:, p] + ph[n])."""
    d = xs.shape[0]
    P = xs.shape[1]
    N = amp.shape[0]
    for j in range(d):
        for p in range(P):
            out[j, p] = 0.0
    if d == 1:
        x0 = xs[0]
        o0 = out[0]
        for n in range(N):
            base = om[n] * t + ph[n]
            k0 = kv[n, 0]
            a0 = amp[n, 0]
            for p in range(P):
                o0[p] += a0 * fast_cos(base + k0 * x0[p])
    elif d == 2:
        x0 = xs[0]
        x1 = xs[1]
        o0 = out[0]
        o1 = out[1]
        for n in range(N):
            base = om[n] * t + ph[n]
            k0 = kv[n, 0]
            k1 = kv[n, 1]
            a0 = amp[n, 0]
            a1 = amp[n, 1]
            for p in range(P):
                c = fast_cos(base + k0 * x0[p] + k1 * x1[p])
                o0[p] += a0 * c
                o1[p] += a1 * c
    else:
        x0 = xs[0]
        x1 = xs[1]
        x2 = xs[2]
        o0 = out[0]
        o1 = out[1]
        o2 = out[2]
        for n in range(N):
            base = om[n] * t + ph[n]
            k0 = kv[n, 0]
            k1 = kv[n, 1]
            k2 = kv[n, 2]
            a0 = amp[n, 0]
            a1 = amp[n, 1]
            a2 = amp[n, 2]
            for p in range(P):
                c = fast_cos(base + k0 * x0[p] + k1 * x1[p] + k2 * x2[p])
                o0[p] += a0 * c
                o1[p] += a1 * c
                o2[p] += a2 * c


@njit(**_OPTS)
def rk4_drag_advance(xs, cs, t0, dt, nsteps, tau_p, amp, kv, om, ph):
    """Advance dx = c dt, dc = (u_f(t, x) - c)/tau_p dt by ``nsteps`` RK4 steps in place."""
    d, P = xs.shape
    inv_tau = 1.0 / tau_p
    u = np.empty((d, P))
    xt = np.empty((d, P))
    kx = np.empty((d, P))
    kc = np.empty((d, P))
    ct = np.empty((d, P))
    half = 0.5 * dt
    sixth = dt / 6.0
    for s in range(nsteps):
        t = t0 + s * dt
        # stage 1
        velocity_soa(xs, t, amp, kv, om, ph, u)
        for j in range(d):
            for p in range(P):
                a = (u[j, p] - cs[j, p]) * inv_tau
                kx[j, p] = cs[j, p]
                kc[j, p] = a
                xt[j, p] = xs[j, p] + half * cs[j, p]
                ct[j, p] = cs[j, p] + half * a
        # stage 2
        velocity_soa(xt, t + half, amp, kv, om, ph, u)
        for j in range(d):
            for p in range(P):
                a = (u[j, p] - ct[j, p]) * inv_tau
                kx[j, p] += 2.0 * ct[j, p]
                kc[j, p] += 2.0 * a
                xt[j, p] = xs[j, p] + half * ct[j, p]
                ct[j, p] = cs[j, p] + half * a
        # stage 3
        velocity_soa(xt, t + half, amp, kv, om, ph, u)
        for j in range(d):
            for p in range(P):
                a = (u[j, p] - ct[j, p]) * inv_tau
                kx[j, p] += 2.0 * ct[j, p]
                kc[j, p] += 2.0 * a
                xt[j, p] = xs[j, p] + dt * ct[j, p]
                ct[j, p] = cs[j, p] + dt * a
        # stage 4
        velocity_soa(xt, t + dt, amp, kv, om, ph, u)
        for j in range(d):
            for p in range(P):
                a = (u[j, p] - ct[j, p]) * inv_tau
                xs[j, p] += sixth * (kx[j, p] + ct[j, p])
                cs[j, p] += sixth * (kc[j, p] + a)
