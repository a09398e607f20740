"""numba kernels for the mechanization hot loops.

Batch-looped mirrors of the numpy reference implementations in
:mod:`tqnav.mech`; one batch item per Monte-Carlo run.  ``tests/test_mech``
asserts agreement with the reference path to float precision.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _qmul(a, b):
    return (
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    )


@njit(cache=True, inline="always")
def _qexp(v):
    """exp of the pure quaternion [0, v/2]: rotation by the vector v."""
    a = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    half = 0.5 * a
    if a < 1e-8:
        k = 0.5 - a * a / 48.0
    else:
        k = np.sin(half) / a
    return (np.cos(half), k * v[0], k * v[1], k * v[2])


@njit(cache=True, inline="always")
def _dexp(alpha, beta):
    """Directional derivative of exp at pure vector alpha, direction beta."""
    a = np.sqrt(alpha[0] ** 2 + alpha[1] ** 2 + alpha[2] ** 2)
    if a < 1e-12:
        sinc = 1.0 - a * a / 6.0
        ah = (0.0, 0.0, 0.0)
        dot = 0.0
    else:
        sinc = np.sin(a) / a
        ah = (alpha[0] / a, alpha[1] / a, alpha[2] / a)
        dot = ah[0] * beta[0] + ah[1] * beta[1] + ah[2] * beta[2]
    c = np.cos(a) - sinc
    return (
        -np.sin(a) * dot,
        sinc * beta[0] + c * dot * ah[0],
        sinc * beta[1] + c * dot * ah[1],
        sinc * beta[2] + c * dot * ah[2],
    )


@njit(cache=True, inline="always")
def _qrot(q, v):
    """C(q) @ v via the sandwich product."""
    tx = 2.0 * (q[2] * v[2] - q[3] * v[1])
    ty = 2.0 * (q[3] * v[0] - q[1] * v[2])
    tz = 2.0 * (q[1] * v[1] - q[2] * v[0])
    return (
        v[0] + q[0] * tx + q[2] * tz - q[3] * ty,
        v[1] + q[0] * ty + q[3] * tx - q[1] * tz,
        v[2] + q[0] * tz + q[1] * ty - q[2] * tx,
    )


@njit(cache=True, inline="always")
def _rot_integral(phi, u):
    """Average of rot(s*phi) @ u over s in [0, 1]."""
    a = np.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    if a < 1e-8:
        c1 = 0.5 - a * a / 24.0
        c2 = 1.0 / 6.0 - a * a / 120.0
    else:
        c1 = (1.0 - np.cos(a)) / (a * a)
        c2 = (a - np.sin(a)) / (a * a * a)
    cx = (phi[1] * u[2] - phi[2] * u[1], phi[2] * u[0] - phi[0] * u[2], phi[0] * u[1] - phi[1] * u[0])
    cxx = (
        phi[1] * cx[2] - phi[2] * cx[1],
        phi[2] * cx[0] - phi[0] * cx[2],
        phi[0] * cx[1] - phi[1] * cx[0],
    )
    return (u[0] + c1 * cx[0] + c2 * cxx[0], u[1] + c1 * cx[1] + c2 * cxx[1], u[2] + c1 * cx[2] + c2 * cxx[2])


@njit(cache=True, inline="always")
def _grav(r, gm, a_ell, j2):
    r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2]
    rn = np.sqrt(r2)
    zr2 = (r[2] / rn) ** 2
    k = 1.5 * j2 * (a_ell / rn) ** 2
    cxy = 1.0 + k * (1.0 - 5.0 * zr2)
    cz = 1.0 + k * (3.0 - 5.0 * zr2)
    s = -gm / (r2 * rn)
    return (s * cxy * r[0], s * cxy * r[1], s * cz * r[2])


@njit(cache=True)
def classic_kernel(q, v, r, phi, dvel, dt, om, gm, a_ell, j2):
    n = q.shape[0]
    qo = np.empty((n, 4))
    vo = np.empty((n, 3))
    ro = np.empty((n, 3))
    e_half = _qexp((-0.5 * dt * om[0], -0.5 * dt * om[1], -0.5 * dt * om[2]))
    for i in range(n):
        qi = (q[i, 0], q[i, 1], q[i, 2], q[i, 3])
        phii = (phi[i, 0], phi[i, 1], phi[i, 2])
        b_half = _qexp((0.5 * phii[0], 0.5 * phii[1], 0.5 * phii[2]))
        q_half = _qmul(e_half, _qmul(qi, b_half))
        q_new = _qmul(e_half, _qmul(q_half, b_half))
        f_avg = _rot_integral(phii, (dvel[i, 0] / dt, dvel[i, 1] / dt, dvel[i, 2] / dt))
        a = _qrot(_qmul(e_half, qi), f_avg)
        vi = (v[i, 0], v[i, 1], v[i, 2])
        ri = (r[i, 0], r[i, 1], r[i, 2])
        g0 = _grav(ri, gm, a_ell, j2)
        k1v = (
            a[0] + g0[0] - (om[1] * vi[2] - om[2] * vi[1]),
            a[1] + g0[1] - (om[2] * vi[0] - om[0] * vi[2]),
            a[2] + g0[2] - (om[0] * vi[1] - om[1] * vi[0]),
        )
        k1r = (
            vi[0] - (om[1] * ri[2] - om[2] * ri[1]),
            vi[1] - (om[2] * ri[0] - om[0] * ri[2]),
            vi[2] - (om[0] * ri[1] - om[1] * ri[0]),
        )
        vm = (vi[0] + 0.5 * dt * k1v[0], vi[1] + 0.5 * dt * k1v[1], vi[2] + 0.5 * dt * k1v[2])
        rm = (ri[0] + 0.5 * dt * k1r[0], ri[1] + 0.5 * dt * k1r[1], ri[2] + 0.5 * dt * k1r[2])
        gm_ = _grav(rm, gm, a_ell, j2)
        vo[i, 0] = vi[0] + dt * (a[0] + gm_[0] - (om[1] * vm[2] - om[2] * vm[1]))
        vo[i, 1] = vi[1] + dt * (a[1] + gm_[1] - (om[2] * vm[0] - om[0] * vm[2]))
        vo[i, 2] = vi[2] + dt * (a[2] + gm_[2] - (om[0] * vm[1] - om[1] * vm[0]))
        ro[i, 0] = ri[0] + dt * (vm[0] - (om[1] * rm[2] - om[2] * rm[1]))
        ro[i, 1] = ri[1] + dt * (vm[1] - (om[2] * rm[0] - om[0] * rm[2]))
        ro[i, 2] = ri[2] + dt * (vm[2] - (om[0] * rm[1] - om[1] * rm[0]))
        nq = np.sqrt(q_new[0] ** 2 + q_new[1] ** 2 + q_new[2] ** 2 + q_new[3] ** 2)
        qo[i, 0] = q_new[0] / nq
        qo[i, 1] = q_new[1] / nq
        qo[i, 2] = q_new[2] / nq
        qo[i, 3] = q_new[3] / nq
    return qo, vo, ro


@njit(cache=True)
def trident_kernel(q, v, r, phi, dvel, dt, om, gm, a_ell, j2):
    n = q.shape[0]
    qo = np.empty((n, 4))
    vo = np.empty((n, 3))
    ro = np.empty((n, 3))
    e_half = _qexp((-0.5 * dt * om[0], -0.5 * dt * om[1], -0.5 * dt * om[2]))
    att_e = (-dt * om[0], -dt * om[1], -dt * om[2])
    att_e_half = (-0.5 * dt * om[0], -0.5 * dt * om[1], -0.5 * dt * om[2])
    er = _qexp(att_e)
    for i in range(n):
        qi = (q[i, 0], q[i, 1], q[i, 2], q[i, 3])
        vi = (v[i, 0], v[i, 1], v[i, 2])
        ri = (r[i, 0], r[i, 1], r[i, 2])
        phii = (phi[i, 0], phi[i, 1], phi[i, 2])
        f_mid = (dvel[i, 0] / dt, dvel[i, 1] / dt, dvel[i, 2] / dt)

        q_half = _qmul(e_half, _qmul(qi, _qexp((0.5 * phii[0], 0.5 * phii[1], 0.5 * phii[2]))))
        g0 = _grav(ri, gm, a_ell, j2)
        cf = _qrot(q_half, f_mid)
        vm = (
            vi[0] + 0.5 * dt * (cf[0] + g0[0] - (om[1] * vi[2] - om[2] * vi[1])),
            vi[1] + 0.5 * dt * (cf[1] + g0[1] - (om[2] * vi[0] - om[0] * vi[2])),
            vi[2] + 0.5 * dt * (cf[2] + g0[2] - (om[0] * vi[1] - om[1] * vi[0])),
        )
        rm = (
            ri[0] + 0.5 * dt * (vi[0] - (om[1] * ri[2] - om[2] * ri[1])),
            ri[1] + 0.5 * dt * (vi[1] - (om[2] * ri[0] - om[0] * ri[2])),
            ri[2] + 0.5 * dt * (vi[2] - (om[0] * ri[1] - om[1] * ri[0])),
        )
        g_m = _grav(rm, gm, a_ell, j2)

        # body-side increment
        ar = _qexp(phii)
        half_phi = (0.5 * phii[0], 0.5 * phii[1], 0.5 * phii[2])
        a1 = _dexp(half_phi, (0.5 * dt * f_mid[0], 0.5 * dt * f_mid[1], 0.5 * dt * f_mid[2]))
        # earth-side increment
        e1 = _dexp(att_e_half, (0.5 * dt * g_m[0], 0.5 * dt * g_m[1], 0.5 * dt * g_m[2]))
        e2 = _dexp(att_e_half, (0.5 * dt * vm[0], 0.5 * dt * vm[1], 0.5 * dt * vm[2]))

        # pose slots: q, q' = (1/2) v o q, q'' = (1/2) r o q
        qp = _qmul((0.0, 0.5 * vi[0], 0.5 * vi[1], 0.5 * vi[2]), qi)
        qpp = _qmul((0.0, 0.5 * ri[0], 0.5 * ri[1], 0.5 * ri[2]), qi)

        # t1 = t o inc_body
        t1r = _qmul(qi, ar)
        qa1 = _qmul(qi, a1)
        qpar = _qmul(qp, ar)
        t1e1 = (qa1[0] + qpar[0], qa1[1] + qpar[1], qa1[2] + qpar[2], qa1[3] + qpar[3])
        t1e2 = _qmul(qpp, ar)

        # t2 = inc_earth o t1
        t2r = _qmul(er, t1r)
        x1 = _qmul(er, t1e1)
        y1 = _qmul(e1, t1r)
        t2e1 = (x1[0] + y1[0], x1[1] + y1[1], x1[2] + y1[2], x1[3] + y1[3])
        x2 = _qmul(er, t1e2)
        y2 = _qmul(e2, t1r)
        t2e2 = (x2[0] + y2[0], x2[1] + y2[1], x2[2] + y2[2], x2[3] + y2[3])

        nq = np.sqrt(t2r[0] ** 2 + t2r[1] ** 2 + t2r[2] ** 2 + t2r[3] ** 2)
        qn = (t2r[0] / nq, t2r[1] / nq, t2r[2] / nq, t2r[3] / nq)
        qc = (qn[0], -qn[1], -qn[2], -qn[3])
        pv = _qmul(t2e1, qc)
        pr = _qmul(t2e2, qc)
        qo[i, 0] = qn[0]
        qo[i, 1] = qn[1]
        qo[i, 2] = qn[2]
        qo[i, 3] = qn[3]
        vo[i, 0] = 2.0 * pv[1]
        vo[i, 1] = 2.0 * pv[2]
        vo[i, 2] = 2.0 * pv[3]
        ro[i, 0] = 2.0 * pr[1]
        ro[i, 1] = 2.0 * pr[2]
        ro[i, 2] = 2.0 * pr[3]
    return qo, vo, ro
