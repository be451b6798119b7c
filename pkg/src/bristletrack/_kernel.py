"""Compiled fixed-step integration loop.

Mirrors the readable right-hand sides in ``plant``/``observer`` and the
structured control law in ``controller`` (collapsed to static gains);
tests pin the two paths against each other.  All inputs are plain
float64 arrays so the kernel caches and runs without the GIL.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# mode codes
OPEN_LOOP = 0
STATE_FEEDBACK = 1
OUTPUT_FEEDBACK = 2
SCRIPTED = 3


@njit(cache=True, nogil=True)
def run_loop(nst, dt, n, dxi, scheme, mode, with_obs, obs_applied,
             a1, a2, g1, g2, hd, lam, bv,
             w1, w2, w3, k4, sig, muc, theta, eps,
             qd, wq,
             ustar, xstar, zstar, kx, kzn, mprof, pvw, gam1,
             l1m, pgram, kappa,
             d_steps, n1, n2, k1s, k2s,
             x0, z0, xh0, zh0,
             log_every, z_every, abort_norm, u_script):
    x = x0.copy()
    z = z0.copy()
    xh = xh0.copy()
    zh = zh0.copy()

    u_cmd = np.zeros((nst, 2))
    u_app = np.zeros((nst, 2))
    f_log = np.zeros((nst, 2))
    v_log = np.zeros((nst, 2))
    nrm = np.zeros(nst)
    nrmx = np.zeros(nst)
    nrmh = np.zeros(nst)
    stor = np.zeros(nst)
    v1_log = np.zeros(nst)
    v2_log = np.zeros(nst)
    v_lyap = np.zeros(nst)
    v0_log = np.zeros(nst)

    ndec = nst // log_every + 1
    x_dec = np.zeros((ndec, 2))
    xh_dec = np.zeros((ndec, 2))
    y_dec = np.zeros((ndec, 2))
    idx_dec = np.zeros(ndec, dtype=np.int64)

    nz = nst // z_every + 1
    z_snap = np.zeros((nz, 2, n))
    zh_snap = np.zeros((nz, 2, n))
    idx_z = np.zeros(nz, dtype=np.int64)

    kxs = np.zeros((4, 2))
    kzs = np.zeros((4, 2, n))
    kxh = np.zeros((4, 2))
    kzh = np.zeros((4, 2, n))
    xa = np.zeros(2)
    za = np.zeros((2, n))
    xha = np.zeros(2)
    zha = np.zeros((2, n))

    status = 0
    idec = 0
    iz = 0
    n_done = nst
    nstage = 4 if scheme == 1 else 1
    yn0 = 0.0
    yn1 = 0.0

    for kk in range(nst):
        # commanded steering from the structured law collapsed to static gains
        u0 = 0.0
        u1 = 0.0
        if mode == SCRIPTED:
            u0 = u_script[kk, 0]
            u1 = u_script[kk, 1]
        elif mode >= 1:
            if mode == STATE_FEEDBACK:
                xc0 = x[0]; xc1 = x[1]
            else:
                xc0 = xh[0]; xc1 = xh[1]
            u0 = ustar[0] + kx[0, 0] * (xc0 - xstar[0]) + kx[0, 1] * (xc1 - xstar[1])
            u1 = ustar[1] + kx[1, 0] * (xc0 - xstar[0]) + kx[1, 1] * (xc1 - xstar[1])
            for k in range(n):
                if mode == STATE_FEEDBACK:
                    zd0 = z[0, k] - zstar[0, k]
                    zd1 = z[1, k] - zstar[1, k]
                else:
                    zd0 = zh[0, k] - zstar[0, k]
                    zd1 = zh[1, k] - zstar[1, k]
                u0 += kzn[k, 0, 0] * zd0 + kzn[k, 0, 1] * zd1
                u1 += kzn[k, 1, 0] * zd0 + kzn[k, 1, 1] * zd1
        u_cmd[kk, 0] = u0
        u_cmd[kk, 1] = u1

        # actuator delay line over the commanded history
        if kk >= d_steps:
            ua0 = u_cmd[kk - d_steps, 0]
            ua1 = u_cmd[kk - d_steps, 1]
        else:
            ua0 = 0.0
            ua1 = 0.0
        u_app[kk, 0] = ua0
        u_app[kk, 1] = ua1

        # zero-order-hold measurement noise
        yn0 = n1[kk // k1s]
        yn1 = n2[kk // k2s]

        # observer input per wiring choice
        if obs_applied == 1:
            uo0 = ua0; uo1 = ua1
        else:
            uo0 = u0; uo1 = u1

        for st in range(nstage):
            if st == 0:
                for j in range(2):
                    xa[j] = x[j]
                    xha[j] = xh[j]
                for i in range(2):
                    for k in range(n):
                        za[i, k] = z[i, k]
                        zha[i, k] = zh[i, k]
            else:
                c = 0.5 * dt if st < 3 else dt
                sp = st - 1
                for j in range(2):
                    xa[j] = x[j] + c * kxs[sp, j]
                    xha[j] = xh[j] + c * kxh[sp, j]
                for i in range(2):
                    for k in range(n):
                        za[i, k] = z[i, k] + c * kzs[sp, i, k]
                        zha[i, k] = zh[i, k] + c * kzh[sp, i, k]

            # ---- plant RHS at the stage state ----
            v0 = a2[0, 0] * xa[0] + a2[0, 1] * xa[1] + g2[0, 0] * ua0 + g2[0, 1] * ua1
            v1 = a2[1, 0] * xa[0] + a2[1, 1] * xa[1] + g2[1, 0] * ua0 + g2[1, 1] * ua1
            f0 = 0.0; f1 = 0.0
            c20 = 0.0; c21 = 0.0
            c30 = 0.0; c31 = 0.0
            for k in range(n):
                f0 += w1[0, k] * za[0, k]
                f1 += w1[1, k] * za[1, k]
                c20 += w2[0, k] * za[0, k]
                c21 += w2[1, k] * za[1, k]
                c30 += w3[0, k] * za[0, k]
                c31 += w3[1, k] * za[1, k]
            c30 += k4[0] * za[0, n - 1]
            c31 += k4[1] * za[1, n - 1]
            kxs[st, 0] = a1[0, 0] * xa[0] + a1[0, 1] * xa[1] + g1[0, 0] * f0 + g1[0, 1] * f1 + bv[0]
            kxs[st, 1] = a1[1, 0] * xa[0] + a1[1, 1] * xa[1] + g1[1, 0] * f0 + g1[1, 1] * f1 + bv[1]
            if eps > 0.0:
                av0 = np.sqrt(v0 * v0 + eps)
                av1 = np.sqrt(v1 * v1 + eps)
            else:
                av0 = abs(v0)
                av1 = abs(v1)
            s0 = -theta * sig[0] * av0 / muc[0]
            s1 = -theta * sig[1] * av1 / muc[1]
            hv0 = hd[0] * v0
            hv1 = hd[1] * v1
            kzs[st, 0, 0] = 0.0
            kzs[st, 1, 0] = 0.0
            for k in range(1, n):
                kzs[st, 0, k] = (-lam[0] * (za[0, k] - za[0, k - 1]) / dxi
                                 + s0 * (za[0, k] + c20) + c30 + hv0)
                kzs[st, 1, k] = (-lam[1] * (za[1, k] - za[1, k - 1]) / dxi
                                 + s1 * (za[1, k] + c21) + c31 + hv1)

            # measurement at the plant stage state (noise held over the step)
            y0 = hv0 + yn0
            y1 = hv1 + yn1

            # ---- observer RHS ----
            if with_obs == 1:
                yh0 = hd[0] * (a2[0, 0] * xha[0] + a2[0, 1] * xha[1]
                               + g2[0, 0] * uo0 + g2[0, 1] * uo1)
                yh1 = hd[1] * (a2[1, 0] * xha[0] + a2[1, 1] * xha[1]
                               + g2[1, 0] * uo0 + g2[1, 1] * uo1)
                fh0 = 0.0; fh1 = 0.0
                d20 = 0.0; d21 = 0.0
                d30 = 0.0; d31 = 0.0
                for k in range(n):
                    fh0 += w1[0, k] * zha[0, k]
                    fh1 += w1[1, k] * zha[1, k]
                    d20 += w2[0, k] * zha[0, k]
                    d21 += w2[1, k] * zha[1, k]
                    d30 += w3[0, k] * zha[0, k]
                    d31 += w3[1, k] * zha[1, k]
                d30 += k4[0] * zha[0, n - 1]
                d31 += k4[1] * zha[1, n - 1]
                in0 = y0 - yh0
                in1 = y1 - yh1
                kxh[st, 0] = (a1[0, 0] * xha[0] + a1[0, 1] * xha[1]
                              + g1[0, 0] * fh0 + g1[0, 1] * fh1 + bv[0]
                              - l1m[0, 0] * in0 - l1m[0, 1] * in1)
                kxh[st, 1] = (a1[1, 0] * xha[0] + a1[1, 1] * xha[1]
                              + g1[1, 0] * fh0 + g1[1, 1] * fh1 + bv[1]
                              - l1m[1, 0] * in0 - l1m[1, 1] * in1)
                ys0 = y0 / hd[0]
                ys1 = y1 / hd[1]
                if eps > 0.0:
                    ah0 = np.sqrt(ys0 * ys0 + eps)
                    ah1 = np.sqrt(ys1 * ys1 + eps)
                else:
                    ah0 = abs(ys0)
                    ah1 = abs(ys1)
                sh0 = -theta * sig[0] * ah0 / muc[0]
                sh1 = -theta * sig[1] * ah1 / muc[1]
                kzh[st, 0, 0] = 0.0
                kzh[st, 1, 0] = 0.0
                for k in range(1, n):
                    kzh[st, 0, k] = (-lam[0] * (zha[0, k] - zha[0, k - 1]) / dxi
                                     + sh0 * (zha[0, k] + d20) + d30 + y0)
                    kzh[st, 1, k] = (-lam[1] * (zha[1, k] - zha[1, k - 1]) / dxi
                                     + sh1 * (zha[1, k] + d21) + d31 + y1)

        # ---- combine stages ----
        if scheme == 1:
            for j in range(2):
                x[j] += dt / 6.0 * (kxs[0, j] + 2.0 * kxs[1, j] + 2.0 * kxs[2, j] + kxs[3, j])
            for i in range(2):
                for k in range(1, n):
                    z[i, k] += dt / 6.0 * (kzs[0, i, k] + 2.0 * kzs[1, i, k]
                                           + 2.0 * kzs[2, i, k] + kzs[3, i, k])
            if with_obs == 1:
                for j in range(2):
                    xh[j] += dt / 6.0 * (kxh[0, j] + 2.0 * kxh[1, j] + 2.0 * kxh[2, j] + kxh[3, j])
                for i in range(2):
                    for k in range(1, n):
                        zh[i, k] += dt / 6.0 * (kzh[0, i, k] + 2.0 * kzh[1, i, k]
                                                + 2.0 * kzh[2, i, k] + kzh[3, i, k])
        else:
            for j in range(2):
                x[j] += dt * kxs[0, j]
            for i in range(2):
                for k in range(1, n):
                    z[i, k] += dt * kzs[0, i, k]
            if with_obs == 1:
                for j in range(2):
                    xh[j] += dt * kxh[0, j]
                for i in range(2):
                    for k in range(1, n):
                        zh[i, k] += dt * kzh[0, i, k]

        # ---- post-step logging ----
        zsq = 0.0
        zsqh = 0.0
        st_acc = 0.0
        for k in range(n):
            zsq += wq[k] * (z[0, k] * z[0, k] + z[1, k] * z[1, k])
            st_acc += wq[k] * (qd[0, k] * z[0, k] * z[0, k] + qd[1, k] * z[1, k] * z[1, k])
            if with_obs == 1:
                zsqh += wq[k] * (zh[0, k] * zh[0, k] + zh[1, k] * zh[1, k])
        nrmx[kk] = np.sqrt(x[0] * x[0] + x[1] * x[1])
        nrm[kk] = np.sqrt(x[0] * x[0] + x[1] * x[1] + zsq)
        stor[kk] = 0.5 * st_acc
        if with_obs == 1:
            nrmh[kk] = np.sqrt(xh[0] * xh[0] + xh[1] * xh[1] + zsqh)

        # post-step tire force and slip velocity (with applied input)
        f0 = 0.0; f1 = 0.0
        for k in range(n):
            f0 += w1[0, k] * z[0, k]
            f1 += w1[1, k] * z[1, k]
        f_log[kk, 0] = f0
        f_log[kk, 1] = f1
        v_log[kk, 0] = a2[0, 0] * x[0] + a2[0, 1] * x[1] + g2[0, 0] * ua0 + g2[0, 1] * ua1
        v_log[kk, 1] = a2[1, 0] * x[0] + a2[1, 1] * x[1] + g2[1, 0] * ua0 + g2[1, 1] * ua1

        # Lyapunov diagnostics: deviation energy, transformed-field storage,
        # and the observer error functional
        xd0 = x[0] - xstar[0]
        xd1 = x[1] - xstar[1]
        v1_log[kk] = 0.5 * (xd0 * xd0 + xd1 * xd1)
        pi0 = pvw[0, 0] * xd0 + pvw[0, 1] * xd1
        pi1 = pvw[1, 0] * xd0 + pvw[1, 1] * xd1
        acc2 = 0.0
        for k in range(n):
            ze0 = z[0, k] - zstar[0, k] - (mprof[k, 0, 0] * pi0 + mprof[k, 0, 1] * pi1)
            ze1 = z[1, k] - zstar[1, k] - (mprof[k, 1, 0] * pi0 + mprof[k, 1, 1] * pi1)
            acc2 += wq[k] * (qd[0, k] * ze0 * ze0 + qd[1, k] * ze1 * ze1)
        v2_log[kk] = 0.5 * acc2
        v_lyap[kk] = v1_log[kk] + v2_log[kk] / gam1
        if with_obs == 1:
            xt0 = x[0] - xh[0]
            xt1 = x[1] - xh[1]
            acc0 = 0.0
            for k in range(n):
                zt0 = z[0, k] - zh[0, k]
                zt1 = z[1, k] - zh[1, k]
                acc0 += wq[k] * (qd[0, k] * zt0 * zt0 + qd[1, k] * zt1 * zt1)
            v0_log[kk] = 0.5 * (pgram[0, 0] * xt0 * xt0 + 2.0 * pgram[0, 1] * xt0 * xt1
                                + pgram[1, 1] * xt1 * xt1) + 0.5 * kappa * acc0

        if kk % log_every == 0:
            idx_dec[idec] = kk
            x_dec[idec, 0] = x[0]
            x_dec[idec, 1] = x[1]
            xh_dec[idec, 0] = xh[0]
            xh_dec[idec, 1] = xh[1]
            y_dec[idec, 0] = hd[0] * v_log[kk, 0] + yn0
            y_dec[idec, 1] = hd[1] * v_log[kk, 1] + yn1
            idec += 1
        if kk % z_every == 0:
            idx_z[iz] = kk
            for i in range(2):
                for k in range(n):
                    z_snap[iz, i, k] = z[i, k]
                    zh_snap[iz, i, k] = zh[i, k]
            iz += 1

        bad = not (np.isfinite(nrm[kk]) and np.isfinite(nrmh[kk]))
        if bad or nrm[kk] > abort_norm:
            status = 1
            n_done = kk + 1
            break

    return (status, n_done, nrm, nrmx, nrmh, stor, f_log, u_cmd, u_app, v_log,
            v1_log, v2_log, v_lyap, v0_log,
            idec, idx_dec, x_dec, xh_dec, y_dec,
            iz, idx_z, z_snap, zh_snap)
