"""Compiled per-state kinematics and mass-matrix assembly.

These run four times per plant step, so they are jitted.  Leg geometry is
packed as ``[l1(3), l2(3), l3(3), l4a, l4b, lt(3)]``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NV = 12


@njit(cache=True)
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def skew3(v):
    S = np.zeros((3, 3))
    S[0, 1] = -v[2]
    S[0, 2] = v[1]
    S[1, 0] = v[2]
    S[1, 2] = -v[0]
    S[2, 0] = -v[1]
    S[2, 1] = v[0]
    return S


@njit(cache=True)
def mv3(A, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2]
    return out


@njit(cache=True)
def rotx(a):
    c, s = math.cos(a), math.sin(a)
    R = np.zeros((3, 3))
    R[0, 0] = 1.0
    R[1, 1] = c
    R[1, 2] = -s
    R[2, 1] = s
    R[2, 2] = c
    return R


@njit(cache=True)
def roty(a):
    c, s = math.cos(a), math.sin(a)
    R = np.zeros((3, 3))
    R[0, 0] = c
    R[0, 2] = s
    R[1, 1] = 1.0
    R[2, 0] = -s
    R[2, 2] = c
    return R


@njit(cache=True)
def leg_chain_kernel(g, h, k, gd, hd, kd, geom):
    """See :class:`thrustwalk.spatial.LegChain` for the returned fields."""
    l1 = geom[0:3]
    l2 = geom[3:6]
    l3 = geom[6:9]
    a = geom[9]
    b = geom[10]
    ex = np.array([1.0, 0.0, 0.0])
    Rx = rotx(g)
    R_H = Rx @ roty(h)
    ck, sk = math.cos(k), math.sin(k)
    # Ry(phi_k) applied to the knee-to-foot vector collapses to this form
    w = np.array([-a - b * sk, 0.0, -b * ck])
    w_k = np.array([-b * ck, 0.0, b * sk])
    w_kk = np.array([b * sk, 0.0, b * ck])

    r_HP = mv3(Rx, l2)
    r_KH = mv3(R_H, l3)
    r_FK = mv3(R_H, w)
    r_FH = r_KH + r_FK
    s_H = l1 + r_HP
    s_K = s_H + r_KH
    s_F = s_K + r_FK

    ey_P = Rx[:, 1].copy()
    foot_k = mv3(R_H, w_k)
    S_H = np.zeros((3, 3))
    S_K = np.zeros((3, 3))
    S_F = np.zeros((3, 3))
    S_H[:, 0] = cross3(ex, r_HP)
    S_K[:, 0] = cross3(ex, r_HP + r_KH)
    S_K[:, 1] = cross3(ey_P, r_KH)
    S_F[:, 0] = cross3(ex, r_HP + r_FH)
    S_F[:, 1] = cross3(ey_P, r_FH)
    S_F[:, 2] = foot_k

    w1 = gd * ex
    w2 = w1 + hd * ey_P
    w2dot = gd * hd * cross3(ex, ey_P)
    rdot_HP = cross3(w1, r_HP)
    rdot_KH = cross3(w2, r_KH)
    zeta = kd * foot_k
    rdot_FH = cross3(w2, r_FH) + zeta
    sdot_H = rdot_HP
    sdot_K = rdot_HP + rdot_KH
    sdot_F = rdot_HP + rdot_FH

    rddot_HP = cross3(w1, rdot_HP)
    Rww = mv3(R_H, w_kk)
    sddot_H = rddot_HP
    sddot_K = rddot_HP + cross3(w2dot, r_KH) + cross3(w2, rdot_KH)
    zetadot = cross3(w2, zeta) + kd * kd * Rww
    sddot_F = rddot_HP + cross3(w2dot, r_FH) + cross3(w2, rdot_FH) + zetadot

    ey_P_dot = cross3(w1, ey_P)
    Sdot_F = np.zeros((3, 3))
    Sdot_F[:, 0] = cross3(ex, rdot_HP + rdot_FH)
    Sdot_F[:, 1] = cross3(ey_P_dot, r_FH) + cross3(ey_P, rdot_FH)
    Sdot_F[:, 2] = cross3(w2, foot_k) + kd * Rww
    return (Rx, R_H, s_H, s_K, s_F, S_H, S_K, S_F,
            sdot_H, sdot_K, sdot_F, sddot_H, sddot_K, sddot_F, Sdot_F)


@njit(cache=True)
def _body_jacobian(R, s, S, c0, c1, c2, ncols):
    Jb = np.zeros((3, NV))
    Jb[:, 0:3] = -skew3(s)
    Jb[:, 3:6] = R.T
    if ncols > 0:
        Jb[:, c0] = S[:, 0]
    if ncols > 1:
        Jb[:, c1] = S[:, 1]
    if ncols > 2:
        Jb[:, c2] = S[:, 2]
    return Jb


@njit(cache=True)
def evaluate_kernel(x, geomL, geomR, masses, I_B, I_H, I_K, with_dynamics):
    R = x[0:9].copy().reshape(3, 3)
    p_B = x[9:12].copy()
    omega = x[18:21].copy()
    v = x[18:30].copy()
    m_B, m_H, m_K, grav = masses[0], masses[1], masses[2], masses[3]
    g_body = grav * R[2].copy()
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])

    M = np.zeros((NV, NV))
    hv = np.zeros(NV)
    if with_dynamics:
        for i in range(3):
            M[3 + i, 3 + i] += m_B
        hv[5] += m_B * grav
        M[0:3, 0:3] += I_B
        hv[0:3] += cross3(omega, mv3(I_B, omega))

    foot_pos = np.empty((2, 3))
    foot_vel = np.empty((2, 3))
    J_foot = np.empty((2, 3, NV))
    foot_bias = np.empty((2, 3))
    thr_pos = np.empty((2, 3))
    J_thr = np.empty((2, 3, NV))
    for side in range(2):
        geom = geomL if side == 0 else geomR
        c0, c1, c2 = 6 + side, 8 + side, 10 + side
        g, h, k = x[12 + side], x[14 + side], x[16 + side]
        gd, hd, kd = x[24 + side], x[26 + side], x[28 + side]
        (Rx, R_H, s_H, s_K, s_F, S_H, S_K, S_F,
         sdot_H, sdot_K, sdot_F, sddot_H, sddot_K, sddot_F, Sdot_F) = leg_chain_kernel(
            g, h, k, gd, hd, kd, geom)

        JbF = _body_jacobian(R, s_F, S_F, c0, c1, c2, 3)
        J_foot[side] = R @ JbF
        foot_pos[side] = p_B + mv3(R, s_F)
        foot_vel[side] = J_foot[side] @ v
        aF = cross3(omega, cross3(omega, s_F) + 2.0 * sdot_F) + sddot_F
        foot_bias[side] = mv3(R, aF)

        lt = geom[11:14].copy()
        JbT = _body_jacobian(R, lt, S_F, c0, c1, c2, 0)
        J_thr[side] = R @ JbT
        thr_pos[side] = p_B + mv3(R, lt)

        if not with_dynamics:
            continue
        for body in range(2):
            if body == 0:
                m, s, S, sdot, sddot, nc = m_H, s_H, S_H, sdot_H, sddot_H, 1
            else:
                m, s, S, sdot, sddot, nc = m_K, s_K, S_K, sdot_K, sddot_K, 2
            Jb = _body_jacobian(R, s, S, c0, c1, c2, nc)
            acc = cross3(omega, cross3(omega, s) + 2.0 * sdot) + sddot
            M += m * (Jb.T @ Jb)
            hv += m * (Jb.T @ (acc + g_body))

        RxT = Rx.T.copy()
        RyT = (RxT @ R_H).T.copy()
        w_H = mv3(RxT, omega) + gd * ex
        w_K = mv3(RyT, w_H + hd * ey)
        wdot_H = -gd * cross3(ex, mv3(RxT, omega))
        wdot_K = -hd * cross3(ey, w_K) + mv3(RyT, wdot_H)
        Jr_H = np.zeros((3, NV))
        Jr_H[:, 0:3] = RxT
        Jr_H[0, c0] = 1.0
        Jr_K = np.zeros((3, NV))
        Jr_K[:, 0:3] = RyT @ RxT
        Jr_K[:, c0] = RyT[:, 0]
        Jr_K[1, c1] = 1.0
        M += Jr_H.T @ (I_H @ Jr_H)
        hv += Jr_H.T @ (mv3(I_H, wdot_H) + cross3(w_H, mv3(I_H, w_H)))
        M += Jr_K.T @ (I_K @ Jr_K)
        hv += Jr_K.T @ (mv3(I_K, wdot_K) + cross3(w_K, mv3(I_K, w_K)))

    if with_dynamics:
        # massless knee coordinates: decoupled unit rows driven by acceleration inputs
        M[10:12, :] = 0.0
        M[:, 10:12] = 0.0
        M[10, 10] = 1.0
        M[11, 11] = 1.0
        hv[10:12] = 0.0
    return R, p_B, foot_pos, foot_vel, J_foot, foot_bias, thr_pos, J_thr, M, hv
