"""Independent reference computations for the self-checks and the test-suite.

Nothing here calls the package's kinematics, dynamics or solver: the leg chain is
re-composed link by link with complex-safe rotations so velocities can be taken
by complex step, and the equations of motion are formed from the Lagrangian
numerically.
"""

import numpy as np
from scipy.linalg import expm

CSTEP = 1e-30


def rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.result_type(a, float))


def ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.result_type(a, float))


def hat(w):
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]], dtype=np.result_type(w[0], float))


def leg_bodies(p_B, R, gamma, phi_h, phi_k, geom):
    """Positions and orientations of hip, knee, foot, thruster for one leg."""
    R_P = R @ rx(gamma)
    R_H = R_P @ ry(phi_h)
    p_P = p_B + R @ geom.l1
    p_H = p_P + R_P @ geom.l2
    p_K = p_H + R_H @ geom.l3
    l4 = np.array([-geom.l4a * np.cos(phi_k), 0 * phi_k, -(geom.l4b + geom.l4a * np.sin(phi_k))])
    p_F = p_K + R_H @ ry(phi_k) @ l4
    p_T = p_B + R @ geom.lt
    return {"H": (p_H, R_P), "K": (p_K, R_H), "F": (p_F, None), "T": (p_T, None)}


def config_points(R, q, phi_k, params):
    """All named points/orientations for a configuration (possibly complex)."""
    p_B = q[0:3]
    out = {"B": (p_B, R)}
    for i, side in enumerate("LR"):
        geom = params.leg(side)
        for name, val in leg_bodies(p_B, R, q[3 + i], q[5 + i], phi_k[i], geom).items():
            out[name + side] = val
    return out


def velocities(R, q, phi_k, omega, q_dot, phi_k_dot, params):
    """Complex-step point velocities and body-frame angular velocities."""
    Rc = R @ (np.eye(3) + 1j * CSTEP * hat(omega))
    qc = q + 1j * CSTEP * np.asarray(q_dot)
    kc = phi_k + 1j * CSTEP * np.asarray(phi_k_dot)
    pts = config_points(Rc, qc, kc, params)
    vel = {}
    for name, (p, Rb) in pts.items():
        pd = np.imag(p) / CSTEP
        w = None
        if Rb is not None:
            Rr = np.real(Rb)
            W = Rr.T @ (np.imag(Rb) / CSTEP)
            w = np.array([W[2, 1], W[0, 2], W[1, 0]])
        vel[name] = (pd, w)
    return vel


MASSIVE = ("B", "HL", "KL", "HR", "KR")


def _mass_inertia(name, params):
    mp = params.mass
    return {"B": (mp.m_B, mp.I_B), "H": (mp.m_H, mp.I_H), "K": (mp.m_K, mp.I_K)}[name[0]]


def kinetic(R, q, omega, q_dot, params):
    vel = velocities(R, q, np.zeros(2), omega, q_dot, np.zeros(2), params)
    T = 0.0
    for name in MASSIVE:
        m, I = _mass_inertia(name, params)
        pd, w = vel[name]
        T += 0.5 * m * pd @ pd + 0.5 * w @ I @ w
    return T


def potential(R, q, params):
    pts = config_points(R, q, np.zeros(2), params)
    return sum(_mass_inertia(n, params)[0] * params.mass.g * pts[n][0][2] for n in MASSIVE)


def lagrangian(R, q, omega, q_dot, params):
    return kinetic(R, q, omega, q_dot, params) - potential(R, q, params)


def mass_matrix(R, q, params):
    """Polarization of the kinetic energy over nu = [omega, q_dot] (10)."""
    n = 10

    def T(nu):
        return kinetic(R, q, nu[0:3], nu[3:10], params)

    E = np.eye(n)
    diag = np.array([T(E[i]) for i in range(n)])
    M = np.diag(2 * diag)
    for i in range(n):
        for j in range(i + 1, n):
            M[i, j] = M[j, i] = T(E[i] + E[j]) - diag[i] - diag[j]
    return M


def generalized_force_of_point(R, q, phi_k, params, point, force):
    """Virtual work of an inertial force at a point, over nu = [omega, q_dot] (10)."""
    Q = np.zeros(10)
    for i in range(10):
        nu = np.zeros(10)
        nu[i] = 1.0
        pd, _ = velocities(R, q, phi_k, nu[0:3], nu[3:10], np.zeros(2), params)[point]
        Q[i] = pd @ force
    return Q


def lagrange_accel(x, params, joint_torque, foot_forces, thrusts, h_fd=1e-6, h_t=1e-5):
    """Accelerations of the 10 massive coordinates from the rotational Euler-Lagrange form.

    ``joint_torque``: 4 torques on (gamma_L, gamma_R, phi_h_L, phi_h_R).
    """
    R = x[0:9].reshape(3, 3)
    q = x[9:16]
    phi_k = x[16:18]
    omega = x[18:21]
    q_dot = x[21:28]
    nu = np.concatenate([omega, q_dot])

    M = mass_matrix(R, q, params)

    def M_at(t):
        return mass_matrix(R @ expm(t * hat(omega)), q + t * q_dot, params)

    Mdot = (M_at(h_t) - M_at(-h_t)) / (2 * h_t)
    pi = M @ nu

    dLdq = np.zeros(7)
    for i in range(7):
        e = np.zeros(7)
        e[i] = h_fd
        dLdq[i] = (lagrangian(R, q + e, omega, q_dot, params) - lagrangian(R, q - e, omega, q_dot, params)) / (2 * h_fd)
    dLdR = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            E = np.zeros((3, 3))
            E[a, b] = h_fd
            dLdR[a, b] = (lagrangian(R + E, q, omega, q_dot, params) - lagrangian(R - E, q, omega, q_dot, params)) / (2 * h_fd)
    # rows of R are the r_Bj of R^T = [r_B1, r_B2, r_B3]
    rot_term = sum(np.cross(R[j], dLdR[j]) for j in range(3))

    Q = np.zeros(10)
    Q[3 + 3:3 + 7] += joint_torque
    for i, side in enumerate("LR"):
        Q += generalized_force_of_point(R, q, phi_k, params, "F" + side, foot_forces[i])
        Q += generalized_force_of_point(R, q, phi_k, params, "T" + side, thrusts[i])

    bias = Mdot @ nu
    bias[0:3] += np.cross(omega, pi[0:3]) + rot_term
    bias[3:10] -= dLdq
    return np.linalg.solve(M, Q - bias)


def dual_projected_gradient(P, c, A, b, tol=1e-10, max_iter=1_000_000):
    """Accelerated projected gradient on the QP dual (needs P positive definite).

    Uses the gradient-based adaptive restart of the momentum term.  Returns
    (u, primal objective, dual objective); the dual objective is a certified
    lower bound on the optimum.
    """
    Pinv = np.linalg.inv(P)
    H = A @ Pinv @ A.T
    g0 = A @ Pinv @ c + b  # dual gradient is -(H y + g0)
    L = max(np.linalg.eigvalsh(H)[-1], 1e-12)
    y = np.zeros(A.shape[0])
    z = y.copy()
    t = 1.0

    def dual(yv):
        w = c + A.T @ yv
        return -0.5 * w @ Pinv @ w - b @ yv

    for k in range(max_iter):
        y_new = np.maximum(0.0, z - (H @ z + g0) / L)
        if (z - y_new) @ (y_new - y) > 0.0:
            # momentum points uphill: restart
            t = 1.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = y_new + ((t - 1.0) / t_new) * (y_new - y)
        if np.max(np.abs(y_new - y), initial=0.0) < tol and k > 10:
            y = y_new
            break
        y, t = y_new, t_new
    u = -Pinv @ (c + A.T @ y)
    return u, 0.5 * u @ P @ u + c @ u, dual(y)
