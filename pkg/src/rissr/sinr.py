"""SINR evaluation in direct and lifted quadratic form.

Slot 1: S transmits; R1 receives the signal through its direct link plus
both surfaces while R2's concurrent transmission leaks in as interference.
Slot 2: R2 transmits; D receives through its direct link plus both
surfaces while the S transmission reflected off the surfaces leaks in.
The surfaces apply one phase shift per element; theta stacks surface 1
then surface 2, length 2M.

With v = [exp(j*theta); 1] and q the stacked cascade/direct coefficients,
each composite channel is v^T q, so every signal or interference power is
a quadratic form |v^T q|^2 = tr(V Q) with V = conj(v) v^T and Q = q q^H.
The trace form accepts any Hermitian V, which is what the semidefinite
relaxation optimizes over.
"""

from dataclasses import dataclass

import numpy as np

_LN2 = np.log(2.0)


def wrap_phase(x):
    """Wrap into [-pi, pi] by a single +-2pi correction."""
    x = np.asarray(x, dtype=float)
    x = np.where(x > np.pi, x - 2.0 * np.pi, x)
    x = np.where(x < -np.pi, x + 2.0 * np.pi, x)
    return x


@dataclass
class QuadraticForms:
    """Stacked coefficient vectors (length 2M+1) and their outer products.

    q_sr1: desired signal at R1; q_r2r1: inter-relay interference at R1;
    q_r2d: desired signal at D; q_sd: source leakage at D (no direct S-D
    link, so its last entry is zero).
    """

    q_sr1: np.ndarray
    q_r2r1: np.ndarray
    q_r2d: np.ndarray
    q_sd: np.ndarray
    Q_sr1: np.ndarray
    Q_r2r1: np.ndarray
    Q_r2d: np.ndarray
    Q_sd: np.ndarray

    @property
    def dim(self):
        return len(self.q_sr1)


def build_quadratics(real):
    """Lift a channel realization into the stacked quadratic-form data."""
    def q(cascade, direct):
        return np.append(cascade, direct)

    q_sr1 = q(real.h_ir1 * real.h_si, real.h_sr1)
    q_r2r1 = q(real.h_ir1 * real.h_r2i, real.h_r2r1)
    q_r2d = q(real.h_id * real.h_r2i, real.h_r2d)
    q_sd = q(real.h_id * real.h_si, 0.0)

    def outer(v):
        return np.outer(v, v.conj())

    return QuadraticForms(
        q_sr1=q_sr1, q_r2r1=q_r2r1, q_r2d=q_r2d, q_sd=q_sd,
        Q_sr1=outer(q_sr1), Q_r2r1=outer(q_r2r1),
        Q_r2d=outer(q_r2d), Q_sd=outer(q_sd),
    )


def _check_theta(real, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[1] != 2 * real.M:
        raise ValueError(f"theta: expected 2M = {2 * real.M} phases per row, "
                         f"got shape {theta.shape}")
    return theta


def sinr_batch(real, thetas, p_s, p_r2, sigma2):
    """Both SINRs for a (K, 2M) batch of phase vectors; returns (g_r1, g_d)."""
    thetas = _check_theta(real, np.atleast_2d(thetas))
    e = np.exp(1j * thetas)
    sig1 = real.h_sr1 + e @ (real.h_ir1 * real.h_si)
    iri1 = real.h_r2r1 + e @ (real.h_ir1 * real.h_r2i)
    sig2 = real.h_r2d + e @ (real.h_id * real.h_r2i)
    leak2 = e @ (real.h_id * real.h_si)
    g_r1 = p_s * np.abs(sig1) ** 2 / (p_r2 * np.abs(iri1) ** 2 + sigma2)
    g_d = p_r2 * np.abs(sig2) ** 2 / (p_s * np.abs(leak2) ** 2 + sigma2)
    return g_r1, g_d


def sinr_r1(real, theta, p_s, p_r2, sigma2):
    """SINR of the S to R1 slot under inter-relay interference."""
    return float(sinr_batch(real, theta, p_s, p_r2, sigma2)[0][0])


def sinr_d(real, theta, p_s, p_r2, sigma2):
    """SINR of the R2 to D slot under source leakage."""
    return float(sinr_batch(real, theta, p_s, p_r2, sigma2)[1][0])


def trace_of(Q, V):
    """Real trace of (V Q) for Hermitian Q, V; clamps the -1e-15 rounding floor."""
    z = np.vdot(Q, V)
    assert abs(z.imag) <= 1e-9 * (1.0 + abs(z.real)), "trace should be real"
    return max(float(z.real), 0.0)


def sinr_trace_form(qf, V, which, p_s, p_r2, sigma2):
    """SINR evaluated from a lifted matrix V (Hermitian, unit diagonal).

    which selects the slot: 'r1' or 'd'.  Exact match with the direct form
    when V = conj(v) v^T for v = [exp(j*theta); 1].
    """
    V = np.asarray(V)
    if V.shape != (qf.dim, qf.dim):
        raise ValueError(f"V: expected shape {(qf.dim, qf.dim)}, got {V.shape}")
    herm_err = np.max(np.abs(V - V.conj().T))
    if herm_err > 1e-8 * max(1.0, np.max(np.abs(V))):
        raise ValueError("V: not Hermitian")
    if which == "r1":
        return p_s * trace_of(qf.Q_sr1, V) / (p_r2 * trace_of(qf.Q_r2r1, V) + sigma2)
    if which == "d":
        return p_r2 * trace_of(qf.Q_r2d, V) / (p_s * trace_of(qf.Q_sd, V) + sigma2)
    raise ValueError("which: must be 'r1' or 'd'")


def effective_rate(g_r1, g_d):
    """End-to-end rate in bits/s/Hz: the weaker slot limits the chain."""
    if g_r1 < 0 or g_d < 0:
        raise ValueError("SINRs must be nonnegative")
    return float(np.log1p(min(g_r1, g_d)) / _LN2)


def rate_for_phases(real, theta, p_s, p_r2, sigma2):
    """Effective rate achieved by one phase vector."""
    g_r1, g_d = sinr_batch(real, theta, p_s, p_r2, sigma2)
    return effective_rate(float(g_r1[0]), float(g_d[0]))


def rates_for_phases(real, thetas, p_s, p_r2, sigma2):
    """Effective rates for a (K, 2M) batch of phase vectors."""
    g_r1, g_d = sinr_batch(real, thetas, p_s, p_r2, sigma2)
    return np.log1p(np.minimum(g_r1, g_d)) / _LN2
