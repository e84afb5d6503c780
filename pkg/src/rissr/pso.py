"""Particle swarm search over the 2M surface phases.

Plain swarm with two twists that keep it stable on this landscape: the
neighborhood best comes from the two ring neighbors only (self excluded),
and after every velocity update each coordinate column is rescaled so its
largest magnitude is exactly mu.  Positions live in [-pi, pi] and are
wrapped back by a single +-2pi correction after each move.  Fitness is the
minimum of the two slot SINRs in linear scale; rates are only formed for
reporting.  Cost per iteration is O(2 M N).
"""

from dataclasses import dataclass

import numpy as np

from .sinr import sinr_batch, wrap_phase

_LN2 = np.log(2.0)


@dataclass
class PsoParams:
    N: int = 100          # particles
    T: int = 200          # iterations
    mu: float = np.pi / 8  # velocity normalization target
    w1: float = 2.0       # neighborhood pull
    w2: float = 2.0       # global pull
    seed: int = 0

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("N: must be >= 3 (ring neighborhoods need it)")
        if self.T < 0:
            raise ValueError("T: must be >= 0")
        if not (0.0 < self.mu <= np.pi):
            raise ValueError("mu: must be in (0, pi]")
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("w1/w2: must be >= 0")


@dataclass
class PsoState:
    F: np.ndarray                 # positions, (N, 2M)
    X: np.ndarray                 # velocities, (N, 2M)
    fitness: np.ndarray = None    # last evaluated fitness, (N,)
    t: int = 0


@dataclass
class PsoRun:
    best_theta: np.ndarray
    best_fitness: float           # linear min-SINR
    best_rate: float              # bits/s/Hz
    trace_rate: np.ndarray        # best-so-far rate after each evaluation, length T+1
    trace_fitness: np.ndarray


def init_population(params, m_elements, rng):
    """Uniform positions in [-pi, pi], zero velocities."""
    F = rng.uniform(-np.pi, np.pi, size=(params.N, 2 * m_elements))
    X = np.zeros_like(F)
    return PsoState(F=F, X=X)


def evaluate_fitness(state, real, p_s, p_r2, sigma2):
    """Min-SINR fitness of every particle; stores and returns the vector."""
    g_r1, g_d = sinr_batch(real, state.F, p_s, p_r2, sigma2)
    state.fitness = np.minimum(g_r1, g_d)
    return state.fitness


def find_bests(state):
    """Neighborhood and global bests of the current population.

    Returns (L, f_max): L[n] is the better of the two ring neighbors of
    particle n (itself excluded), f_max the single best particle.  Ties go
    to the lower particle index.
    """
    fit = state.fitness
    n = len(fit)
    idx = np.arange(n)
    left = (idx - 1) % n
    right = (idx + 1) % n
    pick_left = (fit[left] > fit[right]) | ((fit[left] == fit[right]) & (left < right))
    neighbor = np.where(pick_left, left, right)
    L = state.F[neighbor]
    f_max = state.F[int(np.argmax(fit))]
    return L, f_max


def update_velocities(state, local_best, global_best, w1, w2, rng):
    """Raw velocity update; fresh uniform r1, r2 per particle per coordinate."""
    r1 = rng.uniform(size=state.F.shape)
    r2 = rng.uniform(size=state.F.shape)
    return state.X + w1 * r1 * (local_best - state.F) + w2 * r2 * (global_best - state.F)


def normalize_velocities(x_raw, mu):
    """Rescale each column so max |column| = mu; all-zero columns stay zero."""
    colmax = np.max(np.abs(x_raw), axis=0)
    scale = np.divide(mu, colmax, out=np.zeros_like(colmax), where=colmax > 0)
    return np.clip(x_raw * scale, -mu, mu)


def step_positions(F, X):
    """Move and wrap back into [-pi, pi]."""
    return wrap_phase(F + X)


def run_pso(real, p_s, p_r2, sigma2, params, iter_hook=None):
    """Full swarm run; returns the best particle ever evaluated.

    The loop evaluates at t = 0..T and updates in between, so the initial
    population counts and T = 0 degenerates to a pure random search over
    it.  Position and velocity bounds are re-checked every iteration and a
    violation raises RuntimeError.  iter_hook(t, state) is called after
    each evaluation when given.
    """
    rng = np.random.default_rng(params.seed)
    state = init_population(params, real.M, rng)
    best_fit = -np.inf
    best_theta = None
    trace = np.empty(params.T + 1)
    for t in range(params.T + 1):
        state.t = t
        fit = evaluate_fitness(state, real, p_s, p_r2, sigma2)
        k = int(np.argmax(fit))
        if fit[k] > best_fit:
            best_fit = float(fit[k])
            best_theta = state.F[k].copy()
        trace[t] = best_fit
        if np.max(np.abs(state.F)) > np.pi:
            raise RuntimeError(f"position out of [-pi, pi] at iteration {t}")
        if np.max(np.abs(state.X)) > params.mu:
            raise RuntimeError(f"velocity magnitude above mu at iteration {t}")
        if iter_hook is not None:
            iter_hook(t, state)
        if t == params.T:
            break
        L, f_max = find_bests(state)
        x_raw = update_velocities(state, L, f_max, params.w1, params.w2, rng)
        state.X = normalize_velocities(x_raw, params.mu)
        state.F = step_positions(state.F, state.X)
    trace_rate = np.log1p(trace) / _LN2
    return PsoRun(
        best_theta=best_theta,
        best_fitness=best_fit,
        best_rate=float(np.log1p(best_fit) / _LN2),
        trace_rate=trace_rate,
        trace_fitness=trace,
    )
