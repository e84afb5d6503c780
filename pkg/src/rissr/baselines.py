"""Reference schemes: exhaustive phase search and the two non-optimized baselines."""

from dataclasses import dataclass

import numpy as np

from .sinr import rates_for_phases, effective_rate

_LN2 = np.log(2.0)

# Hard cap on grid points; levels ** (2M) beyond this is refused outright.
_MAX_GRID_POINTS = 10 ** 8
_CHUNK = 1 << 16


@dataclass
class OracleConfig:
    levels: int = 64
    max_elements: int = 4  # guard on 2M; exhaustive search only for tiny instances

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("levels: must be >= 2")
        if self.max_elements < 2:
            raise ValueError("max_elements: must be >= 2")


def phase_grid(levels):
    """Uniform grid on [-pi, pi): includes -pi, excludes +pi."""
    return -np.pi + 2.0 * np.pi * np.arange(levels) / levels


def brute_force_search(real, p_s, p_r2, sigma2, config=None):
    """Exhaustive max-min-rate search over the uniform phase grid.

    Enumerates levels**(2M) candidates in a fixed order (element 0 is the
    most significant digit) and returns (theta_best, rate_best); the first
    candidate attaining the maximum wins.  Refuses instances whose grid
    would exceed the configured guard.
    """
    cfg = config or OracleConfig()
    d = 2 * real.M
    if d > cfg.max_elements:
        raise ValueError(f"2M = {d} exceeds oracle guard max_elements = {cfg.max_elements}")
    total = cfg.levels ** d
    if total > _MAX_GRID_POINTS:
        raise ValueError(f"levels**(2M) = {total} exceeds the {_MAX_GRID_POINTS} cap")

    grid = phase_grid(cfg.levels)
    radix = cfg.levels ** np.arange(d - 1, -1, -1, dtype=np.int64)
    best_rate = -1.0
    best_idx = -1
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = (idx[:, None] // radix[None, :]) % cfg.levels
        thetas = grid[digits]
        rates = rates_for_phases(real, thetas, p_s, p_r2, sigma2)
        k = int(np.argmax(rates))
        if rates[k] > best_rate:
            best_rate = float(rates[k])
            best_idx = int(idx[k])
    digits = (best_idx // radix) % cfg.levels
    return grid[digits], best_rate


def rate_sr_no_ris(real, p_s, p_r2, sigma2):
    """Successive relaying rate with both surfaces absent.

    Only the direct links matter; the inter-relay interference at R1 is
    untreated and caps the first-slot SINR.
    """
    g_r1 = p_s * abs(real.h_sr1) ** 2 / (p_r2 * abs(real.h_r2r1) ** 2 + sigma2)
    g_d = p_r2 * abs(real.h_r2d) ** 2 / sigma2
    return effective_rate(g_r1, g_d)


def rate_ris_only(real, p, sigma2):
    """Rate of surface-only transmission, no relays.

    S sends straight to D off both surfaces for the whole frame with the
    full power budget, so there is no half-duplex penalty and no
    interference; co-phasing all 2M cascade terms is optimal, giving the
    closed form below.
    """
    amp = float(np.sum(np.abs(real.h_id * real.h_si)))
    return float(np.log1p(p * amp * amp / sigma2) / _LN2)
