"""Self-check suite: machine-readable pass/fail for the package invariants.

Each group returns a measured figure next to its threshold so a failure
report carries the evidence. The groups cover the eigensolver residual, the
level-ladder degeneracies, the agreement of the full Hamiltonian with the
secular expression, and the isotope sensitivity-gain ratio.
"""

from __future__ import annotations

import itertools

import numpy as np

from .analysis import relative_sensitivity, spectral_slope
from .spectrum import SpectrumModel, enumerate_ladder
from .spin_core import (
    HermitianMatrix,
    IsotopeSpecies,
    eigen_hermitian,
    make_system,
    transition_frequencies,
)

DEFAULT_EIGEN_TOLERANCE = 1e-9
DEFAULT_ORACLE_DRAWS = 25
ORACLE_TOLERANCE_MHZ = 1e-6
DEFAULT_SLOPE_RATIO_BOUNDS = (1.75, 1.85)


def brute_force_ladder_table() -> dict[int, list[int]]:
    """Degeneracy tables by direct enumeration of all product states."""
    table = {}
    for n in range(4):
        species = [IsotopeSpecies.N14] * (3 - n) + [IsotopeSpecies.N15] * n
        counts: dict[float, int] = {}
        for label in itertools.product(*[s.projections for s in species]):
            m = sum(label)
            counts[m] = counts.get(m, 0) + 1
        table[n] = [counts[m] for m in sorted(counts)]
    return table


def check_eigensolver(tolerance: float = DEFAULT_EIGEN_TOLERANCE, seed: int = 20240) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dim in (24, 54, 81):
        x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        m = 100.0 * (x + x.conj().T) / 2.0
        values, vectors = eigen_hermitian(HermitianMatrix(m))
        scale = float(np.linalg.norm(m))
        for k in range(dim):
            res = float(np.linalg.norm(m @ vectors[:, k] - values[k] * vectors[:, k]))
            worst = max(worst, res / scale)
    return {
        "name": "eigensolver",
        "passed": bool(worst <= tolerance),
        "measured_residual": worst,
        "tolerance": tolerance,
    }


def check_ladder(table: dict[int, list[int]] | None = None) -> dict:
    expected = table if table is not None else brute_force_ladder_table()
    mismatches = []
    for n in range(4):
        got = list(enumerate_ladder(n).degeneracies)
        want = list(expected.get(n, []))
        if got != want:
            mismatches.append({"n15_count": n, "computed": got, "expected": want})
    return {
        "name": "ladder",
        "passed": not mismatches,
        "mismatches": mismatches,
    }


def check_oracle_equivalence(
    draws: int = DEFAULT_ORACLE_DRAWS,
    seed: int = 20241,
    tolerance_mhz: float = ORACLE_TOLERANCE_MHZ,
) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n15 in range(4):
        for _ in range(draws):
            d = rng.uniform(3300.0, 3600.0)
            b_z = rng.uniform(10.0, 100.0)
            a14 = rng.uniform(-80.0, 80.0)
            a15 = rng.uniform(-80.0, 80.0)
            sys = make_system(d, b_z, n15, a14, a15)
            for branch in (1, -1):
                f_full = transition_frequencies(sys, "full").frequencies(branch)
                f_eff = transition_frequencies(sys, "effective").frequencies(branch)
                worst = max(worst, float(np.abs(f_full - f_eff).max()))
    return {
        "name": "oracle_equivalence",
        "passed": bool(worst <= tolerance_mhz),
        "max_deviation_mhz": worst,
        "tolerance_mhz": tolerance_mhz,
        "draws_per_configuration": draws,
    }


def check_slope_ratio(bounds: tuple[float, float] = DEFAULT_SLOPE_RATIO_BOUNDS) -> dict:
    grid = np.linspace(2308.0 - 300.0, 2308.0 + 300.0, 4001)
    common = dict(f_center=2308.0, contrast=0.1, linewidth=50.0, branch=-1)
    model15 = SpectrumModel(a14=43.0, a15=64.0, p15=1.0, **common)
    model14 = SpectrumModel(a14=43.0, a15=64.0, p15=0.0, **common)
    slope15 = spectral_slope(model15, grid, "per_contrast")
    slope14 = spectral_slope(model14, grid, "per_contrast")
    # eta_15/eta_14 = slope_14/slope_15; the quoted gain is the inverse.
    gain = 1.0 / relative_sensitivity(slope15, slope14)
    return {
        "name": "slope_ratio",
        "passed": bool(bounds[0] <= gain <= bounds[1]),
        "gain_15n_over_14n": gain,
        "bounds": list(bounds),
    }


def run_validation(
    eigensolver_tolerance: float = DEFAULT_EIGEN_TOLERANCE,
    ladder_table: dict[int, list[int]] | None = None,
    oracle_draws: int = DEFAULT_ORACLE_DRAWS,
    slope_ratio_bounds: tuple[float, float] = DEFAULT_SLOPE_RATIO_BOUNDS,
    seed: int = 20240,
) -> dict:
    groups = [
        check_eigensolver(eigensolver_tolerance, seed),
        check_ladder(ladder_table),
        check_oracle_equivalence(oracle_draws, seed + 1),
        check_slope_ratio(slope_ratio_bounds),
    ]
    return {
        "schema_version": "1",
        "passed": all(g["passed"] for g in groups),
        "groups": groups,
    }
