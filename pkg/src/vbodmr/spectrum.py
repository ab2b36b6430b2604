"""Analytic forward model of V_B ODMR spectra.

A defect configuration #n carries n 15N and (3 - n) 14N among its nearest
nitrogen sites. Each nuclear product state contributes one Lorentzian dip at
the secular transition frequency; the normalized photoluminescence ratio of
configuration #n is

    R_n(f) = 1 - C * sum_states w(state) * L(f; f_line(state), dnu)

with w = 1/N_level when the nuclear spins are unpolarized. An ensemble with
15N fraction p15 mixes the four configurations with binomial weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_N14_KHZ_PER_MT, GAMMA_N15_KHZ_PER_MT
from .spin_core import IsotopeSpecies

# Line positions closer than this merge into a single Lorentzian.
POSITION_MERGE_TOL_MHZ = 1e-9

DEFAULT_GRID_POINTS = 801
DEFAULT_GRID_SPAN_MHZ = 250.0


@dataclass(frozen=True)
class LevelLadder:
    """Total nuclear projection values and degeneracies of configuration #n."""

    n15_count: int
    rungs: tuple[tuple[float, int], ...]  # (m_tot, degeneracy), ascending m_tot

    @property
    def n_level(self) -> int:
        return sum(g for _, g in self.rungs)

    @property
    def m_values(self) -> tuple[float, ...]:
        return tuple(m for m, _ in self.rungs)

    @property
    def degeneracies(self) -> tuple[int, ...]:
        return tuple(g for _, g in self.rungs)

    @property
    def m_max(self) -> float:
        return self.rungs[-1][0]

    def degeneracy_of(self, m_tot: float) -> int:
        for m, g in self.rungs:
            if m == m_tot:
                return g
        raise KeyError(f"m_tot {m_tot} not on the ladder")


def enumerate_ladder(n15_count: int) -> LevelLadder:
    """Ladder of m_I,tot values for n15_count 15N sites among the three.

    Degeneracies come from the discrete convolution of the per-site
    multiplicity vectors: (1, 1, 1) over m = -1, 0, +1 for each 14N and
    (1, 1) over m = -1/2, +1/2 for each 15N.
    """
    if n15_count not in (0, 1, 2, 3):
        raise ValueError("n15_count must be 0..3")
    degens = np.array([1])
    for _ in range(3 - n15_count):
        degens = np.convolve(degens, np.ones(3, dtype=int))
    for _ in range(n15_count):
        degens = np.convolve(degens, np.ones(2, dtype=int))
    m_min = -(3 - n15_count) - n15_count / 2.0
    rungs = tuple((m_min + k, int(g)) for k, g in enumerate(degens))
    return LevelLadder(n15_count, rungs)


@dataclass(frozen=True)
class Populations:
    """Per-state occupation weights keyed by m_tot.

    ``weights`` aligns with ``ladder.rungs`` and holds the occupation of each
    underlying nuclear product state, so the unpolarized case is 1/N_level
    everywhere and degeneracy * weight sums to 1.
    """

    ladder: LevelLadder
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.weights)
        if len(w) != len(self.ladder.rungs):
            raise ValueError("one weight per ladder rung required")
        if any(x < 0 for x in w):
            raise ValueError("weights must be nonnegative")
        total = math.fsum(g * x for (_, g), x in zip(self.ladder.rungs, w))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"degeneracy-weighted sum must be 1, got {total}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def unpolarized(cls, ladder: LevelLadder) -> "Populations":
        n = ladder.n_level
        return cls(ladder, tuple(1.0 / n for _ in ladder.rungs))

    @classmethod
    def with_polarization(cls, ladder: LevelLadder, polarization: float) -> "Populations":
        """Weights linear in m_tot whose area polarization equals the target.

        With w(m) = (1 + kappa*m)/N_level the degeneracy-weighted areas give
        polarization kappa * sum(g m^2) / (N_level * m_max); kappa is solved
        from that. Only targets small enough to keep all weights nonnegative
        are representable.
        """
        n = ladder.n_level
        sum_gm2 = math.fsum(g * m * m for m, g in ladder.rungs)
        kappa = polarization * n * ladder.m_max / sum_gm2
        weights = tuple((1.0 + kappa * m) / n for m, _ in ladder.rungs)
        if any(w < 0 for w in weights):
            raise ValueError(f"polarization {polarization} not representable by a linear tilt")
        return cls(ladder, weights)

    def weight_of(self, m_tot: float) -> float:
        for (m, _), w in zip(self.ladder.rungs, self.weights):
            if m == m_tot:
                return w
        raise KeyError(f"m_tot {m_tot} not on the ladder")

    @property
    def polarization(self) -> float:
        num = math.fsum(m * g * w for (m, g), w in zip(self.ladder.rungs, self.weights))
        den = self.ladder.m_max * math.fsum(
            g * w for (_, g), w in zip(self.ladder.rungs, self.weights)
        )
        return num / den


@dataclass(frozen=True)
class SpectrumModel:
    """Parameters of a forward ODMR curve.

    ``f_center`` is the bare resonance f_{branch,0} = D + branch*gamma_e*Bz in
    MHz; ``contrast`` the dip amplitude C; ``linewidth`` the Lorentzian FWHM
    in MHz; ``a14``/``a15`` the axial hyperfine couplings per species in MHz
    (sign conventions cancel for unpolarized spectra); ``p15`` the 15N
    fraction. ``populations`` optionally replaces the unpolarized weights per
    configuration, keyed by n15_count.
    """

    f_center: float
    contrast: float
    linewidth: float
    a14: float
    a15: float
    p15: float
    branch: int = -1
    populations: dict[int, Populations] | None = None

    def __post_init__(self) -> None:
        # contrast 0 is admitted as the degenerate no-signal limit
        if not 0.0 <= self.contrast < 1.0:
            raise ValueError("contrast must lie in [0, 1)")
        if self.linewidth <= 0.0:
            raise ValueError("linewidth must be positive")
        if not 0.0 <= self.p15 <= 1.0:
            raise ValueError("p15 must lie in [0, 1]")
        if self.branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")


@dataclass(frozen=True)
class Curve:
    """Sampled spectrum: strictly increasing frequency grid and PL ratio."""

    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        f = np.array(self.frequencies, dtype=float)
        v = np.array(self.values, dtype=float)
        if f.ndim != 1 or f.shape != v.shape:
            raise ValueError("frequencies and values must be 1-d arrays of equal length")
        if f.size == 0:
            raise ValueError("grid must be nonempty")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequency grid must be strictly increasing")
        f.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    def to_csv(self, path, value_name: str = "ratio") -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"frequency_mhz,{value_name}\n")
            for f, v in zip(self.frequencies, self.values):
                fh.write(f"{float(f)!r},{float(v)!r}\n")


def default_grid(
    f_center: float,
    span_mhz: float = DEFAULT_GRID_SPAN_MHZ,
    points: int = DEFAULT_GRID_POINTS,
) -> np.ndarray:
    """801 points over f_center +- 250 MHz unless overridden; covers the
    outermost 15N lines (±96 MHz) with sub-MHz resolution."""
    return np.linspace(f_center - span_mhz, f_center + span_mhz, points)


def lorentzian(f, f0: float, fwhm: float):
    """Unit-peak Lorentzian: 1 at f0, 1/2 at f0 +- fwhm/2."""
    if fwhm <= 0:
        raise ValueError("fwhm must be positive")
    half = 0.5 * fwhm
    g = half * half
    d = np.asarray(f, dtype=float) - f0
    return g / (d * d + g)


def config_lines(model: SpectrumModel, n15_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Line positions and total weights of configuration #n.

    Enumerates the per-site nuclear projections with species-specific
    couplings, weights every product state by its population (1/N_level when
    unpolarized), and merges states whose frequencies coincide. The returned
    weights sum to 1 for unpolarized populations.
    """
    if n15_count not in (0, 1, 2, 3):
        raise ValueError("n15_count must be 0..3")
    species = [IsotopeSpecies.N14] * (3 - n15_count) + [IsotopeSpecies.N15] * n15_count
    pops = (model.populations or {}).get(n15_count)
    ladder = enumerate_ladder(n15_count)
    if pops is not None and pops.ladder.n15_count != n15_count:
        raise ValueError("populations ladder does not match the configuration")
    n_level = ladder.n_level

    positions = []
    state_weights = []
    for label in itertools.product(*[s.projections for s in species]):
        shift = 0.0
        for sp, m in zip(species, label):
            a = model.a14 if sp is IsotopeSpecies.N14 else model.a15
            shift += a * m
        positions.append(model.f_center + model.branch * shift)
        if pops is None:
            state_weights.append(1.0 / n_level)
        else:
            state_weights.append(pops.weight_of(sum(label)))

    order = np.argsort(positions, kind="stable")
    merged_pos = []
    merged_w = []
    for idx in order:
        p, w = positions[idx], state_weights[idx]
        if merged_pos and abs(p - merged_pos[-1]) <= POSITION_MERGE_TOL_MHZ:
            merged_w[-1] += w
        else:
            merged_pos.append(p)
            merged_w.append(w)
    return np.array(merged_pos), np.array(merged_w)


def config_spectrum(model: SpectrumModel, n15_count: int, grid) -> Curve:
    """ODMR curve of a single defect configuration on the given grid."""
    grid = np.asarray(grid, dtype=float)
    positions, weights = config_lines(model, n15_count)
    dip = np.zeros_like(grid)
    for p, w in zip(positions, weights):
        dip += w * lorentzian(grid, p, model.linewidth)
    return Curve(grid, 1.0 - model.contrast * dip)


def binomial_fractions(p15: float) -> tuple[float, float, float, float]:
    """Ensemble fractions (P0, P1, P2, P3) of configurations #0..#3 for a
    spatially uniform 15N fraction."""
    if not 0.0 <= p15 <= 1.0:
        raise ValueError("p15 must lie in [0, 1]")
    q = 1.0 - p15
    return (q**3, 3.0 * q**2 * p15, 3.0 * q * p15**2, p15**3)


def mixture_spectrum(model: SpectrumModel, grid) -> Curve:
    """Ensemble ODMR curve: binomial mixture of the four configurations."""
    grid = np.asarray(grid, dtype=float)
    fractions = binomial_fractions(model.p15)
    values = np.zeros_like(grid)
    for n, frac in enumerate(fractions):
        if frac == 0.0:
            continue
        values += frac * config_spectrum(model, n, grid).values
    return Curve(grid, values)


def predict_a15_from_a14(a14_mhz: float) -> float:
    """Axial 15N coupling expected from the 14N one via the gyromagnetic
    ratio; the magnitude grows by |gamma_15N / gamma_14N| = 1.4027 and the
    sign flips."""
    return a14_mhz * (GAMMA_N15_KHZ_PER_MT / GAMMA_N14_KHZ_PER_MT)
