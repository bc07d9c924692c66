"""
Rate-equation optical pumping over the ground-state manifold.

Excited states are adiabatically eliminated: a pump of rate R on g -> e
removes population from g at rate R and returns it to every ground state
g' with the spontaneous branching ratio b(e -> g').  A uniform relaxation
rate pulls each population toward 1/N.  With populations as a column
vector p, dp/dt = G p and every column of G sums to zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq
from scipy.sparse.csgraph import connected_components

from .spectrum import MediumConfig, SpectrumGrid, transmission_spectrum
from .transitions import TransitionLine, compute_lines, dipole_matrix, find_line, solve_line
from .zeeman import ZeemanState, basis_states

__all__ = [
    "ModelError",
    "Pump",
    "PumpScheme",
    "GroundPopulations",
    "branching_ratios",
    "rate_matrix",
    "evolve",
    "steady_state",
    "nuclear_polarization",
    "manifold_populations",
    "half_depletion_limit",
    "pumped_spectrum",
    "pump_rate",
    "three_pump_scheme",
    "transferred_fraction",
    "relaxation_for_transfer",
]


class ModelError(ValueError):
    """The pumping model cannot be built for the requested scheme."""


@dataclass(frozen=True)
class Pump:
    transition: TransitionLine
    rate: float

    def __post_init__(self):
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError(f"pump rate must be finite and >= 0, got {self.rate}")


def _key(state: ZeemanState) -> tuple:
    return (state.isotope, state.term_label, state.field, state.m_J, state.m_I)


@dataclass(frozen=True, eq=False)
class PumpScheme:
    """Pumps acting on one solved (isotope, D line, field) system.

    ``ground_states`` fixes the population ordering (energy order, as
    returned by :func:`transitions.solve_line`).
    """

    ground_states: tuple[ZeemanState, ...]
    excited_states: tuple[ZeemanState, ...]
    pumps: tuple[Pump, ...] = ()
    relaxation_rate: float = 0.0

    def __post_init__(self):
        if self.relaxation_rate < 0:
            raise ValueError("relaxation_rate must be non-negative")
        g_keys = {_key(s) for s in self.ground_states}
        e_keys = {_key(s) for s in self.excited_states}
        for p in self.pumps:
            if _key(p.transition.ground) not in g_keys or _key(p.transition.excited) not in e_keys:
                raise ValueError(f"pump {p.transition.label()} is not part of this system")

    @property
    def isotope(self) -> str:
        return self.ground_states[0].isotope

    @property
    def line(self) -> str:
        return self.pumps[0].transition.line if self.pumps else _line_of(self.excited_states[0])

    @property
    def field(self) -> float:
        return self.ground_states[0].field

    @classmethod
    def build(
        cls,
        isotope: str,
        line: str,
        B: float,
        pumps: Iterable[tuple[tuple[float, float], tuple[float, float], int | None, float]] = (),
        relaxation_rate: float = 0.0,
    ) -> "PumpScheme":
        """Scheme from ``(ground (m_J, m_I), excited (m_J, m_I), q, rate)`` entries."""
        ground, excited = solve_line(isotope, line, B)
        lines = compute_lines(ground, excited, min_strength=0.0)
        objs = tuple(Pump(find_line(lines, g, e, q), float(r)) for g, e, q, r in pumps)
        return cls(tuple(ground), tuple(excited), objs, relaxation_rate)

    def with_rates(self, rates: Sequence[float] | None = None, relaxation_rate: float | None = None) -> "PumpScheme":
        pumps = self.pumps
        if rates is not None:
            if len(rates) != len(pumps):
                raise ValueError("need one rate per pump")
            pumps = tuple(Pump(p.transition, float(r)) for p, r in zip(pumps, rates))
        gamma = self.relaxation_rate if relaxation_rate is None else relaxation_rate
        return PumpScheme(self.ground_states, self.excited_states, pumps, gamma)


def _line_of(excited: ZeemanState) -> str:
    return {"P1/2": "D1", "P3/2": "D2"}[excited.term_label]


@dataclass(frozen=True, eq=False)
class GroundPopulations:
    """Steady-state ground populations, ordered like ``states``.

    ``status`` is ``"unique"`` or ``"non-unique"``; for the latter the
    reported vector is the long-time limit from a uniform start and
    ``components`` lists the closed classes (state labels).
    """

    populations: np.ndarray
    states: tuple[ZeemanState, ...] = field(repr=False)
    status: str = "unique"
    components: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        p = self.populations
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("populations must be non-negative and sum to 1")

    def by_label(self) -> dict[str, float]:
        return {s.label(): float(x) for s, x in zip(self.states, self.populations)}

    def of(self, m_J: float, m_I: float) -> float:
        for s, x in zip(self.states, self.populations):
            if (s.m_J, s.m_I) == (m_J, m_I):
                return float(x)
        raise LookupError(f"no ground state |{m_J},{m_I}>")


def branching_ratios(ground_states: Sequence[ZeemanState], excited_states: Sequence[ZeemanState]) -> np.ndarray:
    """Spontaneous branching b[e, g] from each excited state to each ground state."""
    strength = sum(dipole_matrix(ground_states, excited_states, q) ** 2 for q in (-1, 0, 1))
    total = strength.sum(axis=1)
    if np.any(total <= 0):
        bad = [excited_states[i].label() for i in np.flatnonzero(total <= 0)]
        raise ModelError(f"excited states with zero decay strength: {bad}")
    return strength / total[:, None]


def _index(states: Sequence[ZeemanState], state: ZeemanState) -> int:
    k = _key(state)
    for i, s in enumerate(states):
        if _key(s) == k:
            return i
    raise ValueError(f"{state.label()} not in state list")


def rate_matrix(scheme: PumpScheme) -> np.ndarray:
    """Generator G (1/s) with dp/dt = G p."""
    g_states, e_states = scheme.ground_states, scheme.excited_states
    n = len(g_states)
    G = np.zeros((n, n))
    if scheme.pumps:
        b = branching_ratios(g_states, e_states)
        for pump in scheme.pumps:
            i = _index(g_states, pump.transition.ground)
            e = _index(e_states, pump.transition.excited)
            G[:, i] += pump.rate * b[e]
    if scheme.relaxation_rate:
        G += scheme.relaxation_rate / n
    # diagonal = minus the outflow, so columns conserve population exactly
    np.fill_diagonal(G, 0.0)
    G -= np.diag(G.sum(axis=0))
    return G


def evolve(scheme: PumpScheme, initial, t: float) -> np.ndarray:
    """Populations after time ``t`` (s) from ``initial``."""
    p0 = np.asarray(initial, dtype=float)
    if t < 0:
        raise ValueError("time must be non-negative")
    p = np.clip(expm(rate_matrix(scheme) * t) @ p0, 0.0, None)
    # scaling-and-squaring leaves ~1e-12 drift in the total on stiff generators
    return p * (p0.sum() / p.sum()) if p.sum() > 0 else p


def _stationary(Gc: np.ndarray) -> np.ndarray:
    """Normalized null vector of an irreducible generator block."""
    m = Gc.shape[0]
    if m == 1:
        return np.ones(1)
    A = np.vstack([Gc, np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def _limit(G: np.ndarray, p0: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Long-time limit of dp/dt = G p and the closed classes of the chain."""
    n = G.shape[0]
    scale = max(np.abs(G).max(), 1.0)
    adj = (np.abs(G) > 1e-14 * scale) & ~np.eye(n, dtype=bool)
    # edge j -> i when G[i, j] > 0; csgraph reads adj[row -> col]
    n_comp, labels = connected_components(adj.T, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(n), members)
        if not adj[np.ix_(outside, members)].any():
            closed.append(members)
    recurrent = np.concatenate(closed)
    transient = np.setdiff1d(np.arange(n), recurrent)

    p = np.zeros(n)
    mass = {id(c): p0[c].sum() for c in closed}
    if transient.size:
        # expected occupation times of the transient states
        tau = np.linalg.solve(-G[np.ix_(transient, transient)], p0[transient])
        for c in closed:
            mass[id(c)] += float((G[np.ix_(c, transient)] @ tau).sum())
    for c in closed:
        p[c] = mass[id(c)] * _stationary(G[np.ix_(c, c)])
    p = np.clip(p, 0.0, None)
    return p / p.sum(), closed


def steady_state(scheme: PumpScheme, initial=None) -> GroundPopulations:
    """Null vector of the generator, normalized.

    When relaxation vanishes the chain may have several closed classes;
    the returned vector is then the limit reached from ``initial``
    (default: thermal, i.e. uniform) and the status is ``"non-unique"``.
    """
    states = scheme.ground_states
    n = len(states)
    G = rate_matrix(scheme)
    p0 = np.full(n, 1.0 / n) if initial is None else np.asarray(initial, dtype=float)
    if p0.shape != (n,) or np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-12:
        raise ValueError("initial populations must be a normalized non-negative vector")
    p, closed = _limit(G, p0)
    if len(closed) == 1:
        return GroundPopulations(p, states)
    comps = tuple(tuple(states[i].label() for i in c) for c in closed)
    return GroundPopulations(p, states, "non-unique", comps)


def _m_I_values(states: Sequence[ZeemanState], exact: bool) -> np.ndarray:
    if not exact:
        return np.array([s.m_I for s in states])
    out = []
    for s in states:
        m_I = np.array([b.m_I for b in basis_states(s.J, s.I)])
        out.append(float(np.sum(s.composition**2 * m_I)))
    return np.array(out)


def nuclear_polarization(populations, nuclear_spin: float | None = None, m_I=None, exact: bool = False) -> float:
    """<m_I>/I of a ground-state distribution.

    ``populations`` is a :class:`GroundPopulations` or a plain vector with
    matching ``m_I`` labels.  ``exact`` uses <I_z> of each eigenstate instead
    of its dominant m_I label.
    """
    if isinstance(populations, GroundPopulations):
        p = populations.populations
        m = _m_I_values(populations.states, exact)
        I = populations.states[0].I if nuclear_spin is None else nuclear_spin
    else:
        if m_I is None or nuclear_spin is None:
            raise ValueError("plain population vectors need m_I labels and nuclear_spin")
        p = np.asarray(populations, dtype=float)
        m = np.asarray(m_I, dtype=float)
        I = nuclear_spin
    return float(np.dot(p, m) / p.sum() / I)


def manifold_populations(populations: GroundPopulations) -> dict[float, float]:
    """Total population per nuclear manifold m_I."""
    out: dict[float, float] = {}
    for s, x in zip(populations.states, populations.populations):
        out[s.m_I] = out.get(s.m_I, 0.0) + float(x)
    return dict(sorted(out.items()))


def half_depletion_limit(nuclear_spin: float, transfer: float = 0.5, measure: str = "stretched") -> float:
    """Sequential manifold-to-manifold transfer bound.

    Start uniform over the 2I+1 manifolds and, from the lowest m_I up,
    move ``transfer`` of each manifold's population one step up.
    ``measure="stretched"`` returns the population of m_I = +I;
    ``measure="polarization"`` returns <m_I>/I.
    """
    n = round(2 * nuclear_spin) + 1
    if abs(nuclear_spin * 2 - (n - 1)) > 1e-12 or nuclear_spin <= 0:
        raise ValueError("nuclear spin must be a positive half-integer")
    if not 0.0 <= transfer <= 1.0:
        raise ValueError("transfer must lie in [0, 1]")
    frac = Fraction(transfer).limit_denominator(10**9)
    pops = [Fraction(1, n)] * n
    for k in range(n - 1):
        moved = pops[k] * frac
        pops[k] -= moved
        pops[k + 1] += moved
    if measure == "stretched":
        return float(pops[-1])
    if measure == "polarization":
        m = [Fraction(2 * k - (n - 1), 2) for k in range(n)]
        return float(sum(p * mk for p, mk in zip(pops, m)) / Fraction(n - 1, 2))
    raise ValueError(f"unknown measure {measure!r}")


def pumped_spectrum(
    populations: GroundPopulations,
    medium: MediumConfig,
    line_choice: str = "D2",
    grid=None,
    workers: int = 1,
) -> SpectrumGrid:
    """Weak-probe spectrum with the pumped isotope's ground populations."""
    isotope = populations.states[0].isotope
    if isotope not in medium.isotope_mixture:
        raise ValueError(f"{isotope} not present in the medium")
    if abs(populations.states[0].field - medium.B) > 1e-12:
        raise ValueError("populations were solved at a different field than the medium")
    pops: Mapping[str, Sequence[float]] = dict(medium.ground_populations or {})
    pops[isotope] = populations.populations
    return transmission_spectrum(replace(medium, ground_populations=pops), line_choice, grid, workers)


def pump_rate(
    power: float,
    calibration: float,
    linewidth: float,
    detuning: float = 0.0,
    relative_strength: float = 1.0,
) -> float:
    """Optical pumping rate (1/s) of a weak, lineshape-filtered pump.

    The Rabi frequency (Hz) is ``calibration * sqrt(power * strength)``;
    the rate is (2 pi Omega)^2 / (2 pi Gamma) times a Lorentzian factor.
    """
    if power < 0 or calibration <= 0 or linewidth <= 0 or relative_strength < 0:
        raise ValueError("power, strength >= 0 and calibration, linewidth > 0 required")
    omega = calibration * math.sqrt(power * relative_strength)
    return 2 * math.pi * omega**2 / linewidth / (1 + 4 * detuning**2 / linewidth**2)


PRIMARY_PUMP = ((-0.5, 1.5), (0.5, 1.5), 1)
FORBIDDEN_PUMP = ((0.5, 0.5), (-1.5, 1.5), -1)
REPUMP = ((-0.5, 0.5), (0.5, 0.5), 1)


def three_pump_scheme(
    B: float = 1.06,
    rates: Sequence[float] = (1e6, 1e6, 1e6),
    relaxation_rate: float = 0.0,
    isotope: str = "Rb87",
    enabled: Sequence[bool] = (True, True, True),
) -> PumpScheme:
    """Primary sigma+ pump, forbidden sigma- pump and sigma+ repump on the D2 line."""
    spec = [
        (*p, r)
        for p, r, on in zip((PRIMARY_PUMP, FORBIDDEN_PUMP, REPUMP), rates, enabled)
        if on
    ]
    return PumpScheme.build(isotope, "D2", B, spec, relaxation_rate)


def transferred_fraction(populations: GroundPopulations, from_m_I: float = 0.5) -> float:
    """Fraction of the thermal population of one manifold moved out of it."""
    n_manifolds = round(2 * populations.states[0].I) + 1
    thermal = 1.0 / n_manifolds
    return (thermal - manifold_populations(populations)[from_m_I]) / thermal


def relaxation_for_transfer(
    scheme: PumpScheme,
    target: float = 0.5,
    from_m_I: float = 0.5,
    bracket: tuple[float, float] = (1e-3, 1e12),
) -> float:
    """Relaxation rate at which the scheme moves ``target`` of a manifold away."""

    def excess(log_gamma: float) -> float:
        sol = steady_state(scheme.with_rates(relaxation_rate=10.0**log_gamma))
        return transferred_fraction(sol, from_m_I) - target

    lo, hi = (math.log10(b) for b in bracket)
    if excess(lo) * excess(hi) > 0:
        raise ModelError(f"target transfer {target} not reachable within the relaxation bracket")
    return 10.0 ** brentq(excess, lo, hi, xtol=1e-12)
