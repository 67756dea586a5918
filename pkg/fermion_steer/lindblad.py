#!/bin/env python3
"""
Continuous-time limit of the steering protocol.

In the Markovian limit the two-point function stays diagonal in momentum and
its band-resolved occupations obey closed equations of motion

    dg_+/dt = -2 gamma_+ g_+ + (1 + n) sum_nu |f_{nu,+}|^2 <|f_{nu,+}|^2 g_+>
    dg_-/dt = gamma_- (n - 2 g_-) + (2 - n) sum_nu |f_{nu,-}|^2 <|f_{nu,-}|^2 g_->
    dc/dt   = -(gamma_+ + gamma_-) c

where n is the ancilla occupation, <.> the average over the momentum grid,
c the interband coherence and gamma_band = sum_nu |f_{nu,band}|^2.
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.stats import linregress

from .chern_model import DEFAULT_TAU, Band, Orbital, band_overlap
from .errors import CorruptStateError, DimensionError, GapClosedError
from .lattice import LatticeSpec, is_near_gapless

_logger = logging.getLogger(__name__)

STEP_SAFETY = 0.01
UNSTABLE_LOW = -0.1
UNSTABLE_HIGH = 1.1
FIT_FLOOR = 1e-10


class FormFactorWeights:
    """
    |f_{nu,band}(k)|^2 = tau_nu^dag P_band(k) tau_nu / Z_{nu,band} on the
    lattice momentum grid, with Z the grid average of the numerator.
    """
    def __init__(self, lattice: LatticeSpec, alpha: float, tau=None):
        self._lattice = lattice
        self._alpha = float(alpha)
        taus = DEFAULT_TAU if tau is None else tuple(np.asarray(t, dtype=np.complex128) for t in tau)
        grid = lattice.momenta()
        self._weights = {}
        self._normalizations = {}
        for band in (Band.LOWER, Band.UPPER):
            per_orbital = []
            for orbital in Orbital:
                raw = band_overlap(grid, taus[orbital], band, alpha)
                Z = float(np.mean(raw))
                if Z <= 0.0:
                    raise GapClosedError(f"form factor normalization vanishes for {orbital.name}{band.symbol}")
                self._normalizations[(int(orbital), int(band))] = Z
                per_orbital.append(raw / Z)
            self._weights[int(band)] = np.stack(per_orbital)

    @property
    def lattice(self) -> LatticeSpec:
        return self._lattice

    @property
    def alpha(self) -> float:
        return self._alpha

    @property
    def normalizations(self) -> Dict[Tuple[int, int], float]:
        return dict(self._normalizations)

    def weights(self, band: Band) -> np.ndarray:
        """Shape (2, L, L), one slice per orbital."""
        return self._weights[int(band)]

    def rates(self, band: Band) -> np.ndarray:
        """Dissipation rate gamma_band(k) summed over orbitals."""
        return np.sum(self._weights[int(band)], axis=0)


class LindbladParams:
    def __init__(self, lattice: LatticeSpec, alpha: float, n_bar: float, dt: Optional[float]=None,
                 t_max: Optional[float]=None, tau=None):
        if not 0.0 <= n_bar <= 1.0:
            raise ValueError(f"ancilla occupation must lie in [0, 1], got {n_bar}")
        if is_near_gapless(alpha):
            raise GapClosedError(f"alpha = {alpha} is gapless")
        self._lattice = lattice
        self._alpha = float(alpha)
        self._n_bar = float(n_bar)
        self._tau = tau
        self._weights = FormFactorWeights(lattice, alpha, tau)

        gamma_max = max(float(np.max(self._weights.rates(b))) for b in Band)
        dt_limit = STEP_SAFETY / gamma_max
        if dt is None:
            dt = dt_limit
        elif dt > dt_limit:
            raise ValueError(f"time step {dt} exceeds the stability limit {dt_limit:.3e}")
        self._dt = float(dt)
        self._t_max = float(t_max) if t_max is not None else 10.0 * convergence_time(self)

    @classmethod
    def from_config(cls, config) -> "LindbladParams":
        return cls(LatticeSpec(config.L), config.alpha, config.n_bar, config.dt, config.t_max)

    @property
    def lattice(self) -> LatticeSpec:
        return self._lattice

    @property
    def alpha(self) -> float:
        return self._alpha

    @property
    def n_bar(self) -> float:
        return self._n_bar

    @property
    def dt(self) -> float:
        return self._dt

    @property
    def t_max(self) -> float:
        return self._t_max

    @property
    def weights(self) -> FormFactorWeights:
        return self._weights


class BandOccupations:
    """Band-resolved occupations g_+-(k) and interband coherence c(k)."""
    def __init__(self, g_plus: np.ndarray, g_minus: np.ndarray, coherence: np.ndarray):
        g_plus = np.asarray(g_plus, dtype=float)
        g_minus = np.asarray(g_minus, dtype=float)
        coherence = np.asarray(coherence, dtype=np.complex128)
        if g_plus.shape != g_minus.shape or g_plus.shape != coherence.shape or g_plus.ndim != 2:
            raise DimensionError(f"occupation grids differ: {g_plus.shape}, {g_minus.shape}, {coherence.shape}")
        self._g_plus = g_plus
        self._g_minus = g_minus
        self._coherence = coherence

    @classmethod
    def uniform(cls, lattice: LatticeSpec, upper: float, lower: float, coherence: float=0.0) -> "BandOccupations":
        shape = (lattice.L, lattice.L)
        return cls(np.full(shape, upper), np.full(shape, lower), np.full(shape, coherence, dtype=np.complex128))

    @classmethod
    def steady_state(cls, lattice: LatticeSpec) -> "BandOccupations":
        return cls.uniform(lattice, 0.0, 1.0, 0.0)

    @property
    def g_plus(self) -> np.ndarray:
        return self._g_plus

    @property
    def g_minus(self) -> np.ndarray:
        return self._g_minus

    @property
    def coherence(self) -> np.ndarray:
        return self._coherence

    @property
    def shape(self) -> Tuple[int, int]:
        return self._g_plus.shape

    def mean_upper(self) -> float:
        return float(np.mean(self._g_plus))

    def mean_lower(self) -> float:
        return float(np.mean(self._g_minus))

    def max_coherence(self) -> float:
        return float(np.max(np.abs(self._coherence)))

    def is_stable(self) -> bool:
        for g in (self._g_plus, self._g_minus):
            if np.any(g < UNSTABLE_LOW) or np.any(g > UNSTABLE_HIGH) or not np.all(np.isfinite(g)):
                return False
        return True

    def __add__(self, other: "BandOccupations") -> "BandOccupations":
        return BandOccupations(self._g_plus + other._g_plus, self._g_minus + other._g_minus,
                               self._coherence + other._coherence)

    def __mul__(self, factor: float) -> "BandOccupations":
        return BandOccupations(factor * self._g_plus, factor * self._g_minus, factor * self._coherence)

    __rmul__ = __mul__


def eom_rhs(state: BandOccupations, params: LindbladParams) -> BandOccupations:
    """Time derivative of the band occupations; grid sums replace momentum integrals."""
    L = params.lattice.L
    if state.shape != (L, L):
        raise DimensionError(f"occupation grid {state.shape} does not match the {L}x{L} form factor grid")
    n_bar = params.n_bar
    weights = params.weights

    f_plus = weights.weights(Band.UPPER)
    f_minus = weights.weights(Band.LOWER)
    gamma_plus = np.sum(f_plus, axis=0)
    gamma_minus = np.sum(f_minus, axis=0)

    #<|f_nu|^2 g> per orbital, broadcast back over the grid
    gain_plus = np.einsum("vxy,v->xy", f_plus, np.mean(f_plus * state.g_plus, axis=(1, 2)))
    gain_minus = np.einsum("vxy,v->xy", f_minus, np.mean(f_minus * state.g_minus, axis=(1, 2)))

    d_plus = -2.0 * gamma_plus * state.g_plus + (1.0 + n_bar) * gain_plus
    d_minus = gamma_minus * (n_bar - 2.0 * state.g_minus) + (2.0 - n_bar) * gain_minus
    d_coherence = -(gamma_plus + gamma_minus) * state.coherence
    return BandOccupations(d_plus, d_minus, d_coherence)


def _rk4_step(state: BandOccupations, params: LindbladParams, dt: float) -> BandOccupations:
    k1 = eom_rhs(state, params)
    k2 = eom_rhs(state + (0.5 * dt) * k1, params)
    k3 = eom_rhs(state + (0.5 * dt) * k2, params)
    k4 = eom_rhs(state + dt * k3, params)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class LindbladSeries:
    def __init__(self, times: List[float], upper: List[float], lower: List[float],
                 coherence: List[float], final: BandOccupations):
        self._times = np.asarray(times)
        self._upper = np.asarray(upper)
        self._lower = np.asarray(lower)
        self._coherence = np.asarray(coherence)
        self._final = final

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def upper(self) -> np.ndarray:
        """Grid-averaged upper band occupation at each recorded time."""
        return self._upper

    @property
    def lower(self) -> np.ndarray:
        return self._lower

    @property
    def coherence(self) -> np.ndarray:
        """max_k |c(k)| at each recorded time."""
        return self._coherence

    @property
    def final(self) -> BandOccupations:
        return self._final

    def rows(self) -> List[tuple]:
        return list(zip(self._times.tolist(), self._upper.tolist(), self._lower.tolist(),
                        self._coherence.tolist()))


def integrate(params: LindbladParams, initial: BandOccupations, record_every: int=1) -> LindbladSeries:
    """Fixed-step RK4 from t = 0 to t_max."""
    n_steps = max(1, int(math.ceil(params.t_max / params.dt)))
    dt = params.t_max / n_steps
    _logger.debug("integrating %d RK4 steps of %.3e", n_steps, dt)

    state = initial
    times, upper, lower, coherence = [0.0], [state.mean_upper()], [state.mean_lower()], [state.max_coherence()]
    for step in range(1, n_steps + 1):
        state = _rk4_step(state, params, dt)
        if not state.is_stable():
            raise CorruptStateError(f"integration unstable at t = {step * dt:.4g}: occupations left "
                                    f"[{UNSTABLE_LOW}, {UNSTABLE_HIGH}]")
        if step % record_every == 0 or step == n_steps:
            times.append(step * dt)
            upper.append(state.mean_upper())
            lower.append(state.mean_lower())
            coherence.append(state.max_coherence())
    return LindbladSeries(times, upper, lower, coherence, state)


def convergence_time(params: LindbladParams) -> float:
    """T_conv = 1 / min_{band, k} gamma_band(k)."""
    rate = min(float(np.min(params.weights.rates(b))) for b in Band)
    if rate <= 0.0:
        raise GapClosedError(f"dissipation rate vanishes at alpha = {params.alpha}")
    return 1.0 / rate


def bound_rates(params: LindbladParams) -> Tuple[float, float]:
    """Guaranteed decay rates ((1 - n) delta_+, n delta_-) of the two band densities."""
    delta_plus = float(np.min(params.weights.rates(Band.UPPER)))
    delta_minus = float(np.min(params.weights.rates(Band.LOWER)))
    return (1.0 - params.n_bar) * delta_plus, params.n_bar * delta_minus


def bound_violation(series: LindbladSeries, params: LindbladParams) -> Tuple[float, float]:
    """Largest excess of the upper and lower densities over their exponential bounds."""
    rate_plus, rate_minus = bound_rates(params)
    t = series.times
    upper_bound = series.upper[0] * np.exp(-rate_plus * t)
    lower_bound = abs(series.lower[0] - 1.0) * np.exp(-rate_minus * t)
    return (float(np.max(series.upper - upper_bound)),
            float(np.max(np.abs(series.lower - 1.0) - lower_bound)))


def fitted_upper_rate(series: LindbladSeries) -> float:
    """
    E-folding rate of the upper density over its linear-log regime, taken
    after the first e-fold and above FIT_FLOOR. NaN when too few points.
    """
    g0 = series.upper[0]
    if g0 <= 0.0:
        return float("nan")
    mask = (series.upper <= g0 / math.e) & (series.upper > FIT_FLOOR)
    if np.count_nonzero(mask) < 3:
        return float("nan")
    fit = linregress(series.times[mask], np.log(series.upper[mask]))
    return float(-fit.slope)


class LindbladReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L: int
    alpha: float
    n_bar: float
    dt: float
    t_max: float
    convergence_time: float
    delta_plus: float
    delta_minus: float
    upper_bound_rate: float
    lower_bound_rate: float
    fitted_upper_rate: float
    upper_bound_violation: float
    lower_bound_violation: float
    final_upper: float
    final_lower: float
    final_coherence: float
    normalizations: Dict[str, float]


def summarize(series: LindbladSeries, params: LindbladParams) -> LindbladReport:
    rate_plus, rate_minus = bound_rates(params)
    upper_violation, lower_violation = bound_violation(series, params)
    names = {(int(o), int(b)): f"{o.name}{b.symbol}" for o in Orbital for b in Band}
    return LindbladReport(
        L=params.lattice.L, alpha=params.alpha, n_bar=params.n_bar, dt=params.dt, t_max=params.t_max,
        convergence_time=convergence_time(params),
        delta_plus=float(np.min(params.weights.rates(Band.UPPER))),
        delta_minus=float(np.min(params.weights.rates(Band.LOWER))),
        upper_bound_rate=rate_plus, lower_bound_rate=rate_minus,
        fitted_upper_rate=fitted_upper_rate(series),
        upper_bound_violation=upper_violation, lower_bound_violation=lower_violation,
        final_upper=float(series.upper[-1]), final_lower=float(series.lower[-1]),
        final_coherence=float(series.coherence[-1]),
        normalizations={names[key]: value for key, value in params.weights.normalizations.items()},
    )
