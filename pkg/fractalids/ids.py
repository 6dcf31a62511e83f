"""Counting measures, Laplace curves, disorder ensembles and Lifschitz-tail analysis."""

import math
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.optimize import root_scalar
from scipy.special import logsumexp

from . import util
from .enumerations import Boundary, PotentialMode, Verdict
from .exceptions import (
    DegenerateLaw,
    DomainError,
    EmptyWindow,
    GateFailure,
    PreconditionMNotReached,
)
from .geometry import DEFAULT_SIZE_CAP, FractalSpec, common_level_matrix
from .labeling import FoldingMap
from .laplacian import (
    DENSE_CAP,
    DiscreteLaplacian,
    SpectrumBundle,
    build_laplacian,
    build_measure,
    eigendecompose,
    folded_setup,
)
from .potential import (
    DisorderLaw,
    DisorderSample,
    SingleSiteProfile,
    integrability,
    potential_on,
    profile_from_spec,
    sample_disorder,
)
from .subordination import BernsteinFunction, apply_phi, eval_phi, schrodinger_matrix

SpectrumSource = Callable[[DiscreteLaplacian], SpectrumBundle]

# tolerance below which a computed ordering or margin still counts as holding
ORDER_TOLERANCE = 1e-12

# a tail verdict needs its finite ratios to span this factor in lambda
MIN_WINDOW_SPAN = 10.0


@dataclass(frozen=True)
class CountingMeasure:
    """The normalized eigenvalue counting function of one finite-volume operator."""

    boundary: Boundary
    level: int
    eigenvalues: np.ndarray
    volume: float

    def __call__(self, lam: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Evaluate the counting function at lam."""
        counts = np.searchsorted(self.eigenvalues, np.asarray(lam, dtype=float), side="right")
        result = counts / self.volume
        return float(result) if np.ndim(result) == 0 else result

    @property
    def total(self) -> float:
        """Limit of the counting function at infinity."""
        return len(self.eigenvalues) / self.volume


def counting_measure(
    eigenvalues: Sequence[float], level: int, boundary: Boundary, num_maps: int
) -> CountingMeasure:
    """Counting function normalized by the mass N^M of K^<M>."""
    return CountingMeasure(
        boundary=boundary,
        level=level,
        eigenvalues=np.sort(np.asarray(eigenvalues, dtype=float)),
        volume=float(num_maps) ** level,
    )


@dataclass(frozen=True)
class LaplaceCurve:
    """Laplace transform of a counting measure on a grid of times."""

    t: np.ndarray
    values: np.ndarray
    variance: Optional[np.ndarray] = None
    count: int = 1

    def is_completely_monotone(self, tolerance: float = 1e-10) -> bool:
        """Positive, decreasing and convex on the grid."""
        slopes = np.diff(self.values) / np.diff(self.t)
        return bool(
            np.all(self.values > 0)
            and np.all(slopes <= tolerance)
            and np.all(np.diff(slopes) >= -tolerance)
        )


def laplace_transform(cm: CountingMeasure, t_grid: Sequence[float]) -> LaplaceCurve:
    """The normalized trace (1/N^M) sum_k exp(-lambda_k t) on a grid of t > 0."""
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise DomainError("the Laplace transform is evaluated at t > 0 only")
    if len(cm.eigenvalues) == 0:
        return LaplaceCurve(t=t, values=np.zeros_like(t))
    # shift by the ground eigenvalue through logsumexp
    exponents = -np.outer(t, cm.eigenvalues)
    values = np.exp(logsumexp(exponents, axis=1) - math.log(cm.volume))
    return LaplaceCurve(t=t, values=values)


@dataclass(frozen=True)
class RateFunctions:
    """The truncation level D_0 and the rate functions g, j, x_t and h of a law."""

    law: DisorderLaw
    d0: float
    c1_tilde: float
    hausdorff_dim: float
    alpha: float
    lambda_0: float
    d0_interval: Tuple[float, float]

    @property
    def x_low(self) -> float:
        """Smallest x at which the rate functions are defined."""
        return (self.d0 / self.lambda_0) ** (1 / self.alpha)

    @property
    def t0(self) -> float:
        """Lower end of the t range, j(x_low)."""
        return float(self.j(self.x_low))

    def g(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """log(1 / F(D_0 / x))."""
        cdf = np.asarray(self.law.cdf(self.d0 / np.asarray(x, dtype=float)))
        with np.errstate(divide="ignore"):
            return -np.log(cdf)

    def j(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """x^(d_f + alpha) g(x^alpha)."""
        x = np.asarray(x, dtype=float)
        return x ** (self.hausdorff_dim + self.alpha) * self.g(x**self.alpha)

    def x_t(self, t: float) -> float:
        """Inverse of j on [x_low, inf) by bracketed root finding."""
        if t < self.t0:
            raise DomainError(f"x_t is defined for t >= t0 = {self.t0:.6e}, got {t}")
        low = self.x_low
        if float(self.j(low)) == t:
            return low
        high = 2 * low
        while float(self.j(high)) < t:
            high *= 2
        solution = root_scalar(
            lambda x: float(self.j(x)) - t,
            bracket=(low, high),
            method="brentq",
            xtol=1e-300,
            rtol=4 * np.finfo(float).eps,
        )
        return float(solution.root)

    def h(self, t: float) -> float:
        """Rate h(t) = g(x_t^alpha)."""
        return float(self.g(self.x_t(t) ** self.alpha))


def rate_functions(
    law: DisorderLaw,
    floor: float,
    vertex_constant: float,
    max_rank: float,
    hausdorff_dim: float,
    alpha: float,
    walk_dim: float,
    c1: float,
    mu2: float,
    lambda_0: float,
    mu2_spread: float = 0.0,
) -> RateFunctions:
    """D_0 = c1 mu_2^(alpha/d_w) / (4 A_0 C_0 r_0) and the rate functions built on it."""
    c1_tilde = c1 * mu2 ** (alpha / walk_dim)
    d0 = c1_tilde / (4 * floor * vertex_constant * max_rank)
    interval = tuple(
        c1 * max(value, 0.0) ** (alpha / walk_dim) / (4 * floor * vertex_constant * max_rank)
        for value in (mu2 - mu2_spread, mu2 + mu2_spread)
    )
    rates = RateFunctions(
        law=law,
        d0=d0,
        c1_tilde=c1_tilde,
        hausdorff_dim=hausdorff_dim,
        alpha=alpha,
        lambda_0=lambda_0,
        d0_interval=(float(min(interval)), float(max(interval))),
    )
    grid = rates.x_low * np.geomspace(1.0, 1e6, 200)
    if not np.any(rates.g(grid**alpha) > 0):
        raise DegenerateLaw(f"F(D_0 / x^alpha) = 1 on the whole grid for D_0 = {d0:.6e}")
    return rates


def temple_bound(hamiltonian: np.ndarray, psi: np.ndarray, mu: float) -> float:
    """Temple's lower bound on the ground eigenvalue from a normalized trial vector."""
    psi = np.asarray(psi, dtype=float)
    psi = psi / np.linalg.norm(psi)
    image = hamiltonian @ psi
    a = float(psi @ image)
    b = float(image @ image)
    if mu - a <= ORDER_TOLERANCE * max(1.0, abs(mu)):
        raise ValueError(f"mu = {mu} must exceed the trial energy {a}")
    return a - (b - a * a) / (mu - a)


def least_level(
    spec: FractalSpec,
    phi: BernsteinFunction,
    c1_tilde: float,
    alpha: float,
    second_eigenvalues: Mapping[int, float],
) -> Optional[int]:
    """Least M with c1_tilde L^(-M alpha) < phi(mu_2 of K^<M>)."""
    for level in sorted(second_eigenvalues):
        threshold = c1_tilde * spec.scale ** (-level * alpha)
        if threshold < float(eval_phi(phi, max(second_eigenvalues[level], 0.0))):
            return level
    return None


def richardson_limit(values: Sequence[float]) -> Tuple[float, float]:
    """Aitken extrapolation of the last three terms of a sequence, with its spread."""
    if len(values) < 3:  # noqa: PLR2004
        last = float(values[-1])
        spread = abs(last - float(values[-2])) if len(values) == 2 else 0.0  # noqa: PLR2004
        return last, spread
    x0, x1, x2 = (float(v) for v in values[-3:])
    denominator = x2 - 2 * x1 + x0
    if abs(denominator) < 1e-15:
        return x2, abs(x2 - x1)
    limit = x2 - (x2 - x1) ** 2 / denominator
    return limit, abs(limit - x2)


@dataclass(frozen=True)
class TempleReport:
    """One comparison of the computed ground state with the Temple lower bound."""

    level: int
    sample: int
    lhs: float
    rhs: float
    margin: float

    @property
    def holds(self) -> bool:
        """True when the bound stays below the eigenvalue."""
        return self.margin >= -ORDER_TOLERANCE


def temple_check(
    operator: DiscreteLaplacian,
    spectrum: SpectrumBundle,
    sample: DisorderSample,
    phi: BernsteinFunction,
    profile: SingleSiteProfile,
    rate: RateFunctions,
    fold: FoldingMap,
    least: Optional[int],
) -> TempleReport:
    """Compare lambda_1 of phi(-L) + V_M with the lower bound from truncated couplings."""
    level = operator.level
    if least is None or level < least:
        raise PreconditionMNotReached(
            f"K^<{level}> is below M_2 = {least}; the lower bound needs M >= M_2"
        )
    lattice = operator.lattice
    spec = lattice.spec
    profile = profile_from_spec(profile, spec)
    sites = lattice.grid_sites(level)
    position = {int(site): i for i, site in enumerate(sample.sites)}
    couplings = np.array([sample.values[position[int(site)]] for site in sites])
    cap = rate.d0 * spec.scale ** (-level * rate.alpha)
    truncated = np.minimum(couplings, cap)
    near = common_level_matrix(lattice, operator.support, sites) <= profile.floor_level
    reduced = profile.floor_value * (near.astype(float) @ truncated)
    volume = float(spec.num_maps) ** level
    a = float(np.dot(operator.weights, reduced) / volume)
    b = float(np.dot(operator.weights, reduced**2) / volume)
    rhs = a - 2 * b / (rate.c1_tilde * spec.scale ** (-level * rate.alpha))
    potential = potential_on(profile, sample, operator.support, PotentialMode.periodized, fold)
    if np.all(potential == 0):
        lhs = float(eval_phi(phi, max(float(spectrum.eigenvalues[0]), 0.0)))
    else:
        lhs = float(linalg.eigvalsh(schrodinger_matrix(spectrum, phi, potential))[0])
    return TempleReport(level=level, sample=sample.sample, lhs=lhs, rhs=rhs, margin=lhs - rhs)


@dataclass(frozen=True)
class EnsembleSettings:
    """Everything an ensemble of disordered operators depends on."""

    spec: FractalSpec
    levels: Tuple[int, ...]
    depth: int
    phi: BernsteinFunction
    profile: SingleSiteProfile
    law: DisorderLaw
    samples: int
    seed: int
    t_grid: Tuple[float, ...]
    lambda_grid: Tuple[float, ...]
    boundaries: Tuple[Boundary, ...] = (Boundary.dirichlet, Boundary.neumann)
    modes: Tuple[PotentialMode, ...] = (PotentialMode.periodized,)
    workers: int = 1
    cap: int = DEFAULT_SIZE_CAP
    dense_cap: int = DENSE_CAP


@dataclass
class LevelContext:
    """The region, folding and spectra shared by every sample at one level."""

    level: int
    fold: FoldingMap
    operators: Dict[Boundary, DiscreteLaplacian]
    spectra: Dict[Boundary, SpectrumBundle]


@dataclass(frozen=True)
class MemberResult:
    """Spectral summaries of one sample at one level in one potential mode."""

    level: int
    mode: PotentialMode
    sample: int
    laplace: Dict[Boundary, np.ndarray]
    counting: Dict[Boundary, np.ndarray]
    ground: Dict[Boundary, float]
    moments: Tuple[float, float]
    eigenvalues: Dict[Boundary, np.ndarray] = field(default_factory=dict)
    volume: float = 1.0


@dataclass
class EnsembleStatistics:
    """Means and spreads over the samples of one (M, boundary, mode)."""

    level: int
    boundary: Boundary
    mode: PotentialMode
    laplace_mean: np.ndarray
    laplace_variance: np.ndarray
    counting_mean: np.ndarray
    counting_stderr: np.ndarray
    count: int

    @property
    def laplace_stderr(self) -> np.ndarray:
        """Standard error of the mean Laplace transform."""
        return np.sqrt(self.laplace_variance / self.count)


@dataclass
class EnsembleResult:
    """Statistics, per-sample members and the reductions across levels."""

    settings: EnsembleSettings
    statistics: Dict[Tuple[int, Boundary, PotentialMode], EnsembleStatistics]
    members: List[MemberResult]
    contexts: Dict[int, LevelContext] = field(default_factory=dict)

    def of(self, level: int, boundary: Boundary, mode: PotentialMode) -> EnsembleStatistics:
        """Statistics of one level, boundary and mode."""
        return self.statistics[(level, boundary, mode)]

    def counting_on(
        self, level: int, boundary: Boundary, mode: PotentialMode, lambdas: Sequence[float]
    ) -> np.ndarray:
        """Mean counting function of one group on an arbitrary grid."""
        lam = np.asarray(lambdas, dtype=float)
        rows = [
            np.searchsorted(m.eigenvalues[boundary], lam, side="right") / m.volume
            for m in self.members
            if m.level == level and m.mode == mode and boundary in m.eigenvalues
        ]
        if not rows:
            raise EmptyWindow(f"no spectra were kept for M = {level}, {boundary.value}, {mode.value}")
        return np.mean(rows, axis=0)

    def fit_window(
        self,
        level: int,
        boundary: Boundary,
        mode: PotentialMode,
        span: float = MIN_WINDOW_SPAN,
        points: int = 9,
    ) -> np.ndarray:
        """Geometric grid from the lowest sampled ground state up by a factor of span.

        Zero ground states are skipped; the mean counting function is
        positive on the whole grid.
        """
        grounds = [
            m.ground[boundary]
            for m in self.members
            if m.level == level and m.mode == mode and boundary in m.ground
        ]
        lowest = min((g for g in grounds if g > 0), default=math.inf)
        if not math.isfinite(lowest):
            raise EmptyWindow(f"the lowest ground state {lowest} does not start a window")
        return np.geomspace(lowest, lowest * span, points)

    def ordering_holds(self) -> bool:
        """Check N^D <= N^N and Lambda^D <= Lambda^N on every member."""
        for member in self.members:
            if Boundary.dirichlet not in member.laplace or Boundary.neumann not in member.laplace:
                continue
            if np.any(member.laplace[Boundary.dirichlet] > member.laplace[Boundary.neumann] * (1 + ORDER_TOLERANCE)):
                return False
            if np.any(member.counting[Boundary.dirichlet] > member.counting[Boundary.neumann] + ORDER_TOLERANCE):
                return False
        return True

    def gap_table(self, mode: PotentialMode) -> Dict[int, np.ndarray]:
        """Mean of (Lambda^D - Lambda^N)^2 over samples, per level."""
        table: Dict[int, List[np.ndarray]] = {}
        for member in self.members:
            if member.mode != mode or len(member.laplace) < 2:  # noqa: PLR2004
                continue
            gap = member.laplace[Boundary.dirichlet] - member.laplace[Boundary.neumann]
            table.setdefault(member.level, []).append(gap**2)
        return {level: np.mean(gaps, axis=0) for level, gaps in sorted(table.items())}

    def convergence_table(
        self, boundary: Boundary, mode: PotentialMode
    ) -> List[Dict[str, object]]:
        """Differences of the mean Laplace curves between consecutive levels, within two pooled errors."""
        levels = sorted(
            level for level, b, m in self.statistics if b == boundary and m == mode
        )
        rows = []
        for first, second in zip(levels, levels[1:]):
            a = self.of(first, boundary, mode)
            b = self.of(second, boundary, mode)
            delta = b.laplace_mean - a.laplace_mean
            pooled = np.sqrt(a.laplace_stderr**2 + b.laplace_stderr**2)
            rows.append(
                {
                    "from": first,
                    "to": second,
                    "delta": delta,
                    "pooled_stderr": pooled,
                    "nonincreasing": bool(np.all(delta <= 2 * pooled + ORDER_TOLERANCE)),
                    "nondecreasing": bool(np.all(delta >= -2 * pooled - ORDER_TOLERANCE)),
                }
            )
        return rows

    def integrability(self) -> Dict[Tuple[int, PotentialMode], Tuple[float, float]]:
        """Mean over samples of the averages of V and V^2."""
        table: Dict[Tuple[int, PotentialMode], List[Tuple[float, float]]] = {}
        for member in self.members:
            table.setdefault((member.level, member.mode), []).append(member.moments)
        return {
            key: (float(np.mean([m[0] for m in rows])), float(np.mean([m[1] for m in rows])))
            for key, rows in sorted(table.items())
        }


def prepare_level(
    settings: EnsembleSettings,
    level: int,
    spectrum_source: Optional[SpectrumSource] = None,
) -> LevelContext:
    """Fold the region K^<M+1> and diagonalize the operators of K^<M>."""
    lattice, fold = folded_setup(settings.spec, level, settings.depth, settings.cap)
    measure = build_measure(lattice, level)
    operators: Dict[Boundary, DiscreteLaplacian] = {}
    spectra: Dict[Boundary, SpectrumBundle] = {}
    for boundary in settings.boundaries:
        operator = build_laplacian(
            lattice, measure, boundary, fold if boundary == Boundary.neumann else None
        )
        operators[boundary] = operator
        if spectrum_source is None:
            spectra[boundary] = eigendecompose(operator, settings.dense_cap)
        else:
            spectra[boundary] = spectrum_source(operator)
    return LevelContext(level=level, fold=fold, operators=operators, spectra=spectra)


def hamiltonian_spectrum(
    spectrum: SpectrumBundle, phi: BernsteinFunction, potential: np.ndarray
) -> np.ndarray:
    """Sorted eigenvalues of phi(-L) + V."""
    if np.all(potential == 0):
        return np.sort(apply_phi(spectrum, phi))
    return linalg.eigvalsh(schrodinger_matrix(spectrum, phi, potential))


def run_member(
    settings: EnsembleSettings,
    context: LevelContext,
    mode: PotentialMode,
    sample: DisorderSample,
) -> MemberResult:
    """Spectra of every boundary for one sample of the couplings."""
    profile = profile_from_spec(settings.profile, settings.spec)
    volume = float(settings.spec.num_maps) ** context.level
    laplace: Dict[Boundary, np.ndarray] = {}
    counting: Dict[Boundary, np.ndarray] = {}
    ground: Dict[Boundary, float] = {}
    eigenvalues: Dict[Boundary, np.ndarray] = {}
    moments = (0.0, 0.0)
    for boundary, operator in context.operators.items():
        potential = potential_on(profile, sample, operator.support, mode, context.fold)
        values = hamiltonian_spectrum(context.spectra[boundary], settings.phi, potential)
        measure = CountingMeasure(boundary, context.level, values, volume)
        laplace[boundary] = laplace_transform(measure, settings.t_grid).values
        counting[boundary] = np.asarray(measure(np.asarray(settings.lambda_grid)))
        ground[boundary] = float(values[0]) if len(values) else math.inf
        eigenvalues[boundary] = values
        if boundary == Boundary.neumann:
            moments = integrability(potential, operator.weights)
    return MemberResult(
        level=context.level,
        mode=mode,
        sample=sample.sample,
        laplace=laplace,
        counting=counting,
        ground=ground,
        moments=moments,
        eigenvalues=eigenvalues,
        volume=volume,
    )


def ensemble_run(
    settings: EnsembleSettings,
    gates: Optional[Mapping[str, bool]] = None,
    spectrum_source: Optional[SpectrumSource] = None,
    contexts: Optional[Dict[int, LevelContext]] = None,
) -> EnsembleResult:
    """Sample the couplings and summarize the spectra of every level, boundary and mode."""
    for name, passed in sorted((gates or {}).items()):
        if not passed:
            raise GateFailure(name)
    if settings.samples < 2:  # noqa: PLR2004
        raise ValueError("an ensemble needs at least two samples")
    contexts = dict(contexts or {})
    for level in settings.levels:
        if level not in contexts:
            contexts[level] = prepare_level(settings, level, spectrum_source)
    tasks = [
        (level, mode, s)
        for level in sorted(settings.levels)
        for mode in settings.modes
        for s in range(settings.samples)
    ]

    def work(task: Tuple[int, PotentialMode, int]) -> MemberResult:
        """Sample and diagonalize one ensemble member."""
        level, mode, s = task
        context = contexts[level]
        sample = sample_disorder(settings.law, context.fold.lattice, settings.seed, s)
        return run_member(settings, context, mode, sample)

    # imap keeps task order, so the reduction does not depend on the workers
    with ThreadPool(max(settings.workers, 1)) as pool:
        members = list(pool.imap(work, tasks))
    statistics: Dict[Tuple[int, Boundary, PotentialMode], EnsembleStatistics] = {}
    for level in sorted(settings.levels):
        for mode in settings.modes:
            group = [m for m in members if m.level == level and m.mode == mode]
            for boundary in settings.boundaries:
                curves = np.array([m.laplace[boundary] for m in group])
                counts = np.array([m.counting[boundary] for m in group])
                statistics[(level, boundary, mode)] = EnsembleStatistics(
                    level=level,
                    boundary=boundary,
                    mode=mode,
                    laplace_mean=curves.mean(axis=0),
                    laplace_variance=curves.var(axis=0, ddof=1),
                    counting_mean=counts.mean(axis=0),
                    counting_stderr=counts.std(axis=0, ddof=1) / math.sqrt(len(group)),
                    count=len(group),
                )
    return EnsembleResult(
        settings=settings, statistics=statistics, members=members, contexts=contexts
    )


@dataclass(frozen=True)
class LifschitzFit:
    """Normalized tail ratios over a window and the verdict drawn from them."""

    lambdas: np.ndarray
    counting: np.ndarray
    ratio_r: np.ndarray
    times: np.ndarray
    ratio_s: np.ndarray
    slope: Optional[float]
    verdict: Verdict
    radius: float

    @property
    def r_band(self) -> Tuple[float, float]:
        """Smallest and largest finite ratio of the upper fit."""
        finite = self.ratio_r[np.isfinite(self.ratio_r)]
        return float(finite.min()), float(finite.max())

    @property
    def s_band(self) -> Optional[Tuple[float, float]]:
        """Smallest and largest finite ratio of the lower fit, if any."""
        finite = self.ratio_s[np.isfinite(self.ratio_s)]
        if len(finite) == 0:
            return None
        return float(finite.min()), float(finite.max())


def window_spans(lambdas: np.ndarray, span: float = MIN_WINDOW_SPAN) -> bool:
    """Whether at least two points cover a factor of span in lambda."""
    if len(lambdas) < 2:  # noqa: PLR2004
        return False
    return bool(lambdas.max() >= span * lambdas.min() * (1 - 1e-9))


def lifschitz_fit(
    lambdas: Sequence[float],
    counting: Sequence[float],
    times: Sequence[float],
    laplace: Sequence[float],
    rate: RateFunctions,
    radius: Optional[float] = None,
) -> LifschitzFit:
    """Ratios lambda^(d/alpha) log N(lambda) / g(R/lambda) and the Laplace analogue.

    Points where the counting function vanishes carry no information and are
    dropped. A ratio whose magnitude decays like a positive power of lambda
    shows a Weyl-type count; a negative bounded ratio is a Lifschitz band.
    Either verdict needs finite ratios across a decade of lambda, otherwise
    the fit is inconclusive.
    """
    lam = np.asarray(lambdas, dtype=float)
    values = np.asarray(counting, dtype=float)
    if not np.any(values > 0):
        raise EmptyWindow("the counting function is zero on the whole window")
    radius = rate.d0 if radius is None else radius
    d, alpha = rate.hausdorff_dim, rate.alpha
    keep = values > 0
    lam, values = lam[keep], values[keep]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_r = lam ** (d / alpha) * np.log(values) / rate.g(radius / lam)
    t = np.asarray(times, dtype=float)
    curve = np.asarray(laplace, dtype=float)
    usable = (t >= rate.t0) & (curve > 0)
    ratio_s = np.array(
        [
            math.log(v) / (s ** (d / (d + alpha)) * rate.h(s) ** (alpha / (d + alpha)))
            if rate.h(s) > 0
            else math.nan
            for s, v in zip(t[usable], curve[usable])
        ]
    )
    finite = np.isfinite(ratio_r) & (ratio_r != 0)
    slope = None
    if np.sum(finite) >= 2:  # noqa: PLR2004
        slope = float(np.polyfit(np.log(lam[finite]), np.log(np.abs(ratio_r[finite])), 1)[0])
    if not window_spans(lam[finite]):
        verdict = Verdict.inconclusive
    elif slope is not None and slope > d / (2 * alpha):
        verdict = Verdict.no_tail
    elif np.all(np.isfinite(ratio_r)) and np.all(ratio_r < 0):
        verdict = Verdict.band
    else:
        verdict = Verdict.inconclusive
    return LifschitzFit(
        lambdas=lam,
        counting=values,
        ratio_r=ratio_r,
        times=t[usable],
        ratio_s=ratio_s,
        slope=slope,
        verdict=verdict,
        radius=radius,
    )


def binomial_tail_bound(n: int, p: float, gamma: float) -> float:
    """Bound ((1-p)/(1-gamma))^((1-gamma) n) (p/gamma)^(gamma n) on P(S_n >= gamma n)."""
    if not 0 < p < gamma <= 1:
        raise DomainError(f"the bound needs 0 < p < gamma <= 1, got p={p}, gamma={gamma}")
    log_bound = gamma * n * math.log(p / gamma)
    if gamma < 1:
        log_bound += (1 - gamma) * n * math.log((1 - p) / (1 - gamma))
    return math.exp(log_bound)


@dataclass(frozen=True)
class BinomialRow:
    """Empirical tail of one (n, p, gamma) cell against the bound."""

    n: int
    p: float
    gamma: float
    empirical: float
    stderr: float
    bound: float

    @property
    def within(self) -> bool:
        """True when the empirical tail is within three standard errors of the bound."""
        return self.empirical <= self.bound + 3 * self.stderr


def binomial_tail_check(
    grid: Sequence[Tuple[int, float, float]], draws: int = 10_000, seed: int = 0
) -> List[BinomialRow]:
    """Simulate binomial sums on every cell of a grid and compare with the bound."""
    rows = []
    for index, (n, p, gamma) in enumerate(grid):
        generator = util.make_generator(seed, index)
        sums = generator.binomial(n, p, size=draws)
        empirical = float(np.mean(sums >= gamma * n))
        rows.append(
            BinomialRow(
                n=n,
                p=p,
                gamma=gamma,
                empirical=empirical,
                stderr=math.sqrt(empirical * (1 - empirical) / draws),
                bound=binomial_tail_bound(n, p, gamma),
            )
        )
    return rows
