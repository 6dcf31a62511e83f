"""Continuous-time walks on complexes and Monte Carlo estimates of normalized traces."""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import chi2_contingency

from . import util
from .enumerations import Boundary, PhiKind, TimeChange
from .exceptions import ConfigError, DomainError, IncompatiblePhi, MissingFolding, OutOfLattice
from .geometry import FractalSpec, LatticeGraph, enumerate_lattice
from .ids import hamiltonian_spectrum
from .labeling import FoldingMap, GoodLabeling, build_folding, find_good_labeling
from .laplacian import SpectrumBundle, build_measure
from .subordination import BernsteinFunction, apply_phi

# a dead path sits on this state
DEAD = -1


@dataclass(frozen=True)
class WalkConfig:
    """Horizon, path count, seed and clock of one Monte Carlo experiment."""

    level: int
    depth: int
    horizon: float = 1.0
    paths: int = 10_000
    seed: int = 0
    time_change: TimeChange = TimeChange.none
    alpha_exp: float = 0.5
    boundary: Boundary = Boundary.neumann
    batches: int = 20
    time_steps: int = 64

    def __post_init__(self) -> None:
        """Validate the sampling parameters."""
        if self.paths < 100:  # noqa: PLR2004
            raise ConfigError(f"a trace estimate needs at least 100 paths, got {self.paths}")
        if self.horizon <= 0:
            raise ConfigError(f"the horizon must be positive, got {self.horizon}")
        if self.batches < 20:  # noqa: PLR2004
            raise ConfigError(f"standard errors need at least 20 batches, got {self.batches}")
        if self.time_change == TimeChange.stable and not 0 < self.alpha_exp < 1:
            raise ConfigError(f"the stable exponent {self.alpha_exp} is not in (0, 1)")


@dataclass(frozen=True, eq=False)
class WalkSampler:
    """Jump tables of the killed or folded walk on the vertices of K^<M>."""

    lattice: LatticeGraph
    level: int
    boundary: Boundary
    domain: np.ndarray
    targets: np.ndarray
    cumulative: np.ndarray
    rate: float
    weights: np.ndarray
    allowed: np.ndarray

    @property
    def size(self) -> int:
        """Number of vertices in the domain."""
        return len(self.domain)

    @property
    def transition(self) -> np.ndarray:
        """The jump matrix over the domain; rows of killed walks may lose mass."""
        matrix = np.zeros((self.size, self.size))
        probabilities = np.diff(self.cumulative, axis=1, prepend=0.0)
        for i in range(self.size):
            for target, p in zip(self.targets[i], probabilities[i]):
                if target != DEAD and p > 0:
                    matrix[i, target] += p
        return matrix

    def position(self, vertex: int) -> int:
        """Position of a lattice index in the domain."""
        found = np.flatnonzero(self.domain == vertex)
        if len(found) == 0:
            raise OutOfLattice(f"vertex {self.lattice.vertices[vertex]} is outside K^<{self.level}>")
        return int(found[0])

    def step(self, states: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """Move every live state by one jump; dead states stay dead."""
        result = np.full_like(states, DEAD)
        live = states != DEAD
        rows = self.cumulative[states[live]]
        choice = (uniforms[live, None] >= rows).sum(axis=1)
        choice = np.minimum(choice, rows.shape[1] - 1)
        result[live] = self.targets[states[live], choice]
        return result


def simulate_walk(
    cfg: WalkConfig, lattice: LatticeGraph, fold: Optional[FoldingMap] = None
) -> WalkSampler:
    """Build the sampler of the walk on K^<M> that the discrete generator describes."""
    spec = lattice.spec
    level = cfg.level
    measure = build_measure(lattice, level)
    domain = measure.support
    position = {int(x): i for i, x in enumerate(domain)}
    corners = set(lattice.corner_indices(level))
    if cfg.boundary == Boundary.neumann:
        if fold is None or fold.lattice is not lattice or fold.order != level:
            raise MissingFolding(f"the reflected walk on K^<{level}> needs a folding map of order {level}")
    width = max(len(lattice.neighbors[x]) for x in domain)
    targets = np.full((len(domain), width), DEAD, dtype=np.int64)
    cumulative = np.ones((len(domain), width))
    for i, x in enumerate(domain):
        around = lattice.neighbors[x]
        for j, u in enumerate(sorted(around)):
            if cfg.boundary == Boundary.neumann:
                targets[i, j] = position[int(fold.image[u])]  # type: ignore[union-attr]
            elif int(u) in position and int(u) not in corners:
                targets[i, j] = position[int(u)]
            cumulative[i, j] = (j + 1) / len(around)
    allowed = np.ones(len(domain), dtype=bool)
    if cfg.boundary == Boundary.dirichlet:
        allowed = np.array([int(x) not in corners for x in domain])
    return WalkSampler(
        lattice=lattice,
        level=level,
        boundary=cfg.boundary,
        domain=domain,
        targets=targets,
        cumulative=cumulative,
        rate=spec.generator_scale * spec.time_scale**lattice.depth,
        weights=measure.as_array,
        allowed=allowed,
    )


def sample_stable_subordinator(
    alpha_exp: float, t: float, seed: int, size: Optional[int] = None
) -> np.ndarray:
    """Draws of S_t for the subordinator with Laplace exponent lambda^alpha_exp."""
    return _stable_draws(alpha_exp, t, util.make_generator(seed), size)


def _stable_draws(
    alpha_exp: float, t: float, generator: np.random.Generator, size: Optional[int]
) -> np.ndarray:
    """Draw one-sided stable variables at time t by Chambers-Mallows-Stuck."""
    if not 0 < alpha_exp < 1:
        raise DomainError(f"the stable exponent {alpha_exp} is not in (0, 1)")
    if t < 0:
        raise DomainError(f"subordinator time {t} is negative")
    angle = np.pi * generator.random(size)
    holding = generator.exponential(1.0, size)
    a = alpha_exp
    unit = (
        np.sin(a * angle)
        / np.sin(angle) ** (1 / a)
        * (np.sin((1 - a) * angle) / holding) ** ((1 - a) / a)
    )
    return t ** (1 / a) * unit


@dataclass(frozen=True)
class TraceEstimate:
    """Batch-mean estimate of (1/N^M) Tr exp(-t H)."""

    mean: float
    stderr: float
    paths: int
    batches: int
    boundary: Boundary
    mode: str

    def z_score(self, target: float) -> float:
        """Standard errors between the estimate and a target."""
        if self.stderr == 0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / self.stderr


def _check_phi(cfg: WalkConfig, phi: BernsteinFunction) -> None:
    """Require phi to match the clock of the walk."""
    if cfg.time_change == TimeChange.none and phi.kind != PhiKind.identity:
        raise IncompatiblePhi(f"the plain walk estimates identity phi, not {phi.describe()}")
    if cfg.time_change == TimeChange.stable and (
        phi.kind != PhiKind.stable or not math.isclose(phi.exponent, cfg.alpha_exp)
    ):
        raise IncompatiblePhi(
            f"the stable({cfg.alpha_exp}) clock needs the matching stable phi, not {phi.describe()}"
        )


def _starts(sampler: WalkSampler, generator: np.random.Generator, count: int) -> np.ndarray:
    """Draw starting vertices from the measure weights."""
    return generator.choice(sampler.size, size=count, p=sampler.weights / sampler.weights.sum())


def _blackwell_batch(
    sampler: WalkSampler,
    transition: np.ndarray,
    potential: np.ndarray,
    horizon: float,
    generator: np.random.Generator,
    count: int,
) -> np.ndarray:
    """Return weights of one batch with the last jump replaced by its probability."""
    start = _starts(sampler, generator, count)
    state = start.copy()
    clock = np.zeros(count)
    integral = np.zeros(count)
    previous = np.full(count, DEAD)
    last_time = np.zeros(count)
    last_integral = np.zeros(count)
    jumps = np.zeros(count, dtype=np.int64)
    died_at = np.full(count, -1, dtype=np.int64)
    running = np.ones(count, dtype=bool)
    while running.any():
        index = np.flatnonzero(running)
        hold = generator.exponential(1 / sampler.rate, size=len(index))
        over = clock[index] + hold > horizon
        running[index[over]] = False
        index, hold = index[~over], hold[~over]
        if len(index) == 0:
            break
        current = state[index]
        live = current != DEAD
        integral[index] += np.where(live, potential[np.maximum(current, 0)], 0.0) * hold
        clock[index] += hold
        jumps[index] += 1
        previous[index] = current
        last_time[index] = clock[index]
        last_integral[index] = integral[index]
        # uniforms are drawn for dead paths too so the streams stay aligned
        moved = sampler.step(current, generator.random(len(index)))
        killed = live & (moved == DEAD)
        died_at[index[killed]] = jumps[index[killed]]
        state[index] = moved
    weight = sampler.weights[start]
    result = np.exp(-potential[start] * horizon) / weight
    jumped = jumps > 0
    usable = jumped & ((died_at < 0) | (died_at == jumps))
    before = np.maximum(previous, 0)
    tail = np.exp(-potential[start] * (horizon - last_time))
    blended = np.exp(-last_integral) * transition[before, start] * tail / weight
    result = np.where(jumped, np.where(usable, blended, 0.0), result)
    return np.where(sampler.allowed[start], result, 0.0)


def _kernel_rows(
    spectrum: SpectrumBundle, states: np.ndarray, durations: np.ndarray
) -> np.ndarray:
    """Rows of exp(-s G) for each live state and its own duration s."""
    vectors = spectrum.symmetric_vectors
    root = np.sqrt(spectrum.weights)
    decay = np.exp(-np.outer(durations, np.clip(spectrum.eigenvalues, 0.0, None)))
    rows = (vectors[states] * decay) @ vectors.T
    rows = rows * root[None, :] / root[states][:, None]
    return np.clip(rows, 0.0, None)


def _subordinated_batch(
    sampler: WalkSampler,
    spectrum: SpectrumBundle,
    positions: np.ndarray,
    potential: np.ndarray,
    cfg: WalkConfig,
    generator: np.random.Generator,
    count: int,
) -> np.ndarray:
    """Return indicators of a walk run on subordinator time over a uniform grid."""
    start = _starts(sampler, generator, count)
    # the spectrum lives on the operator support, which may drop corners
    state = positions[start]
    integral = np.zeros(count)
    delta = cfg.horizon / cfg.time_steps
    for _ in range(cfg.time_steps):
        live = state != DEAD
        integral += np.where(live, potential[np.maximum(state, 0)], 0.0) * delta
        index = np.flatnonzero(live)
        if len(index) == 0:
            break
        durations = _stable_draws(cfg.alpha_exp, delta, generator, len(index))
        rows = _kernel_rows(spectrum, state[index], durations)
        edges = np.cumsum(rows, axis=1)
        uniforms = generator.random(len(index))
        choice = (uniforms[:, None] >= edges).sum(axis=1)
        state[index] = np.where(choice < rows.shape[1], choice, DEAD)
    weight = sampler.weights[start]
    hit = state == positions[start]
    result = np.where(hit & (state != DEAD), np.exp(-integral) / weight, 0.0)
    return np.where(sampler.allowed[start], result, 0.0)


def estimate_trace(
    cfg: WalkConfig,
    sampler: WalkSampler,
    phi: BernsteinFunction,
    potential: Optional[np.ndarray] = None,
    spectrum: Optional[SpectrumBundle] = None,
    mode: str = "free",
) -> TraceEstimate:
    """Estimate (1/N^M) Tr exp(-t (phi(-L) + V)) from measure-weighted starts."""
    _check_phi(cfg, phi)
    values = np.zeros(sampler.size) if potential is None else np.asarray(potential, dtype=float)
    if values.shape != (sampler.size,):
        raise ValueError(f"potential has shape {values.shape}, the walk has {sampler.size} vertices")
    per_batch = math.ceil(cfg.paths / cfg.batches)
    means = []
    if cfg.time_change == TimeChange.none:
        transition = sampler.transition
        for batch in range(cfg.batches):
            generator = util.make_generator(cfg.seed, batch)
            means.append(
                _blackwell_batch(sampler, transition, values, cfg.horizon, generator, per_batch).mean()
            )
    else:
        if spectrum is None:
            raise ValueError("the subordinated walk needs the spectrum of the generator")
        positions = np.full(sampler.size, DEAD, dtype=np.int64)
        support = {int(x): i for i, x in enumerate(spectrum.support)}
        for i, x in enumerate(sampler.domain):
            positions[i] = support.get(int(x), DEAD)
        local = np.zeros(len(spectrum.support))
        for i, x in enumerate(sampler.domain):
            if positions[i] != DEAD:
                local[positions[i]] = values[i]
        for batch in range(cfg.batches):
            generator = util.make_generator(cfg.seed, batch)
            means.append(
                _subordinated_batch(sampler, spectrum, positions, local, cfg, generator, per_batch).mean()
            )
    means_array = np.array(means)
    return TraceEstimate(
        mean=float(means_array.mean()),
        stderr=float(means_array.std(ddof=1) / math.sqrt(cfg.batches)),
        paths=per_batch * cfg.batches,
        batches=cfg.batches,
        boundary=sampler.boundary,
        mode=mode,
    )


def spectral_trace(
    spectrum: SpectrumBundle,
    phi: BernsteinFunction,
    horizon: float,
    num_maps: int,
    potential: Optional[np.ndarray] = None,
) -> float:
    """The same normalized trace from the eigenvalues."""
    values = (
        np.sort(apply_phi(spectrum, phi))
        if potential is None
        else hamiltonian_spectrum(spectrum, phi, np.asarray(potential, dtype=float))
    )
    return float(np.exp(-horizon * values).sum() / float(num_maps) ** spectrum.level)


def one_step_frequencies(
    sampler: WalkSampler, vertex: int, jumps: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Observed one-step target frequencies from a vertex and the jump probabilities."""
    generator = util.make_generator(seed)
    i = sampler.position(vertex)
    moved = sampler.step(np.full(jumps, i), generator.random(jumps))
    row = sampler.transition[i]
    observed = np.array([np.mean(moved == j) for j in range(sampler.size)])
    return observed, row


def survival_fraction(
    sampler: WalkSampler, vertex: int, horizon: float, paths: int, seed: int
) -> Tuple[float, float]:
    """Empirical survival of the killed walk from a vertex and its exact value."""
    generator = util.make_generator(seed)
    state = _run_states(sampler, np.full(paths, sampler.position(vertex)), horizon, generator)
    generator_matrix = sampler.rate * (np.eye(sampler.size) - sampler.transition)
    exact = linalg.expm(-horizon * generator_matrix).sum(axis=1)[sampler.position(vertex)]
    return float(np.mean(state != DEAD)), float(exact)


def _run_states(
    sampler: WalkSampler, state: np.ndarray, horizon: float, generator: np.random.Generator
) -> np.ndarray:
    """Run each walk until its clock passes the horizon."""
    state = state.copy()
    clock = np.zeros(len(state))
    running = np.ones(len(state), dtype=bool)
    while running.any():
        index = np.flatnonzero(running)
        clock[index] += generator.exponential(1 / sampler.rate, size=len(index))
        over = clock[index] > horizon
        running[index[over]] = False
        index = index[~over]
        if len(index):
            state[index] = sampler.step(state[index], generator.random(len(index)))
    return state


@dataclass(frozen=True)
class OccupationReport:
    """Chi-square comparison of a folded free walk with the reflected walk."""

    statistic: float
    p_value: float
    counts: Dict[str, Tuple[int, int]]


def folding_occupation_test(
    spec: FractalSpec,
    level: int,
    depth: int,
    horizon: float,
    paths: int,
    seed: int,
) -> OccupationReport:
    """Push the walk reflected on K^<M+1> through pi_M and compare with the walk on K^<M>."""
    lattice = enumerate_lattice(spec, level + 2, depth)
    folds = []
    for order in (level, level + 1):
        labeling = find_good_labeling(lattice, order)
        if not isinstance(labeling, GoodLabeling):
            raise MissingFolding(labeling.describe())
        folds.append(build_folding(labeling))
    coarse, fine = folds
    small = simulate_walk(WalkConfig(level=level, depth=depth, seed=seed), lattice, coarse)
    large = simulate_walk(WalkConfig(level=level + 1, depth=depth, seed=seed), lattice, fine)
    origin = lattice.corner_indices(level)[0]
    first = _run_states(
        small, np.full(paths, small.position(origin)), horizon, util.make_generator(seed, 0)
    )
    second = _run_states(
        large, np.full(paths, large.position(origin)), horizon, util.make_generator(seed, 1)
    )
    folded = coarse.image[large.domain[second]]
    direct = small.domain[first]
    vertices = np.union1d(folded, direct)
    table = np.array(
        [[np.sum(direct == v) for v in vertices], [np.sum(folded == v) for v in vertices]]
    )
    statistic, p_value, _, _ = chi2_contingency(table)
    return OccupationReport(
        statistic=float(statistic),
        p_value=float(p_value),
        counts={
            str(lattice.vertices[v]): (int(a), int(b))
            for v, a, b in zip(vertices, table[0], table[1])
        },
    )
