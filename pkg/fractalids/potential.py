"""Single-site profiles, disorder laws, alloy fields and the (W)/(Q) checks."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import util
from .enumerations import LawKind, PotentialMode, ProfileKind
from .exceptions import ConfigError, MissingFolding, OutOfLattice
from .geometry import (
    DEFAULT_SIZE_CAP,
    POINT_TOLERANCE,
    FractalSpec,
    LatticeGraph,
    VertexId,
    common_level_matrix,
    enumerate_lattice,
    pad_word,
    point_in_polygon,
)
from .labeling import FoldingMap, GoodLabeling, build_folding, find_good_labeling

# relative tolerance when two truncated sums are compared
SUM_TOLERANCE = 1e-12

# number of shells summed by the analytic tail bound
TAIL_SHELLS = 80


@dataclass(frozen=True)
class SingleSiteProfile:
    """A profile W(x, v) that depends on the least common cell level f(x, v)."""

    kind: ProfileKind = ProfileKind.finite_range
    decay: float = 2.0
    table: Optional[Tuple[float, ...]] = None
    zero_at_vertices: bool = False
    base: float = 4.0
    amplitude: float = 1.0
    range_level: int = 1
    floor: Optional[float] = None
    floor_level: int = -1
    num_maps: int = 3

    def __post_init__(self) -> None:
        """Validate the profile parameters."""
        if self.kind == ProfileKind.hierarchical and self.decay <= 1:
            raise ConfigError(f"the hierarchical decay c = {self.decay} must exceed 1")
        if self.kind == ProfileKind.user and not self.table:
            raise ConfigError("a tabulated profile needs a table of values")
        if self.table is not None and any(value < 0 for value in self.table):
            raise ConfigError("profile values must be nonnegative")
        if self.amplitude <= 0 or self.base <= 1:
            raise ConfigError("the amplitude must be positive and the base larger than 1")

    @property
    def floor_value(self) -> float:
        """A_0, the lower bound claimed near each site."""
        return self.amplitude / 2 if self.floor is None else self.floor

    @property
    def claims_finite_range(self) -> bool:
        """True for finite-range profiles."""
        return self.kind == ProfileKind.finite_range

    @property
    def claims_floor(self) -> bool:
        """True when the profile claims a floor A_0 near each site."""
        return (
            self.kind == ProfileKind.finite_range
            and self.floor_level < 0
            and self.floor_level <= self.range_level
            and self.floor_value < self.amplitude
        )

    def level_value(self, level: Union[int, np.ndarray]) -> np.ndarray:
        """W for a pair whose least common cell level is f, ignoring vertex zeros."""
        f = np.asarray(level)
        m = np.maximum(f, 0)
        if self.kind == ProfileKind.hierarchical:
            values = np.power(float(self.num_maps), -self.decay * m.astype(float))
            if self.table:
                table = np.asarray(self.table, dtype=float)
                inside = m < len(table)
                values = np.where(inside, table[np.minimum(m, len(table) - 1)], values)
            return values
        if self.kind == ProfileKind.gasket_4pow:
            return np.power(self.base, -m.astype(float))
        if self.kind == ProfileKind.finite_range:
            values = self.amplitude * np.power(self.base, -m.astype(float))
            return np.where(f <= self.range_level, values, 0.0)
        table = np.asarray(self.table, dtype=float)
        return np.where(m < len(table), table[np.minimum(m, len(table) - 1)], 0.0)

    def values(self, levels: np.ndarray, on_grid: np.ndarray) -> np.ndarray:
        """W for a matrix of levels; rows whose point is in V_0 may be zeroed."""
        result = self.level_value(levels).astype(float)
        if self.zero_at_vertices:
            result = np.where(np.asarray(on_grid)[:, None], 0.0, result)
        return result

    def tail_bound(self, spec: FractalSpec, level: int, xi_bound: float) -> float:
        """Bound on the part of a field coming from sites outside K^<level>."""
        if self.claims_finite_range and self.range_level <= level:
            return 0.0
        shells = np.arange(level + 1, level + 1 + TAIL_SHELLS)
        counts = spec.max_rank * spec.vertex_constant * np.power(float(spec.num_maps), shells)
        total = float(np.sum(counts * self.level_value(shells)))
        if total == 0.0:
            return 0.0
        return xi_bound * total


def profile_from_spec(profile: SingleSiteProfile, spec: FractalSpec) -> SingleSiteProfile:
    """Bind the number of maps of a fractal to a profile."""
    if profile.num_maps == spec.num_maps:
        return profile
    return SingleSiteProfile(
        kind=profile.kind,
        decay=profile.decay,
        table=profile.table,
        zero_at_vertices=profile.zero_at_vertices,
        base=profile.base,
        amplitude=profile.amplitude,
        range_level=profile.range_level,
        floor=profile.floor,
        floor_level=profile.floor_level,
        num_maps=spec.num_maps,
    )


def on_grid(lattice: LatticeGraph, rows: np.ndarray) -> np.ndarray:
    """Mask of the rows that are V_0 vertices."""
    return lattice.vertex_levels[np.asarray(rows)] >= 0


def _point_levels(lattice: LatticeGraph, point: np.ndarray, v: int) -> Tuple[int, bool]:
    """Least common level of a point and a vertex, and whether the point is in V_0."""
    spec = lattice.spec
    gaps = np.linalg.norm(lattice.coordinates - point, axis=1)
    closest = int(np.argmin(gaps))
    if gaps[closest] < POINT_TOLERANCE:
        level = int(common_level_matrix(lattice, np.array([closest]), np.array([v]))[0, 0])
        return level, bool(lattice.vertex_levels[closest] >= 0)
    padded, valid = lattice._padded
    frame = padded.shape[2]
    best: Optional[int] = None
    for cell in lattice.cells:
        if not point_in_polygon(spec.cell_corners(cell.word, -lattice.depth), point):
            continue
        word = np.asarray(pad_word(cell.word, frame))
        prefix = np.cumprod(padded[v] == word[None, :], axis=1).sum(axis=1)
        shared = int(np.where(valid[v], prefix, -1).max())
        level = frame - lattice.depth - shared
        best = level if best is None else min(best, level)
    if best is None:
        raise OutOfLattice(f"point {point.tolist()} is outside K^<{lattice.level}>")
    return best, False


def eval_profile(
    profile: SingleSiteProfile,
    lattice: LatticeGraph,
    x: Union[VertexId, Sequence[float], np.ndarray],
    v: VertexId,
) -> float:
    """W(x, v) for a vertex or a point x and a site v of the region."""
    site = lattice.locate(v)
    if lattice.vertex_levels[site] < 0:
        raise OutOfLattice(f"{v} is not a vertex of V_0")
    if isinstance(x, VertexId):
        row = lattice.locate(x)
        level = int(common_level_matrix(lattice, np.array([row]), np.array([site]))[0, 0])
        grid = bool(lattice.vertex_levels[row] >= 0)
    else:
        level, grid = _point_levels(lattice, np.asarray(x, dtype=float), site)
    return float(profile.values(np.array([[level]]), np.array([grid]))[0, 0])


@dataclass(frozen=True)
class DisorderLaw:
    """The common distribution F of the lattice couplings."""

    kind: LawKind = LawKind.bernoulli
    atom: float = 0.5
    value: float = 1.0
    upper: float = 1.0
    rate: float = 1.0
    table: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self) -> None:
        """Validate the law parameters."""
        if self.kind == LawKind.bernoulli and not (0 <= self.atom <= 1 and self.value > 0):
            raise ConfigError(f"bernoulli needs 0 <= p0 <= 1 and a > 0, got {self.atom}, {self.value}")
        if self.kind == LawKind.uniform and self.upper <= 0:
            raise ConfigError(f"uniform upper bound {self.upper} must be positive")
        if self.kind == LawKind.exponential and self.rate <= 0:
            raise ConfigError(f"exponential rate {self.rate} must be positive")
        if self.kind == LawKind.user:
            if not self.table or len(self.table) < 2:  # noqa: PLR2004
                raise ConfigError("a tabulated law needs two points or more")
            xs = np.array([x for x, _ in self.table])
            fs = np.array([f for _, f in self.table])
            if xs[0] < 0 or np.any(np.diff(xs) <= 0) or np.any(np.diff(fs) < 0):
                raise ConfigError("a tabulated CDF needs increasing x >= 0 and nondecreasing F")
            if fs[-1] != 1.0 or fs[0] < 0:
                raise ConfigError("a tabulated CDF must end at 1")

    def cdf(self, lam: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """F(lambda) = P(xi <= lambda)."""
        x = np.asarray(lam, dtype=float)
        if self.kind == LawKind.bernoulli:
            result = np.where(x < 0, 0.0, np.where(x < self.value, self.atom, 1.0))
        elif self.kind == LawKind.uniform:
            result = np.clip(x / self.upper, 0.0, 1.0)
        elif self.kind == LawKind.exponential:
            result = np.where(x < 0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)))
        else:
            table = np.asarray(self.table, dtype=float)
            result = np.where(
                x < table[0, 0], 0.0, np.interp(x, table[:, 0], table[:, 1])
            )
        return float(result) if result.ndim == 0 else result

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Generalized inverse of F, used to turn uniforms into couplings."""
        u = np.asarray(u, dtype=float)
        if self.kind == LawKind.bernoulli:
            return np.where(u < self.atom, 0.0, self.value)
        if self.kind == LawKind.uniform:
            return self.upper * u
        if self.kind == LawKind.exponential:
            return -np.log1p(-u) / self.rate
        table = np.asarray(self.table, dtype=float)
        return np.interp(u, table[:, 1], table[:, 0])

    @property
    def mean(self) -> float:
        """Expected coupling."""
        if self.kind == LawKind.bernoulli:
            return (1 - self.atom) * self.value
        if self.kind == LawKind.uniform:
            return self.upper / 2
        if self.kind == LawKind.exponential:
            return 1 / self.rate
        table = np.asarray(self.table, dtype=float)
        survival = 1.0 - table[:, 1]
        return float(table[0, 0] + np.trapz(survival, table[:, 0]))

    @property
    def nondegenerate(self) -> bool:
        """True when the law is not a point mass."""
        if self.kind == LawKind.bernoulli:
            return 0 < self.atom < 1
        if self.kind == LawKind.user:
            fs = np.asarray(self.table, dtype=float)[:, 1]
            return bool(np.any((fs > 0) & (fs < 1)))
        return True

    @property
    def ess_sup(self) -> float:
        """Essential supremum of the coupling."""
        if self.kind == LawKind.bernoulli:
            return 0.0 if self.atom == 1 else self.value
        if self.kind == LawKind.uniform:
            return self.upper
        if self.kind == LawKind.exponential:
            return math.inf
        table = np.asarray(self.table, dtype=float)
        return float(table[np.argmax(table[:, 1] >= 1.0), 0])

    @property
    def default_lambda_0(self) -> float:
        """Right end of the window on which (Q2) is checked."""
        return self.value / 2 if self.kind == LawKind.bernoulli else 1.0

    def sample(self, generator: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw couplings by inverse transform."""
        return self.ppf(generator.random(size))

    def describe(self) -> str:
        """Short name of the law."""
        if self.kind == LawKind.bernoulli:
            return f"bernoulli(p0={self.atom}, a={self.value})"
        if self.kind == LawKind.uniform:
            return f"uniform(0, {self.upper})"
        if self.kind == LawKind.exponential:
            return f"exponential({self.rate})"
        return "user"


@dataclass(frozen=True)
class LawReport:
    """Outcome of the (Q1) and (Q2) checks of a disorder law."""

    q1: bool
    q2: bool
    nonnegative: bool
    nondegenerate: bool
    finite_mean: bool
    positive_near_zero: bool
    continuous: bool
    lambda_0: float
    largest_jump: float


def verify_law(
    law: DisorderLaw,
    lambda_0: Optional[float] = None,
    points: int = 10_000,
    jump_tolerance: float = 1e-3,
) -> LawReport:
    """Check (Q1) exactly and (Q2) on a grid of (0, lambda_0]."""
    lambda_0 = law.default_lambda_0 if lambda_0 is None else lambda_0
    nonnegative = float(law.cdf(-1e-300)) == 0.0
    finite_mean = math.isfinite(law.mean)
    grid = np.linspace(0.0, lambda_0, points + 1)[1:]
    values = np.asarray(law.cdf(grid))
    positive = bool(np.all(values > 0))
    # an atom at zero is allowed; only jumps inside the window count
    largest_jump = float(np.max(np.diff(values), initial=0.0))
    continuous = largest_jump <= jump_tolerance
    q1 = nonnegative and law.nondegenerate and finite_mean
    return LawReport(
        q1=q1,
        q2=positive and continuous,
        nonnegative=nonnegative,
        nondegenerate=law.nondegenerate,
        finite_mean=finite_mean,
        positive_near_zero=positive,
        continuous=continuous,
        lambda_0=lambda_0,
        largest_jump=largest_jump,
    )


@dataclass(frozen=True, eq=False)
class DisorderSample:
    """The couplings of the V_0 vertices of a region for one seed and sample."""

    seed: int
    sample: int
    lattice: LatticeGraph
    sites: np.ndarray
    values: np.ndarray

    def value_of(self, vertex: VertexId) -> float:
        """Coupling at a vertex of the sample."""
        index = self.lattice.locate(vertex)
        position = np.searchsorted(self.sites, index)
        if position >= len(self.sites) or self.sites[position] != index:
            raise OutOfLattice(f"{vertex} is not a site of the sample")
        return float(self.values[position])

    def rows(self) -> List[Tuple[str, float]]:
        """Rows (vertex_id, xi) for export."""
        return [
            (str(self.lattice.vertices[site]), float(value))
            for site, value in zip(self.sites, self.values)
        ]

    def with_values(self, values: np.ndarray) -> "DisorderSample":
        """Same sites with new couplings."""
        return DisorderSample(self.seed, self.sample, self.lattice, self.sites, np.asarray(values, dtype=float))


def sample_disorder(
    law: DisorderLaw, lattice: LatticeGraph, seed: int, sample: int = 0
) -> DisorderSample:
    """Draw one coupling per V_0 vertex from a stream keyed by its index."""
    sites = lattice.grid_sites()
    uniforms = np.array(
        [util.make_generator(seed, sample, int(site)).random() for site in sites]
    )
    return DisorderSample(
        seed=seed, sample=sample, lattice=lattice, sites=sites, values=law.ppf(uniforms)
    )


def _check_fold(sample: DisorderSample, fold: Optional[FoldingMap]) -> FoldingMap:
    """Require the folding map of the sampled lattice."""
    if fold is None or fold.lattice is not sample.lattice:
        raise MissingFolding("the periodized field needs the folding map of the sampled region")
    return fold


def site_couplings(
    sample: DisorderSample, mode: PotentialMode, fold: Optional[FoldingMap] = None
) -> np.ndarray:
    """Coupling used at each site: its own, or the one of its image in K^<M>."""
    if mode == PotentialMode.free:
        return sample.values
    fold = _check_fold(sample, fold)
    position = {int(site): i for i, site in enumerate(sample.sites)}
    return np.array([sample.values[position[int(fold.image[site])]] for site in sample.sites])


def potential_on(
    profile: SingleSiteProfile,
    sample: DisorderSample,
    rows: np.ndarray,
    mode: PotentialMode = PotentialMode.free,
    fold: Optional[FoldingMap] = None,
) -> np.ndarray:
    """The alloy field at lattice rows, truncated to the sites of the region."""
    lattice = sample.lattice
    rows = np.asarray(rows)
    couplings = site_couplings(sample, mode, fold)
    levels = common_level_matrix(lattice, rows, sample.sites)
    weights = profile.values(levels, on_grid(lattice, rows))
    return weights @ couplings


@dataclass(frozen=True)
class FieldValue:
    """A field value with the bound on the part the region cannot see."""

    value: float
    tail_bound: float
    mode: PotentialMode


def field_value(
    profile: SingleSiteProfile,
    sample: DisorderSample,
    x: VertexId,
    mode: PotentialMode,
    law: Optional[DisorderLaw] = None,
    fold: Optional[FoldingMap] = None,
) -> FieldValue:
    """V(x) or V_M(x) at a vertex of the sampled region."""
    lattice = sample.lattice
    row = lattice.locate(x)
    value = float(potential_on(profile, sample, np.array([row]), mode, fold)[0])
    bound = math.inf if law is None else law.ess_sup
    if mode == PotentialMode.periodized:
        folded = _check_fold(sample, fold)
        sites = len(lattice.grid_sites(folded.order))
        # each site of K^<M> has preimages beyond the region
        tail = sites * profile.tail_bound(lattice.spec, lattice.level, 1.0)
        tail = tail * bound if tail else 0.0
    else:
        tail = profile.tail_bound(lattice.spec, lattice.level, bound) if bound else 0.0
    return FieldValue(value=value, tail_bound=tail, mode=mode)


def integrability(potential: np.ndarray, weights: np.ndarray) -> Tuple[float, float]:
    """Averages of V and V^2 against the vertex measure of a complex."""
    total = float(np.sum(weights))
    return (
        float(np.dot(weights, potential) / total),
        float(np.dot(weights, potential**2) / total),
    )


@dataclass
class ConditionReport:
    """Pass or fail of one condition with the numbers behind it."""

    name: str
    passed: bool
    claimed: bool = True
    values: List[float] = field(default_factory=list)
    rate: Optional[float] = None
    witnesses: List[Dict[str, object]] = field(default_factory=list)
    note: str = ""


@dataclass
class WReport:
    """All (W) conditions of a profile on one fractal."""

    conditions: Dict[str, ConditionReport]
    max_level: int
    depth: int

    @property
    def passed(self) -> bool:
        """True when every claimed condition passed."""
        return all(c.passed for c in self.conditions.values() if c.claimed)

    def __getitem__(self, name: str) -> ConditionReport:
        """Report of one condition by name."""
        return self.conditions[name]


def _geometric_rate(values: Sequence[float]) -> Optional[float]:
    """Ratio of a geometric fit to the positive entries of a sequence."""
    positive = [(i, v) for i, v in enumerate(values) if v > 0]
    if len(positive) < 2:  # noqa: PLR2004
        return None
    index = np.array([i for i, _ in positive], dtype=float)
    logs = np.log([v for _, v in positive])
    return float(math.exp(np.polyfit(index, logs, 1)[0]))


def _check_w1(
    profile: SingleSiteProfile, lattice: LatticeGraph, levels: np.ndarray, grid: np.ndarray
) -> ConditionReport:
    """Build the coefficients a_v and check that their partial sums settle."""
    sites = lattice.grid_sites()
    depth = lattice.depth
    values = profile.values(levels, grid)
    shells = [0.0] * (lattice.level + 1)
    for j, site in enumerate(sites):
        first = max(len(lattice.vertices[site].cell.word) - depth, 0)
        inner = first - 2
        if inner < -depth:
            continue
        rows = lattice.inside(inner)
        shells[first] += float(values[rows, j].max(initial=0.0))
    considered = shells[2:]
    rate = _geometric_rate(considered)
    passed = all(math.isfinite(s) for s in considered) and (rate is None or rate < 1)
    return ConditionReport(
        name="W1",
        passed=passed,
        values=considered,
        rate=rate,
        note=f"a_v maximizes W over the vertices of K^<m_v - 2> at depth {depth}; shells m = 2..{lattice.level}",
    )


def _check_w2(
    profile: SingleSiteProfile, spec: FractalSpec, max_level: int, depth: int, cap: int
) -> ConditionReport:
    """Check the folded profile dominates on every lattice point."""
    strict = 0
    violations: List[Dict[str, object]] = []
    for order in range(max(max_level - 1, 0)):
        lattice = enumerate_lattice(spec, order + 2, depth, cap)
        labeling = find_good_labeling(lattice, order)
        if not isinstance(labeling, GoodLabeling):
            raise MissingFolding(labeling.describe())
        fold = build_folding(labeling)
        sites = lattice.grid_sites()
        targets = lattice.grid_sites(order)
        column = {int(site): i for i, site in enumerate(targets)}
        preimage = np.zeros((len(sites), len(targets)))
        for i, site in enumerate(sites):
            preimage[i, column[int(fold.image[site])]] = 1.0
        points = np.flatnonzero(lattice.inside(order + 1))
        rows = np.union1d(points, fold.image[points])
        row_of = {int(r): i for i, r in enumerate(rows)}
        levels = common_level_matrix(lattice, rows, sites)
        sums = profile.values(levels, on_grid(lattice, rows)) @ preimage
        for y in points:
            lhs = sums[row_of[int(fold.image[y])]]
            rhs = sums[row_of[int(y)]]
            slack = SUM_TOLERANCE * np.maximum(1.0, np.abs(rhs))
            strict += int(np.sum(lhs < rhs - slack))
            for u in np.flatnonzero(lhs > rhs + slack):
                if len(violations) < 20:  # noqa: PLR2004
                    violations.append(
                        {
                            "M": order,
                            "x": str(lattice.vertices[y]),
                            "v": str(lattice.vertices[targets[u]]),
                            "lhs": float(lhs[u]),
                            "rhs": float(rhs[u]),
                        }
                    )
    return ConditionReport(
        name="W2",
        passed=not violations,
        values=[float(strict)],
        witnesses=violations,
        note="equality" if strict == 0 and not violations else f"{strict} strict pairs",
    )


def _check_w3(
    profile: SingleSiteProfile, lattice: LatticeGraph, levels: np.ndarray, grid: np.ndarray
) -> ConditionReport:
    """Fit a geometric decay to the tail sums."""
    values = profile.values(levels, grid)
    inner = lattice.inside(0)
    sums = []
    for m in range(lattice.level):
        beyond = np.where(levels > m, values, 0.0)
        sums.append(float(beyond[inner].sum(axis=1).max(initial=0.0)))
    rate = _geometric_rate(sums)
    return ConditionReport(
        name="W3",
        passed=rate is None or rate < 1,
        values=sums,
        rate=rate,
        note="sup over x in K^<0> of the sum over sites v with f(x, v) > m",
    )


def hierarchical_tail_bound(spec: FractalSpec, decay: float, level: int) -> float:
    """The closed-form bound k(N-1)/(N^c - N) N^(-(c-1) m) of the hierarchical profile."""
    n = spec.num_maps
    return spec.num_corners * (n - 1) / (n**decay - n) * n ** (-(decay - 1) * level)


def verify_W_conditions(
    profile: SingleSiteProfile,
    spec: FractalSpec,
    max_level: int,
    depth: int = 1,
    cap: int = DEFAULT_SIZE_CAP,
) -> WReport:
    """Numerical proxies of (W1)-(W5) on lattices up to K^<max_level>."""
    profile = profile_from_spec(profile, spec)
    lattice = enumerate_lattice(spec, max_level, depth, cap)
    everything = np.arange(lattice.num_vertices)
    levels = common_level_matrix(lattice, everything, lattice.grid_sites())
    grid = on_grid(lattice, everything)
    conditions = {
        "W1": _check_w1(profile, lattice, levels, grid),
        "W2": _check_w2(profile, spec, max_level, depth, cap),
        "W3": _check_w3(profile, lattice, levels, grid),
    }
    values = profile.values(levels, grid)
    finite_range = bool(np.all(values[levels > profile.range_level] == 0.0))
    conditions["W4"] = ConditionReport(
        name="W4",
        passed=finite_range,
        claimed=profile.claims_finite_range,
        values=[float(profile.range_level)],
    )
    near = levels <= profile.floor_level
    floor_holds = bool(np.all(values[near] > profile.floor_value))
    conditions["W5"] = ConditionReport(
        name="W5",
        passed=floor_holds,
        claimed=profile.claims_floor,
        values=[profile.floor_value, float(profile.floor_level)],
    )
    return WReport(conditions=conditions, max_level=max_level, depth=depth)
