"""Build nested fractals, their vertex lattices, ranks and distances."""

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, total_ordering
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse import csgraph, csr_matrix

from . import util
from .exceptions import AxiomViolation, NotPlanar, OutOfLattice, SizeLimit

Word = Tuple[int, ...]
Rep = Tuple[Word, int]
Point = Tuple[float, float]

# tolerance for comparing points while the similitude tables are built
POINT_TOLERANCE = 1e-9

# default cap on k times the number of finest cells of one lattice
DEFAULT_SIZE_CAP = 2_000_000

# time-renormalization factors that are known in closed form
TAU_REGISTRY: Dict[str, float] = {"gasket": 5.0, "vicsek": 15.0}

# a level that no vertex reaches; used for the origin
UNBOUNDED_LEVEL = 10**6


def strip_word(word: Sequence[int]) -> Word:
    """Remove the leading zeros that only pad an address to a larger frame."""
    start = 0
    while start < len(word) and word[start] == 0:
        start += 1
    return tuple(int(letter) for letter in word[start:])


def pad_word(word: Sequence[int], length: int) -> Word:
    """Prefix a word with zeros until it has the requested length."""
    if len(word) > length:
        raise OutOfLattice(f"word {tuple(word)} does not fit length {length}")
    return (0,) * (length - len(word)) + tuple(word)


def rep_key(rep: Rep) -> Tuple[int, Word, int]:
    """Order representatives by word length, then word, then corner."""
    return (len(rep[0]), rep[0], rep[1])


@total_ordering
@dataclass(frozen=True)
class CellAddress:
    """The cell L^level K + sum_t L^(level+len-t+1) nu_(word_t)."""

    level: int
    word: Word = ()

    def __post_init__(self) -> None:
        """Drop trailing zero letters from the word."""
        object.__setattr__(self, "word", strip_word(self.word))

    @property
    def sort_key(self) -> Tuple[int, int, Word]:
        """Order cells by level, then word length, then word."""
        return (self.level, len(self.word), self.word)

    def __lt__(self, other: "CellAddress") -> bool:
        """Compare two cells by their sort keys."""
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        """Render the cell as level:word."""
        return f"{self.level}:" + ".".join(str(letter) for letter in self.word)


@total_ordering
@dataclass(frozen=True)
class VertexId:
    """A lattice vertex named by its least containing finest cell and corner."""

    cell: CellAddress
    corner: int

    @property
    def sort_key(self) -> Tuple[Tuple[int, int, Word], int]:
        """Order vertices by cell, then corner."""
        return (self.cell.sort_key, self.corner)

    def __lt__(self, other: "VertexId") -> bool:
        """Compare two vertices by their sort keys."""
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        """Render the vertex as cell/corner."""
        return f"{self.cell}/{self.corner}"


@dataclass(frozen=True)
class Similitude:
    """A contracting similitude x -> U x / L + nu of the plane."""

    ratio: float
    rotation: Tuple[Tuple[float, float], Tuple[float, float]]
    translation: Point


@dataclass(frozen=True, eq=False)
class FractalSpec:
    """An iterated function system of a nested fractal and its derived tables."""

    name: str
    num_maps: int
    scale: float
    rotation: Tuple[Tuple[float, float], Tuple[float, float]]
    translations: Tuple[Point, ...]
    corners: Tuple[Point, ...]
    hausdorff_dim: float
    max_rank: int
    time_scale: float
    tau_source: str
    vertex_constant: float
    parent_corner: Dict[Tuple[int, int], int]
    junction_class: Dict[Tuple[int, int], Tuple[Tuple[int, int], ...]]
    corner_child: Dict[int, Tuple[int, int]]
    rotation_perm: Tuple[Tuple[int, ...], ...]

    @property
    def num_corners(self) -> int:
        """Number of essential fixed points k."""
        return len(self.corners)

    @property
    def walk_dim(self) -> float:
        """Effective walk dimension log(tau) / log(L)."""
        return math.log(self.time_scale) / math.log(self.scale)

    @property
    def spectral_dim(self) -> float:
        """Spectral dimension d_s = 2 d_f / d_w."""
        return 2 * self.hausdorff_dim / self.walk_dim

    @property
    def generator_scale(self) -> float:
        """Degree of an interior junction, (k - 1) r_0."""
        return float((self.num_corners - 1) * self.max_rank)

    @property
    def centroid(self) -> np.ndarray:
        """Centre of the corner polygon."""
        return np.mean(np.asarray(self.corners), axis=0)

    @property
    def has_identity_rotation(self) -> bool:
        """True when every map of the family is unrotated."""
        return bool(np.allclose(self.rotation, np.eye(2), atol=1e-12))

    @cached_property
    def spec_hash(self) -> str:
        """Hash of everything that changes a lattice or a spectrum."""
        return util.hash_data(
            {
                "N": self.num_maps,
                "L": round(self.scale, 12),
                "U": [[round(value, 12) for value in row] for row in self.rotation],
                "nu": [[round(value, 12) for value in nu] for nu in self.translations],
                "tau": round(self.time_scale, 12),
            }
        )

    def point(self, word: Sequence[int], corner: int, level: int) -> np.ndarray:
        """Coordinates of a corner of the cell with a word at a level."""
        length = len(word)
        position = self.scale**level * np.asarray(self.corners[corner])
        for t, letter in enumerate(word, start=1):
            position = position + self.scale ** (level + length - t + 1) * np.asarray(
                self.translations[letter]
            )
        return position

    def cell_corners(self, word: Sequence[int], level: int) -> np.ndarray:
        """Corners of a cell in the plane."""
        return np.array(
            [self.point(word, j, level) for j in range(self.num_corners)]
        )


def _apply(
    ratio: float, rotation: np.ndarray, translation: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Apply one similitude to a point."""
    return rotation @ x * ratio + translation


def _find(points: Sequence[np.ndarray], x: np.ndarray) -> Optional[int]:
    """Index of the point within tolerance of x, if any."""
    for index, candidate in enumerate(points):
        if np.linalg.norm(candidate - x) < POINT_TOLERANCE:
            return index
    return None


def _cross(a: np.ndarray, b: np.ndarray) -> float:
    """z-component of the planar cross product."""
    return float(a[0] * b[1] - a[1] * b[0])


def point_in_polygon(polygon: np.ndarray, x: np.ndarray) -> bool:
    """Decide whether x lies in the closed convex polygon."""
    count = len(polygon)
    turns = [
        _cross(polygon[(i + 1) % count] - polygon[i], x - polygon[i])
        for i in range(count)
    ]
    # either orientation of the corners is accepted
    return min(turns) >= -POINT_TOLERANCE or max(turns) <= POINT_TOLERANCE


def interiors_disjoint(first: np.ndarray, second: np.ndarray) -> bool:
    """Separating-axis test for the open interiors of two convex polygons."""
    for polygon in (first, second):
        count = len(polygon)
        for i in range(count):
            edge = polygon[(i + 1) % count] - polygon[i]
            normal = np.array([-edge[1], edge[0]])
            a = first @ normal
            b = second @ normal
            if a.max() <= b.min() + POINT_TOLERANCE:
                return True
            if b.max() <= a.min() + POINT_TOLERANCE:
                return True
    return False


def _as_similitude(raw: object) -> Similitude:
    """Coerce a (ratio, rotation, translation) triple into a Similitude."""
    if isinstance(raw, Similitude):
        return raw
    try:
        ratio, rotation, translation = raw  # type: ignore[misc]
    except (TypeError, ValueError) as error:
        raise NotPlanar(f"cannot read a similitude from {raw!r}") from error
    rotation_array = np.asarray(rotation, dtype=float)
    translation_array = np.asarray(translation, dtype=float)
    if rotation_array.shape != (2, 2) or translation_array.shape != (2,):
        raise NotPlanar(
            f"rotation shape {rotation_array.shape}, translation shape {translation_array.shape}"
        )
    return Similitude(
        float(ratio),
        (
            (float(rotation_array[0, 0]), float(rotation_array[0, 1])),
            (float(rotation_array[1, 0]), float(rotation_array[1, 1])),
        ),
        (float(translation_array[0]), float(translation_array[1])),
    )


def _essential_points(
    maps: List[Similitude], fixed: List[np.ndarray]
) -> List[np.ndarray]:
    """Fixed points that are shared with another cell of level one."""
    essential = []
    for i, x in enumerate(fixed):
        hits = False
        for j, y in enumerate(fixed):
            for a, b in itertools.permutations(range(len(maps)), 2):
                image_a = _apply(
                    maps[a].ratio, np.asarray(maps[a].rotation), np.asarray(maps[a].translation), x
                )
                image_b = _apply(
                    maps[b].ratio, np.asarray(maps[b].rotation), np.asarray(maps[b].translation), y
                )
                if np.linalg.norm(image_a - image_b) < POINT_TOLERANCE:
                    hits = True
                    break
            if hits:
                break
        if hits and _find(essential, x) is None:
            essential.append(fixed[i])
    return essential


def _order_corners(points: List[np.ndarray]) -> List[np.ndarray]:
    """Sort points counterclockwise around their centroid."""
    centroid = np.mean(points, axis=0)
    ordered = sorted(
        points,
        key=lambda p: math.atan2(p[1] - centroid[1], p[0] - centroid[0]),
    )
    origin = _find(ordered, np.zeros(2))
    if origin is None:
        raise AxiomViolation("origin", "the fixed point of the first map is not essential")
    return ordered[origin:] + ordered[:origin]


def _check_regular(corners: np.ndarray) -> None:
    """Require the corners to form a regular polygon."""
    centroid = corners.mean(axis=0)
    radii = np.linalg.norm(corners - centroid, axis=1)
    edges = np.linalg.norm(corners - np.roll(corners, -1, axis=0), axis=1)
    if np.ptp(radii) > POINT_TOLERANCE or np.ptp(edges) > POINT_TOLERANCE:
        raise AxiomViolation("regular-polygon", "essential fixed points are not a regular k-gon")


def _level_one_points(
    maps: List[Similitude], corners: np.ndarray
) -> Tuple[List[np.ndarray], Dict[Tuple[int, int], int]]:
    """Cluster the corners of the level-one cells into geometric points."""
    points: List[np.ndarray] = []
    owner: Dict[Tuple[int, int], int] = {}
    for i, similitude in enumerate(maps):
        for j, corner in enumerate(corners):
            x = _apply(
                similitude.ratio,
                np.asarray(similitude.rotation),
                np.asarray(similitude.translation),
                corner,
            )
            index = _find(points, x)
            if index is None:
                points.append(x)
                index = len(points) - 1
            owner[(i, j)] = index
    return points, owner


def _check_open_set(maps: List[Similitude], corners: np.ndarray) -> None:
    """Require the level-two cells to have disjoint interiors."""
    hulls = []
    for a, b in itertools.product(range(len(maps)), repeat=2):
        hull = []
        for corner in corners:
            x = _apply(maps[b].ratio, np.asarray(maps[b].rotation), np.asarray(maps[b].translation), corner)
            x = _apply(maps[a].ratio, np.asarray(maps[a].rotation), np.asarray(maps[a].translation), x)
            hull.append(x)
        hulls.append(np.array(hull))
    for first, second in itertools.combinations(hulls, 2):
        if not interiors_disjoint(first, second):
            raise AxiomViolation("open-set", "two depth-2 cells overlap")


def _check_nesting(
    cells: List[np.ndarray], points: List[np.ndarray], owner: Dict[Tuple[int, int], int]
) -> None:
    """Require two cells to meet only in shared corners."""
    members: Dict[int, Set[int]] = {}
    for (i, _), index in owner.items():
        members.setdefault(index, set()).add(i)
    for index, x in enumerate(points):
        for i, hull in enumerate(cells):
            if i not in members[index] and point_in_polygon(hull, x):
                raise AxiomViolation(
                    "nesting", f"corner {x.tolist()} touches cell {i} away from its corners"
                )


def _cell_point_sets(
    num_maps: int, num_corners: int, owner: Dict[Tuple[int, int], int]
) -> Set[FrozenSet[int]]:
    """Corner sets of the level-one cells."""
    return {
        frozenset(owner[(i, j)] for j in range(num_corners)) for i in range(num_maps)
    }


def _check_symmetry(
    corners: np.ndarray,
    points: List[np.ndarray],
    owner: Dict[Tuple[int, int], int],
    num_maps: int,
) -> None:
    """Require every mirror axis of the polygon to map cells onto cells."""
    cells = _cell_point_sets(num_maps, len(corners), owner)
    for a, b in itertools.combinations(range(len(corners)), 2):
        direction = corners[b] - corners[a]
        direction = direction / np.linalg.norm(direction)
        middle = (corners[a] + corners[b]) / 2

        def reflect(x: np.ndarray) -> np.ndarray:
            """Mirror x across the axis."""
            return x - 2 * float((x - middle) @ direction) * direction

        image_cells = set()
        for cell in cells:
            image = set()
            for index in cell:
                found = _find(points, reflect(points[index]))
                if found is None:
                    raise AxiomViolation("symmetry", f"reflection across corners {a},{b}")
                image.add(found)
            image_cells.add(frozenset(image))
        if image_cells != cells:
            raise AxiomViolation("symmetry", f"reflection across corners {a},{b}")


def _check_connected(
    num_maps: int, junction_class: Dict[Tuple[int, int], Tuple[Tuple[int, int], ...]]
) -> None:
    """Require the level-one cells to form a connected graph."""
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for (cell, _), members in junction_class.items():
            if cell != i:
                continue
            for other, _ in members:
                if other not in seen:
                    seen.add(other)
                    queue.append(other)
    if len(seen) != num_maps:
        raise AxiomViolation("connectivity", "the level-one cells do not form a connected chain")


def _rotation_permutations(
    maps: List[Similitude], corners: np.ndarray
) -> Tuple[Tuple[int, ...], ...]:
    """Permutations of the maps induced by the rotations of the polygon."""
    k = len(corners)
    centroid = corners.mean(axis=0)
    tables = []
    for r in range(k):
        angle = 2 * math.pi * r / k
        turn = np.array(
            [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
        )
        table = []
        for i, similitude in enumerate(maps):
            target = None
            for candidate in range(len(maps)):
                matches = True
                for j in range(k):
                    x = centroid + turn @ (
                        _apply(similitude.ratio, np.asarray(similitude.rotation), np.asarray(similitude.translation), corners[j])
                        - centroid
                    )
                    y = _apply(
                        maps[candidate].ratio,
                        np.asarray(maps[candidate].rotation),
                        np.asarray(maps[candidate].translation),
                        corners[(j + r) % k],
                    )
                    if np.linalg.norm(x - y) > POINT_TOLERANCE:
                        matches = False
                        break
                if matches:
                    target = candidate
                    break
            if target is None:
                raise AxiomViolation("rotation-symmetry", f"map {i} under rotation {r}")
            table.append(target)
        tables.append(tuple(table))
    return tuple(tables)


def vertex_count_oracle(spec: FractalSpec, level: int) -> int:
    """Count the vertices of V_0 inside K^<level> by the junction recursion."""
    shared = sum(
        len(members) - 1
        for members in {tuple(m) for m in spec.junction_class.values()}
    )
    count = spec.num_corners
    for _ in range(level):
        count = spec.num_maps * count - shared
    return count


def build_spec(  # noqa: PLR0912, PLR0915
    similitudes: Sequence[object],
    name: str = "custom",
    tau: Optional[float] = None,
) -> FractalSpec:
    """Verify the nested-fractal axioms and derive the combinatorial tables."""
    maps = [_as_similitude(raw) for raw in similitudes]
    if len(maps) < 2:  # noqa: PLR2004
        raise AxiomViolation("N>=2", "at least two similitudes are needed")
    ratio = maps[0].ratio
    rotation = np.asarray(maps[0].rotation)
    for similitude in maps:
        if abs(similitude.ratio - ratio) > 1e-12 or not np.allclose(
            similitude.rotation, rotation, atol=1e-12
        ):
            raise AxiomViolation("common-similitude", "maps must share ratio and rotation")
    if not 0 < ratio < 1:
        raise AxiomViolation("contraction", f"ratio {ratio} is not in (0, 1)")
    if not np.allclose(rotation @ rotation.T, np.eye(2), atol=1e-12):
        raise AxiomViolation("orthogonal", "the rotation part is not orthogonal")
    if np.linalg.norm(maps[0].translation) > 1e-12:
        raise AxiomViolation("origin", "the first translation must be zero")
    scale = 1.0 / ratio
    # step 1: fixed points and the essential ones among them
    fixed = [
        linalg.solve(np.eye(2) - rotation * ratio, np.asarray(m.translation))
        for m in maps
    ]
    essential = _essential_points(maps, fixed)
    if len(essential) < 3:  # noqa: PLR2004
        raise AxiomViolation("k>=3", f"only {len(essential)} essential fixed points")
    corners = np.array(_order_corners(essential))
    _check_regular(corners)
    k = len(corners)
    # step 2: corners of the level-one cells and their junctions
    points, owner = _level_one_points(maps, corners)
    cells = [
        np.array([points[owner[(i, j)]] for j in range(k)]) for i in range(len(maps))
    ]
    parent_corner: Dict[Tuple[int, int], int] = {}
    corner_child: Dict[int, Tuple[int, int]] = {}
    for (i, j), index in owner.items():
        outer = _find(list(corners), points[index])
        if outer is not None:
            parent_corner[(i, j)] = outer
            if outer in corner_child:
                raise AxiomViolation("nesting", f"outer corner {outer} lies in two cells")
            corner_child[outer] = (i, j)
    if len(corner_child) != k:
        raise AxiomViolation("nesting", "an outer corner is not a corner of a level-one cell")
    groups: Dict[int, List[Tuple[int, int]]] = {}
    for key, index in sorted(owner.items()):
        groups.setdefault(index, []).append(key)
    junction_class = {
        key: tuple(groups[index])
        for key, index in owner.items()
        if key not in parent_corner
    }
    max_rank = max(len(members) for members in groups.values())
    # step 3: the axioms
    _check_open_set(maps, corners)
    _check_nesting(cells, points, owner)
    _check_symmetry(corners, points, owner, len(maps))
    _check_connected(len(maps), junction_class)
    if (k == 3 and max_rank not in (2, 3)) or (k >= 4 and max_rank != 2):  # noqa: PLR2004
        raise AxiomViolation("rank", f"r_0 = {max_rank} with k = {k}")
    rotation_perm = _rotation_permutations(maps, corners)
    hausdorff_dim = math.log(len(maps)) / math.log(scale)
    spec = FractalSpec(
        name=name,
        num_maps=len(maps),
        scale=scale,
        rotation=maps[0].rotation,
        translations=tuple(m.translation for m in maps),
        corners=tuple((float(x), float(y)) for x, y in corners),
        hausdorff_dim=hausdorff_dim,
        max_rank=max_rank,
        time_scale=float("nan"),
        tau_source="pending",
        vertex_constant=float("nan"),
        parent_corner=parent_corner,
        junction_class=junction_class,
        corner_child=corner_child,
        rotation_perm=rotation_perm,
    )
    # step 4: the vertex-count constant and the time scale
    object.__setattr__(
        spec,
        "vertex_constant",
        max(
            vertex_count_oracle(spec, level) / spec.num_maps**level
            for level in range(8)
        ),
    )
    if tau is not None:
        time_scale, source = float(tau), "config"
    elif name in TAU_REGISTRY:
        time_scale, source = TAU_REGISTRY[name], "registry"
    elif not spec.has_identity_rotation:
        time_scale, source = float("nan"), "unavailable"
    else:
        time_scale, source = network_reduction_tau(spec), "network-reduction"
    object.__setattr__(spec, "time_scale", time_scale)
    object.__setattr__(spec, "tau_source", source)
    return spec


def preset_similitudes(name: str) -> List[Similitude]:
    """Similitudes of the shipped fractals."""
    identity = ((1.0, 0.0), (0.0, 1.0))
    if name == "gasket":
        height = math.sqrt(3) / 2
        translations = [(0.0, 0.0), (0.5, 0.0), (0.25, height / 2)]
        return [Similitude(0.5, identity, nu) for nu in translations]
    if name == "vicsek":
        third = 1 / 3
        translations = [
            (0.0, 0.0),
            (2 * third, 0.0),
            (2 * third, 2 * third),
            (0.0, 2 * third),
            (third, third),
        ]
        return [Similitude(third, identity, nu) for nu in translations]
    if name == "segment":
        return [
            Similitude(0.5, identity, (0.0, 0.0)),
            Similitude(0.5, identity, (0.5, 0.0)),
        ]
    raise KeyError(name)


def preset_spec(name: str, tau: Optional[float] = None) -> FractalSpec:
    """Build one of the shipped fractals by name."""
    return build_spec(preset_similitudes(name), name=name, tau=tau)


def descend(spec: FractalSpec, word: Sequence[int], corner: int, levels: int) -> Rep:
    """Follow a corner down through the finer cells that contain it."""
    cells = list(word)
    for _ in range(levels):
        child, corner = spec.corner_child[corner]
        cells.append(child)
    return tuple(cells), corner


def vertex_representatives(
    spec: FractalSpec, word: Sequence[int], corner: int, length: int
) -> Tuple[Rep, ...]:
    """Return every finest cell and corner of K^<infinity> meeting at a vertex."""
    cells = list(pad_word(strip_word(word), length))
    target = length
    # lift the corner while it is also a corner of the parent cell
    while True:
        if not cells:
            if corner == 0:
                return (((), 0),)
            cells = [0]
            target += 1
        parent = spec.parent_corner.get((cells[-1], corner))
        if parent is None:
            break
        cells.pop()
        corner = parent
    prefix = cells[:-1]
    reps = []
    for i, j in spec.junction_class[(cells[-1], corner)]:
        rep_word, rep_corner = descend(spec, [*prefix, i], j, target - len(prefix) - 1)
        reps.append((strip_word(rep_word), rep_corner))
    return tuple(sorted(reps, key=rep_key))


def lifted_level(spec: FractalSpec, rep: Rep, depth: int) -> int:
    """Largest level m such that the vertex belongs to V_m."""
    word, corner = rep
    lifts = 0
    position = len(word)
    while True:
        letter = word[position - 1] if position > 0 else 0
        if position <= 0 and corner == 0:
            return UNBOUNDED_LEVEL
        parent = spec.parent_corner.get((letter, corner))
        if parent is None:
            return lifts - depth
        corner = parent
        position -= 1
        lifts += 1


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """The depth-n vertex lattice of K^<level>, immutable after enumeration."""

    spec: FractalSpec
    level: int
    depth: int
    vertices: Tuple[VertexId, ...]
    representatives: Tuple[Tuple[Rep, ...], ...]
    cells: Tuple[CellAddress, ...]
    cell_vertices: np.ndarray
    edges: Tuple[Tuple[int, int], ...]
    neighbors: Tuple[Tuple[int, ...], ...]
    index: Dict[VertexId, int]
    _cell_graphs: Dict[int, Dict[Word, Set[Word]]] = field(
        default_factory=dict, repr=False
    )

    @property
    def word_length(self) -> int:
        """Letters in a vertex word, M + n."""
        return self.level + self.depth

    @property
    def num_vertices(self) -> int:
        """Number of enumerated vertices."""
        return len(self.vertices)

    def locate(self, vertex: VertexId) -> int:
        """Index of a vertex, or OutOfLattice when it was not enumerated."""
        try:
            return self.index[vertex]
        except KeyError as error:
            raise OutOfLattice(f"vertex {vertex} is not in K^<{self.level}>") from error

    def vertex_at(self, word: Sequence[int], corner: int) -> int:
        """Index of the vertex at a corner of any finest cell of the region."""
        rep = vertex_representatives(
            self.spec, word, corner, max(len(strip_word(word)), self.word_length)
        )[0]
        return self.locate(VertexId(CellAddress(-self.depth, rep[0]), rep[1]))

    def corner_indices(self, level: int) -> Tuple[int, ...]:
        """Indices of the k corners of K^<level>, in corner order."""
        if level < -self.depth:
            raise OutOfLattice(f"level {level} is below the working depth")
        return tuple(
            self.vertex_at(*descend(self.spec, (), j, level + self.depth))
            for j in range(self.spec.num_corners)
        )

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Planar coordinates of every vertex at the finest scale."""
        return np.array(
            [
                self.spec.point(vertex.cell.word, vertex.corner, -self.depth)
                for vertex in self.vertices
            ]
        )

    @cached_property
    def vertex_levels(self) -> np.ndarray:
        """For each vertex the largest m with the vertex in V_m."""
        return np.array(
            [lifted_level(self.spec, reps[0], self.depth) for reps in self.representatives]
        )

    def inside(self, level: int) -> np.ndarray:
        """Mask of the vertices that lie in K^<level>."""
        bound = level + self.depth
        return np.array([len(vertex.cell.word) <= bound for vertex in self.vertices])

    def grid_sites(self, level: Optional[int] = None) -> np.ndarray:
        """Indices of the V_0 vertices inside K^<level> (the whole region by default)."""
        mask = self.vertex_levels >= 0
        if level is not None:
            mask &= self.inside(level)
        return np.flatnonzero(mask)

    def ancestors(self, vertex: int, level: int) -> Tuple[Word, ...]:
        """Distinct cells of a level containing a vertex, inside the region."""
        up = level + self.depth
        if up < 0:
            raise OutOfLattice(f"level {level} is below the working depth")
        found = set()
        for word, _ in self.representatives[vertex]:
            ancestor = word[: len(word) - up] if len(word) > up else ()
            if len(ancestor) <= max(self.level - level, 0):
                found.add(ancestor)
        return tuple(sorted(found, key=lambda w: (len(w), w)))

    def rank_within(self, vertex: int, level: int) -> int:
        """Number of finest cells inside K^<level> that contain a vertex."""
        bound = level + self.depth
        return sum(1 for word, _ in self.representatives[vertex] if len(word) <= bound)

    @cached_property
    def _padded(self) -> Tuple[np.ndarray, np.ndarray]:
        """Representative words padded into one array, with a validity mask."""
        width = max(len(reps) for reps in self.representatives)
        frame = self.word_length + 1
        padded = np.zeros((self.num_vertices, width, frame), dtype=np.int64)
        valid = np.zeros((self.num_vertices, width), dtype=bool)
        for v, reps in enumerate(self.representatives):
            for r, (word, _) in enumerate(reps):
                if len(word) <= frame:
                    padded[v, r] = pad_word(word, frame)
                    valid[v, r] = True
        return padded, valid

    def cell_graph(self, level: int) -> Dict[Word, Set[Word]]:
        """Adjacency of the level cells of the region through shared vertices."""
        if level not in self._cell_graphs:
            graph: Dict[Word, Set[Word]] = {}
            for v in range(self.num_vertices):
                cells = self.ancestors(v, level)
                for cell in cells:
                    graph.setdefault(cell, set()).update(c for c in cells if c != cell)
            self._cell_graphs[level] = graph
        return self._cell_graphs[level]


def enumerate_lattice(
    spec: FractalSpec, level: int, depth: int, cap: int = DEFAULT_SIZE_CAP
) -> LatticeGraph:
    """Enumerate the depth-n lattice of K^<level> with canonical vertex ids."""
    if level < 0 or depth < 0:
        raise ValueError("level and depth must be nonnegative")
    if not spec.has_identity_rotation:
        raise AxiomViolation("identity-rotation", "symbolic lattices need U = I")
    length = level + depth
    if spec.num_corners * spec.num_maps**length > cap:
        raise SizeLimit(
            f"{spec.num_corners} * {spec.num_maps}^{length} corners exceed the cap {cap}"
        )
    known: Dict[Rep, Tuple[Rep, ...]] = {}
    cell_reps: List[List[Rep]] = []
    for word in itertools.product(range(spec.num_maps), repeat=length):
        stripped = strip_word(word)
        corners = []
        for j in range(spec.num_corners):
            if (stripped, j) not in known:
                reps = vertex_representatives(spec, word, j, length)
                for rep in reps:
                    known[rep] = reps
            corners.append(known[(stripped, j)][0])
        cell_reps.append(corners)
    canonical = sorted({reps[0] for reps in known.values()}, key=rep_key)
    vertices = tuple(VertexId(CellAddress(-depth, word), corner) for word, corner in canonical)
    position = {rep: i for i, rep in enumerate(canonical)}
    representatives = tuple(known[rep] for rep in canonical)
    cell_vertices = np.array(
        [[position[rep] for rep in corners] for corners in cell_reps], dtype=np.int64
    )
    edge_set = set()
    adjacency: List[List[int]] = [[] for _ in vertices]
    for row in cell_vertices:
        for a, b in itertools.combinations(row.tolist(), 2):
            adjacency[a].append(b)
            adjacency[b].append(a)
            edge_set.add((min(a, b), max(a, b)))
    return LatticeGraph(
        spec=spec,
        level=level,
        depth=depth,
        vertices=vertices,
        representatives=representatives,
        cells=tuple(CellAddress(-depth, word) for word in itertools.product(range(spec.num_maps), repeat=length)),
        cell_vertices=cell_vertices,
        edges=tuple(sorted(edge_set)),
        neighbors=tuple(tuple(sorted(items)) for items in adjacency),
        index={vertex: i for i, vertex in enumerate(vertices)},
    )


def graph_distance(
    lattice: LatticeGraph, level: int, x: VertexId, y: VertexId
) -> int:
    """The chain distance d_level between two vertices of the region."""
    a = lattice.locate(x)
    b = lattice.locate(y)
    if a == b:
        return 0
    sources = set(lattice.ancestors(a, level))
    targets = set(lattice.ancestors(b, level))
    if sources & targets:
        return 1
    graph = lattice.cell_graph(level)
    distance = {cell: 0 for cell in sources}
    queue = deque(sorted(sources, key=lambda w: (len(w), w)))
    while queue:
        cell = queue.popleft()
        for other in sorted(graph.get(cell, ()), key=lambda w: (len(w), w)):
            if other not in distance:
                distance[other] = distance[cell] + 1
                if other in targets:
                    return 1 + distance[other]
                queue.append(other)
    raise OutOfLattice(f"no chain of level-{level} cells joins {x} and {y}")


def distance_matrix(lattice: LatticeGraph, level: int) -> np.ndarray:
    """All pairwise chain distances d_level on the region's vertices."""
    graph = lattice.cell_graph(level)
    cells = sorted(graph, key=lambda w: (len(w), w))
    position = {cell: i for i, cell in enumerate(cells)}
    rows, cols = [], []
    for cell, others in graph.items():
        for other in others:
            rows.append(position[cell])
            cols.append(position[other])
    adjacency = csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(cells), len(cells))
    )
    hops = csgraph.shortest_path(adjacency, unweighted=True)
    count = lattice.num_vertices
    result = np.full((count, count), np.inf)
    member = [[position[c] for c in lattice.ancestors(v, level)] for v in range(count)]
    for a in range(count):
        for b in range(a, count):
            if a == b:
                value = 0.0
            else:
                value = 1 + hops[np.ix_(member[a], member[b])].min()
            result[a, b] = result[b, a] = value
    return result.astype(np.int64)


def rank_of(lattice: LatticeGraph, level: int, vertex: VertexId) -> int:
    """Number of level cells of K^<infinity> meeting at a vertex."""
    index = lattice.locate(vertex)
    up = level + lattice.depth
    if up < 0:
        raise OutOfLattice(f"level {level} is below the working depth")
    found = set()
    for word, _ in lattice.representatives[index]:
        found.add(word[: len(word) - up] if len(word) > up else ())
    return len(found)


def common_level_matrix(
    lattice: LatticeGraph, rows: np.ndarray, cols: np.ndarray, chunk: int = 256
) -> np.ndarray:
    """Least level m with a common m-cell for every pair of vertices."""
    padded, valid = lattice._padded
    frame = padded.shape[2]
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    result = np.empty((len(rows), len(cols)), dtype=np.int64)
    b = padded[cols]
    for start in range(0, len(rows), chunk):
        part = rows[start : start + chunk]
        a = padded[part]
        best = np.full((len(part), len(cols)), -1, dtype=np.int64)
        for i in range(padded.shape[1]):
            for j in range(padded.shape[1]):
                equal = a[:, None, i, :] == b[None, :, j, :]
                prefix = np.cumprod(equal, axis=2).sum(axis=2)
                usable = valid[part, i][:, None] & valid[cols, j][None, :]
                best = np.maximum(best, np.where(usable, prefix, -1))
        result[start : start + chunk] = frame - lattice.depth - best
    return result


def vertex_count(lattice: LatticeGraph, level: int) -> int:
    """Number of V_0 vertices inside K^<level>."""
    return len(lattice.grid_sites(level))


def effective_resistance(lattice: LatticeGraph, first: int, second: int) -> float:
    """Resistance between two vertices with unit conductance on every edge."""
    count = lattice.num_vertices
    laplacian = np.zeros((count, count))
    for a, b in lattice.edges:
        laplacian[a, b] -= 1
        laplacian[b, a] -= 1
        laplacian[a, a] += 1
        laplacian[b, b] += 1
    keep = [v for v in range(count) if v != second]
    grounded = laplacian[np.ix_(keep, keep)]
    source = np.zeros(len(keep))
    source[keep.index(first)] = 1.0
    potential = linalg.solve(grounded, source, assume_a="sym")
    return float(potential[keep.index(first)])


def network_reduction_tau(spec: FractalSpec, depth: int = 1) -> float:
    """Time scale N R_depth / R_(depth-1) from corner-to-corner resistances."""
    resistances = []
    for n in (depth - 1, depth):
        lattice = enumerate_lattice(spec, 0, n)
        first, second = lattice.corner_indices(0)[:2]
        resistances.append(effective_resistance(lattice, first, second))
    return spec.num_maps * resistances[1] / resistances[0]


def lattice_to_json(lattice: LatticeGraph) -> Dict[str, object]:
    """Export a lattice with stable ordering.

    Each vertex carries its rank, the number of 0-cells of the region that
    meet at it, and the number of finest cells that contain it.
    """
    coordinates = lattice.coordinates
    return {
        "spec": {"name": lattice.spec.name, "hash": lattice.spec.spec_hash},
        "M": lattice.level,
        "n": lattice.depth,
        "vertices": [
            {
                "id": str(vertex),
                "x": float(coordinates[i, 0]),
                "y": float(coordinates[i, 1]),
                "rank": rank_of(lattice, 0, vertex),
                "finest_cells": lattice.rank_within(i, lattice.level),
            }
            for i, vertex in enumerate(lattice.vertices)
        ],
        "edges": [list(edge) for edge in lattice.edges],
        "cells": [str(cell) for cell in lattice.cells],
    }
