"""Good labelings of vertex lattices and the folding projections they induce."""

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import AxiomViolation, OutOfLattice
from .geometry import (
    CellAddress,
    LatticeGraph,
    VertexId,
    Word,
    descend,
    pad_word,
    point_in_polygon,
    strip_word,
)

Corners = Dict[Word, Tuple[int, ...]]


@dataclass(frozen=True)
class LabelAlphabet:
    """The k symbols carried by the corners of every complex."""

    symbols: Tuple[str, ...]

    @classmethod
    def of_size(cls, size: int) -> "LabelAlphabet":
        """Alphabet a1, ..., a_k."""
        return cls(tuple(f"a{i + 1}" for i in range(size)))

    @property
    def size(self) -> int:
        """Number of labels."""
        return len(self.symbols)


@dataclass(frozen=True)
class NoGLP:
    """A junction at which two complexes demand different labels."""

    order: int
    cell: CellAddress
    vertex: Optional[VertexId]
    expected: int
    found: int

    @property
    def glp(self) -> bool:
        """Always False."""
        return False

    def describe(self) -> str:
        """Name the vertex where the labeling breaks."""
        return (
            f"cell {self.cell} needs label {self.expected} at vertex "
            f"{self.vertex} which already carries {self.found}"
        )


@dataclass(frozen=True, eq=False)
class GoodLabeling:
    """Labels of the level-M vertices and the rotation of every M-complex."""

    order: int
    lattice: LatticeGraph
    alphabet: LabelAlphabet
    assignment: Dict[int, int]
    rotation_table: Dict[CellAddress, int]
    corners: Corners

    @property
    def glp(self) -> bool:
        """Always True."""
        return True

    def label_of(self, vertex: VertexId) -> int:
        """Label of a vertex of V_M."""
        index = self.lattice.locate(vertex)
        if index not in self.assignment:
            raise OutOfLattice(f"vertex {vertex} is not in V_{self.order}")
        return self.assignment[index]


def complex_cells(lattice: LatticeGraph, order: int) -> List[Word]:
    """Words of the M-complexes of the region, in address order."""
    count = max(lattice.level - order, 0)
    words = {
        strip_word(word)
        for word in itertools.product(range(lattice.spec.num_maps), repeat=count)
    }
    return sorted(words, key=lambda word: (len(word), word))


def complex_corners(lattice: LatticeGraph, order: int) -> Corners:
    """Lattice indices of the k corners of every M-complex of the region."""
    levels = order + lattice.depth
    return {
        cell: tuple(
            lattice.vertex_at(*descend(lattice.spec, cell, j, levels))
            for j in range(lattice.spec.num_corners)
        )
        for cell in complex_cells(lattice, order)
    }


def propagate_labels(
    corners: Corners, size: int
) -> Union[Tuple[Dict[int, int], Dict[Word, int]], Tuple[Word, int, int, int]]:
    """Spread the labels of the first complex to all others through junctions.

    Returns the labels and rotations, or a tuple (cell, vertex, expected,
    found) naming the first inconsistent junction.
    """
    cells = list(corners)
    incident: Dict[int, List[Tuple[Word, int]]] = {}
    for cell in cells:
        for j, vertex in enumerate(corners[cell]):
            incident.setdefault(vertex, []).append((cell, j))
    # seed a bijection on the corners of the first complex
    labels = {vertex: j for j, vertex in enumerate(corners[cells[0]])}
    rotation = {cells[0]: 0}
    queue = deque([cells[0]])
    while queue:
        cell = queue.popleft()
        for vertex in corners[cell]:
            for other, j in incident[vertex]:
                if other in rotation:
                    continue
                turn = (labels[vertex] - j) % size
                for jj, u in enumerate(corners[other]):
                    expected = (jj + turn) % size
                    if u in labels and labels[u] != expected:
                        return (other, u, expected, labels[u])
                    labels[u] = expected
                rotation[other] = turn
                queue.append(other)
    for cell in cells:
        if cell not in rotation:
            return (cell, corners[cell][0], -1, -1)
        for j, u in enumerate(corners[cell]):
            if labels[u] != (j + rotation[cell]) % size:
                return (cell, u, (j + rotation[cell]) % size, labels[u])
    return labels, rotation


def find_good_labeling(
    lattice: LatticeGraph, order: int
) -> Union[GoodLabeling, NoGLP]:
    """Search a good labeling of order M on a region reaching level M+1."""
    if order < 0 or lattice.level < order + 1:
        raise OutOfLattice(
            f"a labeling of order {order} needs K^<{order + 1}>, have K^<{lattice.level}>"
        )
    k = lattice.spec.num_corners
    corners = complex_corners(lattice, order)
    outcome = propagate_labels(corners, k)
    if len(outcome) == 4:  # noqa: PLR2004
        cell, vertex, expected, found = outcome  # type: ignore[misc]
        return NoGLP(
            order=order,
            cell=CellAddress(order, cell),
            vertex=lattice.vertices[vertex] if vertex >= 0 else None,
            expected=expected,
            found=found,
        )
    labels, rotation = outcome  # type: ignore[misc]
    return GoodLabeling(
        order=order,
        lattice=lattice,
        alphabet=LabelAlphabet.of_size(k),
        assignment=dict(labels),
        rotation_table={CellAddress(order, cell): r for cell, r in rotation.items()},
        corners=corners,
    )


def _turn(angle: float) -> np.ndarray:
    """Rotation matrix by angle."""
    return np.array(
        [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
    )


@dataclass(frozen=True, eq=False)
class FoldingMap:
    """The projection pi_M stored as one rigid motion per M-complex."""

    order: int
    labeling: GoodLabeling
    rotations: Dict[Word, int]
    translations: Dict[Word, np.ndarray]
    image: np.ndarray

    @property
    def lattice(self) -> LatticeGraph:
        """The lattice the labeling lives on."""
        return self.labeling.lattice

    @property
    def center(self) -> np.ndarray:
        """Centroid of K^<M>, the fixed point of every rotation."""
        return self.lattice.spec.scale**self.order * self.lattice.spec.centroid

    def rotate(self, x: np.ndarray, turn: int) -> np.ndarray:
        """Rotate x about the centre by turn k-th turns."""
        k = self.lattice.spec.num_corners
        return self.center + _turn(2 * math.pi * turn / k) @ (x - self.center)

    def containing_cell(self, point: np.ndarray) -> Word:
        """First M-complex, in address order, whose hull contains a point."""
        spec = self.lattice.spec
        for cell in sorted(self.rotations, key=lambda word: (len(word), word)):
            if point_in_polygon(spec.cell_corners(cell, self.order), point):
                return cell
        raise OutOfLattice(f"point {point.tolist()} is outside K^<{self.lattice.level}>")


def build_folding(labeling: GoodLabeling) -> FoldingMap:
    """Realize pi_M symbolically on every vertex of the labeled region."""
    lattice = labeling.lattice
    spec = lattice.spec
    k = spec.num_corners
    up = labeling.order + lattice.depth
    rotations = {cell.word: r for cell, r in labeling.rotation_table.items()}
    image = np.empty(lattice.num_vertices, dtype=np.int64)
    for x, reps in enumerate(lattice.representatives):
        targets = set()
        for word, corner in reps:
            padded = pad_word(word, max(len(word), up))
            ancestor = strip_word(padded[: len(padded) - up])
            if ancestor not in rotations:
                continue
            turn = rotations[ancestor]
            moved = tuple(spec.rotation_perm[turn][letter] for letter in padded[len(padded) - up :])
            targets.add(lattice.vertex_at(moved, (corner + turn) % k))
        # every containing complex must agree on the image
        if len(targets) != 1:
            raise AxiomViolation(
                "fold-consistency", f"vertex {lattice.vertices[x]} has images {sorted(targets)}"
            )
        image[x] = targets.pop()
    translations = {
        cell: spec.point(cell, 0, labeling.order) for cell in rotations
    }
    return FoldingMap(
        order=labeling.order,
        labeling=labeling,
        rotations=rotations,
        translations=translations,
        image=image,
    )


def project(
    fold: FoldingMap, x: Union[VertexId, Sequence[float], np.ndarray]
) -> Union[VertexId, np.ndarray]:
    """Apply pi_M to a vertex of the region or to a point of its hull."""
    if isinstance(x, VertexId):
        return fold.lattice.vertices[fold.image[fold.lattice.locate(x)]]
    point = np.asarray(x, dtype=float)
    cell = fold.containing_cell(point)
    return fold.rotate(point - fold.translations[cell], fold.rotations[cell])


def project_to_cell(
    fold: FoldingMap,
    cell: CellAddress,
    x: Union[VertexId, Sequence[float], np.ndarray],
) -> Union[VertexId, np.ndarray]:
    """Apply the projection onto one M-complex, its inverse motion after pi_M."""
    if cell.level != fold.order or cell.word not in fold.rotations:
        raise OutOfLattice(f"{cell} is not an M-complex of the folded region")
    lattice = fold.lattice
    spec = lattice.spec
    k = spec.num_corners
    turn = fold.rotations[cell.word]
    inverse = (k - turn) % k
    if not isinstance(x, VertexId):
        image = project(fold, x)
        return fold.translations[cell.word] + fold.rotate(np.asarray(image), inverse)
    y = fold.image[lattice.locate(x)]
    up = fold.order + lattice.depth
    for word, corner in lattice.representatives[y]:
        if len(word) <= up:
            suffix = tuple(spec.rotation_perm[inverse][letter] for letter in pad_word(word, up))
            return lattice.vertices[
                lattice.vertex_at(cell.word + suffix, (corner - turn) % k)
            ]
    raise OutOfLattice(f"the image of {x} has no cell inside K^<{fold.order}>")


def preimages(
    fold: FoldingMap, y: VertexId, level: int
) -> List[Tuple[VertexId, int]]:
    """All x in K^<level> with pi_M(x) = y, each with its rank in K^<level>."""
    lattice = fold.lattice
    target = lattice.locate(y)
    if level > lattice.level:
        raise OutOfLattice(f"K^<{level}> is larger than the folded region")
    if fold.image[target] != target:
        raise OutOfLattice(f"{y} is not a vertex of K^<{fold.order}>")
    inside = lattice.inside(level)
    return [
        (lattice.vertices[x], lattice.rank_within(x, level))
        for x in np.flatnonzero((fold.image == target) & inside)
    ]


def glp_report(outcome: Union[GoodLabeling, NoGLP]) -> Dict[str, object]:
    """Summary of a labeling search for export."""
    if isinstance(outcome, NoGLP):
        return {
            "glp": False,
            "order": outcome.order,
            "witness": {
                "cell": str(outcome.cell),
                "vertex": str(outcome.vertex),
                "expected": outcome.expected,
                "found": outcome.found,
            },
        }
    symbols = outcome.alphabet.symbols
    return {
        "glp": True,
        "order": outcome.order,
        "labeling": {
            str(outcome.lattice.vertices[v]): symbols[label]
            for v, label in sorted(outcome.assignment.items())
        },
    }


def rotation_rows(labeling: GoodLabeling) -> List[Tuple[str, int]]:
    """Rows (cell_address, rotation_index) of the rotation table."""
    return [
        (str(cell), turn)
        for cell, turn in sorted(labeling.rotation_table.items())
    ]
