"""12D constellations: the dual-ring Matryoshka format and the PDM-QPSK reference.

A 12D symbol is stored as 6 complex coordinates in the order
(mode1-X, mode1-Y, mode2-X, mode2-Y, mode3-X, mode3-Y).  Coordinates ``2m`` and
``2m + 1`` form the 4D block of spatial mode ``m``.

Labels are 12-bit words.  Bit ``i`` of a word is ``(word >> (11 - i)) & 1``,
i.e. bit 0 is the most significant.  Points are always stored in label order,
so ``points[w]`` is the symbol carrying word ``w``.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_BITS = 12
N_POINTS = 1 << N_BITS
N_COORDS = 6

# Gray sequence around the circle: quadrant q carries the 2-bit label GRAY[q].
GRAY = np.array([0b00, 0b01, 0b11, 0b10])
GRAY_INV = np.argsort(GRAY)

COORD_NAMES = ("m1x", "m1y", "m2x", "m2y", "m3x", "m3y")


class Scheme(str, enum.Enum):
    MATRYOSHKA_12D = "matryoshka"
    PDM_QPSK_12D = "pdm-qpsk"


class CouplingRule(str, enum.Enum):
    """How the ring choices are tied together before parity puncturing."""

    GLOBAL_RING_GLOBAL_PARITY = "global"
    PER_BLOCK_PARITY = "per-block"


@dataclass(frozen=True)
class RingGeometry:
    """Two 4-point rings per 2D set; ring 1 is rotated by ``offset_angle``.

    Radii are pre-normalization amplitudes; only their ratio matters.
    """

    r_inner: float = 1.0
    r_outer: float = 1.38
    offset_angle: float = 0.15
    base_angle: float = np.pi / 4

    def __post_init__(self):
        if not (self.r_inner > 0 and self.r_outer > 0):
            raise ValueError("ring radii must be positive")
        if not 0 < self.offset_angle < np.pi / 2:
            raise ValueError("offset_angle must lie in (0, pi/2)")

    @property
    def radius_ratio(self) -> float:
        return self.r_outer / self.r_inner


@dataclass(frozen=True, eq=False)
class LabeledConstellation:
    """An immutable labeled 12D constellation.

    Besides the point table, the 2D structure used to build it is kept:
    ``alphabet[k, r, q]`` is the complex value of coordinate ``k`` on ring
    ``r`` at quadrant ``q`` and ``rings``/``quadrants`` give that index pair for
    every point.  ``blocks`` lists coordinate groups that are mutually
    independent (the constellation is their Cartesian product).
    """

    points: np.ndarray
    labels: np.ndarray
    scheme: Scheme
    alphabet: np.ndarray
    rings: np.ndarray
    quadrants: np.ndarray
    blocks: tuple[tuple[int, ...], ...]
    geometry: RingGeometry | None = None
    coupling_rule: CouplingRule | None = None
    _bits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for arr in (self.points, self.labels, self.alphabet, self.rings, self.quadrants):
            arr.setflags(write=False)
        bits = label_bits(self.labels)
        bits.setflags(write=False)
        object.__setattr__(self, "_bits", bits)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def bits(self) -> np.ndarray:
        """(4096, 12) array of label bits, bit 0 first."""
        return self._bits

    @property
    def name(self) -> str:
        return self.scheme.value

    @property
    def real_points(self) -> np.ndarray:
        """Points as (4096, 12) real vectors (all real parts, then all imaginary parts)."""
        return np.concatenate([self.points.real, self.points.imag], axis=1)

    def energies(self) -> np.ndarray:
        return np.sum(np.abs(self.points) ** 2, axis=1)

    def block_energies(self) -> np.ndarray:
        """(4096, 3) energy of each 4D block."""
        p = np.abs(self.points) ** 2
        return p[:, 0::2] + p[:, 1::2]


def label_bits(words) -> np.ndarray:
    """Expand 12-bit words to bit arrays of shape (..., 12), bit 0 first."""
    words = np.asarray(words, dtype=np.int64)
    shifts = np.arange(N_BITS - 1, -1, -1)
    return ((words[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_words(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return bits @ (1 << np.arange(N_BITS - 1, -1, -1))


def _phase_quadrants(words: np.ndarray) -> np.ndarray:
    """Quadrant index of each of the 6 coordinates from its 2 Gray-coded bits."""
    bits = label_bits(words)
    pairs = 2 * bits[:, 0::2] + bits[:, 1::2]
    return GRAY_INV[pairs]


def _ring_alphabet(geometry: RingGeometry) -> np.ndarray:
    radii = np.array([geometry.r_inner, geometry.r_outer])
    angles = (
        geometry.base_angle
        + np.array([0.0, geometry.offset_angle])[:, None]
        + np.arange(4)[None, :] * np.pi / 2
    )
    return radii[:, None] * np.exp(1j * angles)


def matryoshka_structure(words, rule: CouplingRule = CouplingRule.GLOBAL_RING_GLOBAL_PARITY):
    """Ring and quadrant indices of the Matryoshka points carrying ``words``.

    The 12 label bits are the Gray phase bits of the 6 coordinates.  The ring
    bit is their parity (so the 13-bit word ring+phase always has even
    weight).  Within every 4D block the two polarizations sit on different
    rings; the ring bit says which one is on ring 0.
    """
    words = np.asarray(words, dtype=np.int64)
    bits = label_bits(words)
    quadrants = _phase_quadrants(words)
    if rule is CouplingRule.GLOBAL_RING_GLOBAL_PARITY:
        ring_bit = np.bitwise_xor.reduce(bits, axis=1)[:, None].repeat(3, axis=1)
    elif rule is CouplingRule.PER_BLOCK_PARITY:
        ring_bit = np.bitwise_xor.reduce(bits.reshape(-1, 3, 4), axis=2)
    else:
        raise ValueError(f"unknown coupling rule {rule!r}")
    rings = np.empty(quadrants.shape, dtype=np.int8)
    rings[:, 0::2] = ring_bit
    rings[:, 1::2] = 1 - ring_bit
    return rings, quadrants.astype(np.int8)


def _normalized(points: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum(np.abs(points) ** 2, axis=1))))


def build_matryoshka(
    geometry: RingGeometry | None = None,
    rule: CouplingRule = CouplingRule.GLOBAL_RING_GLOBAL_PARITY,
) -> LabeledConstellation:
    """Build the 4096-point 12D Matryoshka constellation at unit average energy.

    Each 2D set holds 8 points: 4 on ring 0 at ``base + k*pi/2`` and 4 on
    ring 1 at ``base + offset + k*pi/2``.  Under the global rule a single
    ring bit (the parity of the 12 label bits) fixes the ring pattern of all
    three 4D blocks; under the per-block rule each block carries its own
    ring bit equal to the parity of its 4 label bits.
    """
    geometry = geometry or RingGeometry()
    rule = CouplingRule(rule)
    labels = np.arange(N_POINTS)
    rings, quadrants = matryoshka_structure(labels, rule)
    ring_points = _ring_alphabet(geometry)
    points = ring_points[rings, quadrants]
    scale = _normalized(points)
    alphabet = np.broadcast_to(ring_points / scale, (N_COORDS, 2, 4)).copy()
    if rule is CouplingRule.GLOBAL_RING_GLOBAL_PARITY:
        blocks = (tuple(range(N_COORDS)),)
    else:
        blocks = ((0, 1), (2, 3), (4, 5))
    return LabeledConstellation(
        points=points / scale,
        labels=labels,
        scheme=Scheme.MATRYOSHKA_12D,
        alphabet=alphabet,
        rings=rings,
        quadrants=quadrants,
        blocks=blocks,
        geometry=geometry,
        coupling_rule=rule,
    )


def build_pdm_qpsk() -> LabeledConstellation:
    """Gray-mapped QPSK on each of the 6 coordinates, 2 bits each.

    Label 0 puts every coordinate at ``(1 + 1j) / sqrt(12)``.
    """
    labels = np.arange(N_POINTS)
    quadrants = _phase_quadrants(labels).astype(np.int8)
    qpsk = np.exp(1j * (np.pi / 4 + np.arange(4) * np.pi / 2)) / np.sqrt(N_COORDS)
    return LabeledConstellation(
        points=qpsk[quadrants],
        labels=labels,
        scheme=Scheme.PDM_QPSK_12D,
        alphabet=np.broadcast_to(qpsk, (N_COORDS, 1, 4)).copy(),
        rings=np.zeros_like(quadrants),
        quadrants=quadrants,
        blocks=tuple((k,) for k in range(N_COORDS)),
    )


def build(scheme, geometry: RingGeometry | None = None, rule=CouplingRule.GLOBAL_RING_GLOBAL_PARITY):
    scheme = Scheme(scheme)
    if scheme is Scheme.PDM_QPSK_12D:
        return build_pdm_qpsk()
    return build_matryoshka(geometry, rule)


def pairwise_sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of complex arrays (n, 6) and (m, 6)."""
    ar = np.concatenate([a.real, a.imag], axis=-1)
    br = np.concatenate([b.real, b.imag], axis=-1)
    d2 = ar @ (-2.0 * br.T)
    d2 += np.einsum("ij,ij->i", ar, ar)[:, None]
    d2 += np.einsum("ij,ij->i", br, br)[None, :]
    return np.maximum(d2, 0.0, out=d2)


def min_distance(c: LabeledConstellation, chunk: int = 512, rtol: float = 1e-9) -> tuple[float, int]:
    """Exact minimum pairwise distance and the number of pairs attaining it."""
    pts = c.points
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two points")
    best = np.inf
    count = 0
    for start in range(0, n, chunk):
        block = pts[start : start + chunk]
        d2 = pairwise_sq_distances(block, pts)
        rows = np.arange(len(block))
        # keep each unordered pair once
        d2[np.arange(n)[None, :] <= (start + rows)[:, None]] = np.inf
        m = d2.min()
        if m < best * (1 - rtol):
            best = m
            count = int(np.count_nonzero(d2 <= best * (1 + rtol)))
        elif m <= best * (1 + rtol):
            count += int(np.count_nonzero(d2 <= best * (1 + rtol)))
    return float(np.sqrt(best)), count


def projection_2d(c: LabeledConstellation, coord_index: int, decimals: int = 12):
    """Distinct values taken by one complex coordinate, with usage counts.

    Returns a list of ``(point, count)`` sorted by angle, counts summing to 4096.
    """
    if not 0 <= coord_index < N_COORDS:
        raise IndexError(f"coord_index must be in 0..5, got {coord_index}")
    col = c.points[:, coord_index]
    keys = np.round(col.real, decimals) + 1j * np.round(col.imag, decimals)
    values, counts = np.unique(keys, return_counts=True)
    order = np.argsort(np.mod(np.angle(values), 2 * np.pi))
    return [(complex(values[i]), int(counts[i])) for i in order]


def power_stats(c: LabeledConstellation) -> dict:
    e = c.energies()
    be = c.block_energies()
    return {
        "mean_energy": float(e.mean()),
        "energy_spread": float(e.max() - e.min()),
        "block_energy_spread": float(be.max() - be.min()),
        "max_modulus": float(np.abs(c.points).max()),
        "min_modulus": float(np.abs(c.points).min()),
    }


CSV_HEADER = (
    ["label"]
    + [f"{part}_{name}" for name in COORD_NAMES for part in ("re", "im")]
    + ["energy", "energy_m1", "energy_m2", "energy_m3"]
)


def to_csv(c: LabeledConstellation, path=None) -> str:
    """Write the constellation as CSV (17 columns).

    One ``#`` comment line names the scheme, then the header row: hex label,
    re/im of the 6 coordinates, total energy and the energy of each 4D block.
    """
    buf = io.StringIO()
    buf.write(f"# {c.name} 12D constellation, {len(c)} points, label bit 0 = MSB\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    energies = c.energies()
    blocks = c.block_energies()
    for label, row, e, be in zip(c.labels, c.points, energies, blocks):
        vals = []
        for z in row:
            vals += [repr(float(z.real)), repr(float(z.imag))]
        vals += [repr(float(e))] + [repr(float(v)) for v in be]
        writer.writerow([f"{int(label):03x}"] + vals)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_csv(path_or_text) -> tuple[np.ndarray, np.ndarray]:
    """Parse a constellation CSV back into ``(labels, points)``."""
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    lines = [ln for ln in io.StringIO(text) if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if rows[0] != CSV_HEADER:
        raise ValueError("unexpected constellation CSV header")
    labels = np.array([int(r[0], 16) for r in rows[1:]])
    vals = np.array([[float(v) for v in r[1:13]] for r in rows[1:]])
    points = vals[:, 0::2] + 1j * vals[:, 1::2]
    return labels, points
