"""Single-sphere forward model, minimum-norm inverse and sLORETA.

Units: positions in metres, dipole moments in µA·m, conductivity in S/m, so
lead-field entries come out in µV per µA·m.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .signal_core import DataError, Montage, read_header, read_matrix, write_matrix


@dataclass(frozen=True)
class HeadModel:
    sphere_radius_m: float = 0.09
    conductivity_s_per_m: float = 0.33

    def __post_init__(self):
        if not self.sphere_radius_m > 0:
            raise ValueError("sphere radius must be positive")
        if not self.conductivity_s_per_m > 0:
            raise ValueError("conductivity must be positive")


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    spacing_m: float
    voxels: np.ndarray  # (n_voxels, 3), lexicographic in (x, y, z)

    @classmethod
    def build(cls, head: HeadModel = HeadModel(), spacing_m: float = 0.01,
              fraction: float = 0.85) -> "VoxelGrid":
        limit = fraction * head.sphere_radius_m
        n = int(np.floor(limit / spacing_m))
        axis = np.arange(-n, n + 1) * spacing_m
        gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        pts = pts[np.linalg.norm(pts, axis=1) < limit]
        if len(pts) < 100:
            raise ValueError(f"voxel grid too coarse ({len(pts)} voxels)")
        return cls(spacing_m, pts)

    def __len__(self):
        return len(self.voxels)


@dataclass(frozen=True)
class Dipole:
    position: tuple
    moment: tuple

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "moment", tuple(float(v) for v in self.moment))


def sphere_potential(electrodes: np.ndarray, dipole_pos, sigma: float) -> np.ndarray:
    """Potential at points on the surface of a homogeneous sphere.

    Returns a (n_electrodes, 3) array: the potential for unit x, y and z
    moments. Closed form for a current dipole inside an insulated sphere.
    """
    r = np.asarray(electrodes, dtype=float)
    r0 = np.asarray(dipole_pos, dtype=float)
    d = r - r0
    dn = np.linalg.norm(d, axis=1)
    rn = np.linalg.norm(r, axis=1)
    if np.any(dn == 0):
        raise DataError("dipole coincides with an electrode")
    rd = np.einsum("ij,ij->i", r, d)
    g = 2 * d / dn[:, None] ** 3 + (r * dn[:, None] + rn[:, None] * d) / (
        (rn * dn * (rn * dn + rd))[:, None]
    )
    return g / (4 * np.pi * sigma)


def centering(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def average_reference(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=0, keepdims=True)


def electrode_positions(montage: Montage, head: HeadModel, scalp_only: bool = True) -> np.ndarray:
    labels = montage.scalp_labels if scalp_only else montage.labels
    return np.array([montage.positions[montage.index(l)] for l in labels]) * head.sphere_radius_m


def dipole_topography(montage: Montage, head: HeadModel, dipole: Dipole,
                      scalp_only: bool = False) -> np.ndarray:
    """Raw (not re-referenced) potential of one dipole at every montage channel."""
    pos = np.asarray(dipole.position)
    if np.linalg.norm(pos) >= head.sphere_radius_m:
        raise DataError("dipole outside the head")
    g = sphere_potential(electrode_positions(montage, head, scalp_only), pos,
                         head.conductivity_s_per_m)
    return g @ np.asarray(dipole.moment)


@dataclass(frozen=True, eq=False)
class LeadField:
    matrix: np.ndarray  # (n_electrodes, 3 * n_voxels), average-referenced
    grid: VoxelGrid
    model: HeadModel
    labels: tuple
    reference: str = "average"

    @property
    def n_electrodes(self) -> int:
        return self.matrix.shape[0]

    def block(self, j: int) -> np.ndarray:
        return self.matrix[:, 3 * j:3 * j + 3]

    def write(self, path) -> None:
        header = {
            "rows": self.matrix.shape[0],
            "cols": self.matrix.shape[1],
            "labels": ",".join(self.labels),
            "spacing_m": repr(self.grid.spacing_m),
            "radius_m": repr(self.model.sphere_radius_m),
            "conductivity_s_per_m": repr(self.model.conductivity_s_per_m),
            "reference": self.reference,
        }
        write_matrix(path, header, self.matrix)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_m", "y_m", "z_m"])
        for v in self.grid.voxels:
            w.writerow([repr(float(c)) for c in v])
        Path(str(path) + ".voxels.csv").write_bytes(buf.getvalue().encode("utf-8"))

    @classmethod
    def read(cls, path) -> "LeadField":
        h = read_header(path)
        rows, cols = int(h["rows"]), int(h["cols"])
        m = read_matrix(path, rows)
        if m.shape[1] != cols:
            raise DataError("lead-field column count does not match header")
        vox = np.loadtxt(str(path) + ".voxels.csv", delimiter=",", skiprows=1, ndmin=2)
        return cls(m, VoxelGrid(float(h["spacing_m"]), vox),
                   HeadModel(float(h["radius_m"]), float(h["conductivity_s_per_m"])),
                   tuple(h["labels"].split(",")), h.get("reference", "average"))


def build_lead_field(m: Montage, head: HeadModel = HeadModel(),
                     grid: Optional[VoxelGrid] = None) -> LeadField:
    """Average-referenced lead field for the scalp channels of ``m``."""
    if grid is None:
        grid = VoxelGrid.build(head)
    norms = np.linalg.norm(grid.voxels, axis=1)
    if np.any(norms >= head.sphere_radius_m):
        raise DataError("voxel on or outside the sphere surface")
    elec = electrode_positions(m, head)
    L = np.empty((len(elec), 3 * len(grid)))
    for j, v in enumerate(grid.voxels):
        L[:, 3 * j:3 * j + 3] = sphere_potential(elec, v, head.conductivity_s_per_m)
    return LeadField(average_reference(L), grid, head, m.scalp_labels)


def forward(lf: LeadField, sources: np.ndarray) -> np.ndarray:
    """X = L S for a stacked (3 * n_voxels,) source vector, or a matrix of them."""
    s = np.asarray(sources, dtype=float)
    if s.shape[0] != lf.matrix.shape[1]:
        raise DataError(f"source vector has {s.shape[0]} entries, lead field expects {lf.matrix.shape[1]}")
    return lf.matrix @ s


@dataclass(frozen=True, eq=False)
class InverseOperator:
    """Precomputed pieces shared by minimum-norm and sLORETA.

    ``kernel`` is Lᵀ (L Lᵀ + α C)⁺ and ``block_weights[j]`` is the
    pseudo-inverse of voxel j's 3x3 resolution block.
    """

    lead_field: LeadField
    alpha: float
    kernel: np.ndarray
    block_weights: np.ndarray


def _gram_pinv(lf: LeadField, alpha: float) -> np.ndarray:
    L = lf.matrix
    n = L.shape[0]
    C = centering(n)
    gram = L @ L.T
    lam = alpha * np.trace(gram) / n
    evals, evecs = np.linalg.eigh(C @ (gram + lam * C) @ C)
    # the average-reference direction is the known null space
    keep = evals > evals.max() * 1e-12
    return (evecs[:, keep] / evals[keep]) @ evecs[:, keep].T


def make_inverse(lf: LeadField, alpha: float = 0.0) -> InverseOperator:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    G = _gram_pinv(lf, alpha)
    L = lf.matrix
    kernel = L.T @ G
    n_vox = L.shape[1] // 3
    Lb = L.reshape(L.shape[0], n_vox, 3)
    Kb = kernel.reshape(n_vox, 3, L.shape[0])
    blocks = np.einsum("vie,evj->vij", Kb, Lb)
    blocks = 0.5 * (blocks + blocks.transpose(0, 2, 1))
    weights = np.linalg.pinv(blocks, rcond=1e-10, hermitian=True)
    return InverseOperator(lf, alpha, kernel, weights)


def _check_x(lf: LeadField, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != lf.n_electrodes:
        raise DataError(f"sensor vector has {x.shape[0]} entries, lead field has {lf.n_electrodes}")
    return x


def minimum_norm(lf, x, alpha: float = 0.0) -> np.ndarray:
    """Ŝ = Lᵀ (L Lᵀ + α C)⁺ x, with α given as a fraction of the mean
    eigenvalue of L Lᵀ. ``lf`` may be a LeadField or a prepared InverseOperator."""
    op = lf if isinstance(lf, InverseOperator) else make_inverse(lf, alpha)
    x = _check_x(op.lead_field, x)
    return op.kernel @ average_reference(x)


@dataclass(frozen=True, eq=False)
class SourceMap:
    grid: VoxelGrid
    power: np.ndarray
    method: str

    def argmax(self) -> int:
        return int(np.argmax(self.power))  # first index on ties

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_m", "y_m", "z_m", "power"])
        for v, p in zip(self.grid.voxels, self.power):
            w.writerow([repr(float(v[0])), repr(float(v[1])), repr(float(v[2])), repr(float(p))])
        return buf.getvalue()

    def summary_csv(self) -> str:
        j = self.argmax()
        v = self.grid.voxels[j]
        return ("argmax_x,argmax_y,argmax_z,max_power\n"
                f"{float(v[0])!r},{float(v[1])!r},{float(v[2])!r},{float(self.power[j])!r}\n")


def _block_power(s_hat: np.ndarray, weights: Optional[np.ndarray]) -> np.ndarray:
    sb = s_hat.reshape(-1, 3, *s_hat.shape[1:])
    if weights is None:
        return np.sum(sb ** 2, axis=1)
    if s_hat.ndim == 1:
        return np.einsum("vi,vij,vj->v", sb, weights, sb)
    return np.einsum("vit,vij,vjt->vt", sb, weights, sb)


def minimum_norm_power(lf, x, alpha: float = 0.0) -> SourceMap:
    """Squared current-density magnitude per voxel of the minimum-norm estimate."""
    op = lf if isinstance(lf, InverseOperator) else make_inverse(lf, alpha)
    s = minimum_norm(op, x)
    return SourceMap(op.lead_field.grid, _block_power(s, None), "minimum_norm")


def sloreta(lf, x, alpha: float = 0.0) -> SourceMap:
    """Minimum-norm estimate standardized by its 3x3 resolution blocks."""
    op = lf if isinstance(lf, InverseOperator) else make_inverse(lf, alpha)
    s = minimum_norm(op, x)
    power = np.maximum(_block_power(s, op.block_weights), 0.0)
    return SourceMap(op.lead_field.grid, power, "sloreta")


def localization_error(smap: SourceMap, truth: Dipole) -> float:
    if not np.any(smap.power > 0):
        raise DataError("source map is all zero")
    return float(np.linalg.norm(smap.grid.voxels[smap.argmax()] - np.asarray(truth.position)))


def tangential_part(position, moment) -> np.ndarray:
    p = np.asarray(position, dtype=float)
    q = np.asarray(moment, dtype=float)
    rn = np.linalg.norm(p)
    if rn == 0:
        return q
    u = p / rn
    return q - (q @ u) * u


def eligible_voxels(grid: VoxelGrid, head: HeadModel, min_radius_fraction: float = 0.3) -> np.ndarray:
    return np.flatnonzero(np.linalg.norm(grid.voxels, axis=1) >= min_radius_fraction * head.sphere_radius_m)


def random_moment(rng: np.random.Generator, position, min_tangential: float = 0.2) -> np.ndarray:
    """Unit moment with at least ``min_tangential`` of its length tangential."""
    while True:
        q = rng.normal(size=3)
        q /= np.linalg.norm(q)
        if np.linalg.norm(tangential_part(position, q)) >= min_tangential:
            return q


@dataclass
class BenchResult:
    method: str
    errors: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def max(self) -> float:
        return float(np.max(self.errors))


def benchmark_localization(lf: LeadField, n_dipoles: Optional[int] = 200, snr: Optional[float] = None,
                           alpha: float = 0.0, seed: int = 0, min_radius_fraction: float = 0.3) -> dict:
    """Localization errors of sLORETA and minimum-norm for on-grid single dipoles.

    ``n_dipoles=None`` sweeps every eligible voxel once. ``snr`` is the ratio
    of signal to noise vector norms on the sensors; ``None`` means noise-free.
    """
    rng = np.random.default_rng(seed)
    elig = eligible_voxels(lf.grid, lf.model, min_radius_fraction)
    if n_dipoles is None:
        chosen = elig
    else:
        chosen = rng.choice(elig, size=n_dipoles, replace=n_dipoles > len(elig))
    op = make_inverse(lf, alpha)
    n_vox = len(lf.grid)
    S = np.zeros((3 * n_vox, len(chosen)))
    for t, j in enumerate(chosen):
        S[3 * j:3 * j + 3, t] = random_moment(rng, lf.grid.voxels[j])
    X = forward(lf, S)
    if snr is not None:
        noise = average_reference(rng.normal(size=X.shape))
        scale = np.linalg.norm(X, axis=0) / (snr * np.linalg.norm(noise, axis=0))
        X = X + noise * scale
    s_hat = op.kernel @ average_reference(X)
    truth = lf.grid.voxels[chosen]
    out = {}
    for method, weights in (("sloreta", op.block_weights), ("minimum_norm", None)):
        power = _block_power(s_hat, weights)
        best = np.argmax(power, axis=0)
        out[method] = BenchResult(method, np.linalg.norm(lf.grid.voxels[best] - truth, axis=1))
    return out
