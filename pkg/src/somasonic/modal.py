"""Mass/stiffness assembly and modal solution.

The baseline discretization is a lumped-mass shell: membrane springs on the
source-polygon edges plus hinge cross springs scaled by the shear modulus,
which keeps the model real-time friendly while preserving the frequency
scaling sqrt(E/rho) that makes materials audibly distinct. A straight rod
assembly is provided as the one-dimensional reference path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .errors import ModalError
from .geometry import TriMesh
from .tissue import ModelParams

CACHE_FORMAT_VERSION = 1

# Eigenvalues below this fraction of the stiffness scale count as rigid-body.
RIGID_TOL = 1e-9

# Upper bound on the damping ratio of the highest retained mode.
DAMPING_CAP = 0.3

DEFAULT_MAX_MODES = 64
DEFAULT_THICKNESS = 0.002

_DENSE_LIMIT = 1500


@dataclass(frozen=True)
class AssembledSystem:
    """Lumped diagonal mass and sparse symmetric PSD stiffness."""

    mass: np.ndarray  # (n_dof,) positive diagonal
    stiffness: sp.csr_matrix  # (n_dof, n_dof)
    vertex_count: int
    dof_per_vertex: int
    boundary: frozenset[int] = frozenset()  # fixed vertex indices

    def __post_init__(self):
        if np.any(self.mass <= 0):
            raise ModalError("mass entries must be positive")
        if self.stiffness.shape != (len(self.mass), len(self.mass)):
            raise ModalError("stiffness shape mismatch")

    @property
    def n_dof(self) -> int:
        return len(self.mass)

    def free_dof(self) -> np.ndarray:
        fixed = np.zeros(self.n_dof, dtype=bool)
        for v in self.boundary:
            fixed[v * self.dof_per_vertex : (v + 1) * self.dof_per_vertex] = True
        return np.nonzero(~fixed)[0]


@dataclass(frozen=True)
class ModalModel:
    """Retained eigen attributes of one structure."""

    frequencies: np.ndarray  # rad/s, ascending
    damping_ratios: np.ndarray
    mode_shapes: np.ndarray  # (n_dof, n_modes), mass-orthonormal
    dof_per_vertex: int
    pitch_scale: float = 1.0
    rigid_modes_excluded: int = 0

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.frequencies / (2.0 * np.pi)

    @property
    def fundamental_hz(self) -> float:
        return float(self.frequencies[0] / (2.0 * np.pi))

    def vertex_gains(self, vertex: int, direction: np.ndarray | None = None) -> np.ndarray:
        """Per-mode gain for excitation/pickup at a vertex.

        For shell systems the 3-DOF shape is projected onto ``direction``
        (typically the vertex normal); rod systems are scalar already.
        """
        d = self.dof_per_vertex
        rows = self.mode_shapes[vertex * d : (vertex + 1) * d]
        if d == 1:
            return rows[0].copy()
        if direction is None:
            raise ModalError("direction required for multi-DOF systems")
        direction = np.asarray(direction, dtype=np.float64)
        return direction @ rows


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def assemble_shell(mesh: TriMesh, params: ModelParams, thickness: float = DEFAULT_THICKNESS) -> AssembledSystem:
    """Shell system over a surface mesh: 3 DOF per vertex.

    Vertex masses use the mixed Voronoi area; membrane springs sit on the
    source-polygon edges with k = E*t*(dual length / edge length); hinge
    cross springs over interior triangle edges carry G = E/(2(1+nu)).
    """
    if thickness <= 0:
        raise ModalError("thickness must be positive")
    _require_connected(mesh)
    areas = vertex_voronoi_areas(mesh)
    mass3 = np.repeat(params.density * thickness * areas, 3)
    if np.any(mass3 <= 0):
        raise ModalError("mesh has isolated vertices with zero area")

    springs_a, springs_b, springs_k = [], [], []

    # Membrane springs on the original connectivity.
    dual = _edge_dual_lengths(mesh)
    v = mesh.vertices
    for (a, b), dl in zip(mesh.edges, dual):
        length = float(np.linalg.norm(v[b] - v[a]))
        if length == 0 or dl == 0:
            continue
        springs_a.append(a)
        springs_b.append(b)
        springs_k.append(params.young_modulus * thickness * dl / length)

    # Hinge cross springs between opposite vertices of adjacent triangles.
    shear = params.young_modulus / (2.0 * (1.0 + params.poisson))
    for (pk, pl), hinge_len in _hinge_pairs(mesh):
        span = float(np.linalg.norm(v[pl] - v[pk]))
        if span == 0:
            continue
        springs_a.append(pk)
        springs_b.append(pl)
        springs_k.append(shear * thickness * hinge_len / span)

    stiffness = _spring_stiffness(
        v, np.asarray(springs_a), np.asarray(springs_b), np.asarray(springs_k)
    )
    return AssembledSystem(
        mass=mass3,
        stiffness=stiffness,
        vertex_count=len(v),
        dof_per_vertex=3,
    )


def assemble_rod(
    length: float,
    area: float,
    segments: int,
    params: ModelParams,
    fixed_ends: bool = True,
) -> AssembledSystem:
    """Axial rod: tridiagonal K with k = EA/h, lumped masses rho*A*h.

    Interior nodes carry a full segment mass, end nodes half a segment.
    """
    if segments < 1 or length <= 0 or area <= 0:
        raise ModalError("need positive length/area and >= 1 segment")
    h = length / segments
    k = params.young_modulus * area / h
    n = segments + 1
    m = np.full(n, params.density * area * h)
    m[0] /= 2.0
    m[-1] /= 2.0
    main = np.full(n, 2.0 * k)
    main[0] = main[-1] = k
    off = np.full(n - 1, -k)
    stiffness = sp.diags([off, main, off], offsets=(-1, 0, 1), format="csr")
    boundary = frozenset({0, n - 1}) if fixed_ends else frozenset()
    return AssembledSystem(
        mass=m,
        stiffness=stiffness,
        vertex_count=n,
        dof_per_vertex=1,
        boundary=boundary,
    )


def vertex_voronoi_areas(mesh: TriMesh) -> np.ndarray:
    """Mixed Voronoi vertex areas (cotangent weights, obtuse fallback)."""
    v = mesh.vertices
    f = mesh.faces
    areas = np.zeros(len(v))
    tri = v[f]
    for corner in range(3):
        p = tri[:, corner]
        q = tri[:, (corner + 1) % 3]
        r = tri[:, (corner + 2) % 3]
        # Angles at q and r oppose the edges adjacent to p.
        cot_q = _cotangent(p - q, r - q)
        cot_r = _cotangent(p - r, q - r)
        pq2 = ((p - q) ** 2).sum(axis=1)
        pr2 = ((p - r) ** 2).sum(axis=1)
        voronoi = (pr2 * cot_q + pq2 * cot_r) / 8.0
        t_area = 0.5 * np.linalg.norm(np.cross(q - p, r - p), axis=1)
        cot_p = _cotangent(q - p, r - p)
        obtuse_any = (cot_p < 0) | (cot_q < 0) | (cot_r < 0)
        obtuse_here = cot_p < 0
        contrib = np.where(
            obtuse_any, np.where(obtuse_here, t_area / 2.0, t_area / 4.0), voronoi
        )
        np.add.at(areas, f[:, corner], contrib)
    return areas


def _cotangent(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    cross = np.linalg.norm(np.cross(u, w), axis=1)
    cross[cross == 0] = np.finfo(float).tiny
    return np.einsum("ij,ij->i", u, w) / cross


def _edge_dual_lengths(mesh: TriMesh) -> np.ndarray:
    """Length of the barycentric dual edge for every source edge."""
    v = mesh.vertices
    bary = v[mesh.faces].mean(axis=1)
    edge_index = {tuple(e): i for i, e in enumerate(map(tuple, mesh.edges))}
    dual = np.zeros(len(mesh.edges))
    for t, (a, b, c) in enumerate(mesh.faces):
        for (p, q) in ((a, b), (b, c), (c, a)):
            key = (p, q) if p < q else (q, p)
            i = edge_index.get(key)
            if i is None:  # triangulation diagonal not in source connectivity
                continue
            mid = (v[p] + v[q]) / 2.0
            dual[i] += float(np.linalg.norm(bary[t] - mid))
    return dual


def _hinge_pairs(mesh: TriMesh):
    """(opposite-vertex pair, hinge edge length) per interior triangle edge."""
    v = mesh.vertices
    owners: dict[tuple[int, int], list[int]] = {}
    for a, b, c in mesh.faces:
        for (p, q, o) in ((a, b, c), (b, c, a), (c, a, b)):
            key = (p, q) if p < q else (q, p)
            owners.setdefault(key, []).append(o)
    out = []
    for (p, q), opp in owners.items():
        if len(opp) == 2 and opp[0] != opp[1]:
            out.append(((opp[0], opp[1]), float(np.linalg.norm(v[q] - v[p]))))
    return out


def _spring_stiffness(
    positions: np.ndarray, a: np.ndarray, b: np.ndarray, k: np.ndarray
) -> sp.csr_matrix:
    """Central-force spring network stiffness, 3 DOF per vertex."""
    n_dof = 3 * len(positions)
    if len(a) == 0:
        return sp.csr_matrix((n_dof, n_dof))
    d = positions[b] - positions[a]
    lens = np.linalg.norm(d, axis=1, keepdims=True)
    lens[lens == 0] = 1.0
    n = d / lens
    blocks = k[:, None, None] * (n[:, :, None] * n[:, None, :])  # (ns, 3, 3)

    rows, cols, vals = [], [], []
    for (ia, ib, sign) in ((a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)):
        base_r = (3 * ia)[:, None, None] + np.arange(3)[None, :, None]
        base_c = (3 * ib)[:, None, None] + np.arange(3)[None, None, :]
        rows.append(np.broadcast_to(base_r, blocks.shape).ravel())
        cols.append(np.broadcast_to(base_c, blocks.shape).ravel())
        vals.append(sign * blocks.ravel())
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_dof, n_dof),
    ).tocsr()
    return (K + K.T) / 2.0  # enforce exact symmetry


def _require_connected(mesh: TriMesh) -> None:
    n = len(mesh.vertices)
    if len(mesh.edges) == 0:
        raise ModalError("mesh has no edges")
    adj = sp.coo_matrix(
        (np.ones(len(mesh.edges)), (mesh.edges[:, 0], mesh.edges[:, 1])),
        shape=(n, n),
    )
    n_comp, _ = csgraph.connected_components(adj, directed=False)
    if n_comp != 1:
        raise ModalError(
            f"{mesh.structure_id or 'mesh'}: {n_comp} disconnected components; "
            "register each component as its own structure"
        )


# ---------------------------------------------------------------------------
# Eigensolution
# ---------------------------------------------------------------------------


def compute_modes(
    system: AssembledSystem, max_modes: int = DEFAULT_MAX_MODES, loss_factor: float = 0.01
) -> ModalModel:
    """Solve K phi = w^2 M phi, drop rigid-body modes, attach damping.

    Damping ratios follow zeta_i = loss/2 + beta*w_i/2 with beta picked so
    the top retained mode lands at ``loss_factor`` (capped at 0.3).
    """
    if max_modes < 1:
        raise ModalError("max_modes must be >= 1")
    if not (0 < loss_factor):
        raise ModalError("loss_factor must be positive")
    free = system.free_dof()
    if len(free) == 0:
        raise ModalError("all DOF are fixed")
    K = system.stiffness[free][:, free]
    m = system.mass[free]

    # Symmetric whitening: A = M^-1/2 K M^-1/2 keeps the problem standard.
    inv_sqrt_m = 1.0 / np.sqrt(m)
    lam_bound = _gershgorin_bound(K, inv_sqrt_m)

    n = len(free)
    if n <= _DENSE_LIMIT:
        A = (K.multiply(inv_sqrt_m[None, :])).multiply(inv_sqrt_m[:, None]).toarray()
        A = (A + A.T) / 2.0
        lam, psi = scipy.linalg.eigh(A)
    else:
        A = sp.diags(inv_sqrt_m) @ K @ sp.diags(inv_sqrt_m)
        A = (A + A.T) / 2.0
        want = min(n - 1, max_modes + 8)
        try:
            lam, psi = spla.eigsh(A.tocsc(), k=want, sigma=-lam_bound * 1e-8, which="LM")
        except Exception as exc:  # eigsh convergence failure
            raise ModalError(f"eigensolver failed: {exc}") from exc
        order = np.argsort(lam)
        lam, psi = lam[order], psi[:, order]

    if lam[0] < -1e-6 * lam_bound:
        raise ModalError("stiffness matrix is not PSD within tolerance")
    lam = np.clip(lam, 0.0, None)

    flexible = lam >= RIGID_TOL * lam_bound
    n_rigid = int(np.argmax(flexible)) if flexible.any() else len(lam)
    if not flexible.any():
        raise ModalError("no flexible modes found")
    keep = slice(n_rigid, min(n_rigid + max_modes, len(lam)))
    lam_keep = lam[keep]
    psi_keep = psi[:, keep]

    omega = np.sqrt(lam_keep)
    # Un-whiten: phi = M^-1/2 psi is mass-orthonormal by construction.
    shapes_free = psi_keep * inv_sqrt_m[:, None]
    shapes = np.zeros((system.n_dof, shapes_free.shape[1]))
    shapes[free] = shapes_free

    zeta = _damping_ratios(omega, loss_factor)
    return ModalModel(
        frequencies=omega,
        damping_ratios=zeta,
        mode_shapes=shapes,
        dof_per_vertex=system.dof_per_vertex,
        rigid_modes_excluded=n_rigid,
    )


def _gershgorin_bound(K: sp.spmatrix, inv_sqrt_m: np.ndarray) -> float:
    """Upper bound on the largest whitened eigenvalue (row-sum bound)."""
    absA = abs(K).multiply(inv_sqrt_m[None, :]).multiply(inv_sqrt_m[:, None])
    bound = float(np.asarray(absA.sum(axis=1)).max())
    return bound if bound > 0 else 1.0


def _damping_ratios(omega: np.ndarray, loss_factor: float) -> np.ndarray:
    base = loss_factor / 2.0
    top = float(omega[-1]) if len(omega) else 1.0
    beta = min(loss_factor, 2.0 * DAMPING_CAP - loss_factor) / top
    zeta = base + beta * omega / 2.0
    return np.clip(zeta, 1e-6, 0.999)


def pitch_map(model: ModalModel, band: tuple[float, float]) -> ModalModel:
    """Uniformly scale frequencies so the fundamental is audible.

    The fundamental is lifted to the low band edge when below it (never
    lowered); modes pushed past the top edge are dropped. Ratios between
    surviving modes are untouched.
    """
    f_lo, f_hi = band
    if not (0 < f_lo < f_hi):
        raise ModalError("need 0 < f_lo < f_hi")
    if model.n_modes == 0:
        raise ModalError("model has no retained modes")
    fundamental = model.fundamental_hz
    scale = max(1.0, f_lo / fundamental)
    freqs = model.frequencies * scale
    keep = freqs <= f_hi * 2.0 * np.pi
    if not keep.any():
        raise ModalError("pitch mapping dropped every mode")
    return replace(
        model,
        frequencies=freqs[keep],
        damping_ratios=model.damping_ratios[keep],
        mode_shapes=model.mode_shapes[:, keep],
        pitch_scale=model.pitch_scale * scale,
    )


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------


def model_cache_key(
    mesh: TriMesh, params: ModelParams, thickness: float, max_modes: int
) -> str:
    h = hashlib.sha256()
    h.update(mesh.vertices.tobytes())
    h.update(mesh.faces.tobytes())
    h.update(mesh.edges.tobytes())
    for x in (
        params.young_modulus,
        params.density,
        params.poisson,
        params.loss_factor,
        thickness,
        float(max_modes),
    ):
        h.update(np.float64(x).tobytes())
    return h.hexdigest()[:24]


def save_model(model: ModalModel, path) -> None:
    np.savez_compressed(
        path,
        format_version=np.int64(CACHE_FORMAT_VERSION),
        frequencies=model.frequencies,
        damping_ratios=model.damping_ratios,
        mode_shapes=model.mode_shapes,
        dof_per_vertex=np.int64(model.dof_per_vertex),
        pitch_scale=np.float64(model.pitch_scale),
        rigid_modes_excluded=np.int64(model.rigid_modes_excluded),
    )


def load_model(path) -> ModalModel:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CACHE_FORMAT_VERSION:
            raise ModalError(
                f"model cache version {version} != expected {CACHE_FORMAT_VERSION}"
            )
        return ModalModel(
            frequencies=data["frequencies"],
            damping_ratios=data["damping_ratios"],
            mode_shapes=data["mode_shapes"],
            dof_per_vertex=int(data["dof_per_vertex"]),
            pitch_scale=float(data["pitch_scale"]),
            rigid_modes_excluded=int(data["rigid_modes_excluded"]),
        )
