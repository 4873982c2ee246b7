"""Assembly of the five sparse quadratic forms on a tensor grid.

For multilinear elements and per-cell tensor Gauss quadrature the five
forms are

    A_b    = int b |grad u|^2 dv
    M_q    = int q rho^-2 u^2 dv
    M_eta  = int eta rho^-2 u^2 dv
    M_0    = int u^2 dv
    M_log  = int rho^-2 (log rho)^-2 u^2 dv

All five share one sparsity pattern and are assembled symmetrically (the
contributions to (i, j) and (j, i) are identical addend sequences, so the
matrices are exactly symmetric, not symmetrized after the fact).  M_q, M_0
and M_log are positive definite because the tensor Gauss rule has as many
interior points per cell as local degrees of freedom.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NotNormalized, SingularMass, ZeroDenominator
from .geometry import Boundary, GeometryConfig, Grid, Model
from .weights import WeightSpec

_CACHE_MAGIC = b"HLFORMS1"


def config_hash(cfg: GeometryConfig, spec: WeightSpec) -> str:
    payload = json.dumps({"geometry": cfg.as_dict(), "weights": spec.as_dict()},
                         sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class QuadraticForms:
    """Five symmetric sparse forms plus the bookkeeping eigensolvers need.

    ``boundary_active`` lists (in the active dof numbering) the outer-radius
    nodes of a free reduced grid, so downstream operations that model decay
    at infinity can restrict them away.  ``max_eta_over_q`` and
    ``max_q_logsq`` are quadrature-point bounds used for certified spectral
    shifts: eta and q are sampled at identical points, so
    u'M_eta u <= max(eta/q) u'M_q u holds exactly for the discrete forms.
    """

    A_b: sp.csr_matrix = field(repr=False)
    M_q: sp.csr_matrix = field(repr=False)
    M_eta: sp.csr_matrix = field(repr=False)
    M_0: sp.csr_matrix = field(repr=False)
    M_log: sp.csr_matrix = field(repr=False)
    dof_count: int = 0
    config_hash: str = ""
    cfg: GeometryConfig = None
    spec: WeightSpec = None
    boundary_active: np.ndarray = field(repr=False, default=None)
    node_r: np.ndarray = field(repr=False, default=None)
    node_z: np.ndarray = field(repr=False, default=None)
    max_eta_over_q: float = 0.0
    min_eta_over_q: float = 0.0
    max_q_logsq: float = 0.0

    def matrices(self):
        return (self.A_b, self.M_q, self.M_eta, self.M_0, self.M_log)


def _dedup_triplets(rows, cols, datas, n):
    """Sum duplicate (row, col) entries in a deterministic stable order.

    The returned CSR matrices share one indices/indptr pair: a single
    sparsity pattern object for all five forms.
    """
    order = np.lexsort((cols, rows))     # stable: ties keep cell order
    rows, cols = rows[order], cols[order]
    datas = [d[order] for d in datas]
    boundary = np.ones(len(rows), dtype=bool)
    boundary[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.nonzero(boundary)[0]
    out_rows = rows[starts]
    indices = cols[starts].astype(np.int32, copy=True)
    indptr = np.zeros(n + 1, dtype=np.int32)
    np.cumsum(np.bincount(out_rows, minlength=n), out=indptr[1:])
    mats = []
    for d in datas:
        m = sp.csr_matrix((np.add.reduceat(d, starts), indices, indptr),
                          shape=(n, n))
        m.indices = indices          # scipy copies on construction;
        m.indptr = indptr            # re-point at the one shared pattern
        mats.append(m)
    return mats


def assemble_forms(grid: Grid, spec: WeightSpec) -> QuadraticForms:
    """Assemble the five forms; deterministic, bit-identical for same inputs."""
    if not spec.normalized:
        raise NotNormalized("assemble_forms requires a normalized spec")
    cfg = grid.cfg
    if np.any(grid.qp_rho <= 0.0):
        raise SingularMass("quadrature point with rho = 0")

    w = grid.weights                       # (c, g)
    rho_q = grid.qp_rho
    z_q = grid.qp_z
    b_q = spec.b_at(rho_q, z_q)
    q_q = spec.q_at(rho_q, z_q)
    eta_q = spec.eta_at(rho_q, z_q)
    inv_r2 = rho_q**-2.0
    log_r = np.log(rho_q)

    S = grid.ref_shape                     # (g, nloc)
    D = grid.ref_grad                      # (d, g, nloc)
    h = grid.cell_h                        # (c, d)
    d_axes = D.shape[0]

    def mass(fvals):
        return np.einsum("cg,gi,gj->cij", w * fvals, S, S, optimize=True)

    A_loc = np.zeros((grid.n_cells, S.shape[1], S.shape[1]))
    wb = w * b_q
    for a in range(d_axes):
        scal = wb / h[:, a][:, None] ** 2
        A_loc += np.einsum("cg,gi,gj->cij", scal, D[a], D[a], optimize=True)
    Mq_loc = mass(q_q * inv_r2)
    Me_loc = mass(eta_q * inv_r2)
    M0_loc = mass(np.ones_like(w))
    Ml_loc = mass(inv_r2 * log_r**-2.0)

    nloc = S.shape[1]
    rows = np.repeat(grid.cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(grid.cell_dofs, (1, nloc)).ravel()
    datas = [m.ravel() for m in (A_loc, Mq_loc, Me_loc, M0_loc, Ml_loc)]
    mats = _dedup_triplets(rows, cols, datas, grid.dof_count)

    node_r = grid.node_r
    node_z = grid.node_z
    boundary = grid.boundary_dofs
    if cfg.model is Model.REDUCED and cfg.boundary is Boundary.DIRICHLET:
        keep = np.setdiff1d(np.arange(grid.dof_count), boundary)
        mats = [m[keep][:, keep].tocsr() for m in mats]
        node_r = node_r[keep]
        node_z = node_z[keep]
        boundary_active = np.array([], dtype=np.int64)
        dof_count = len(keep)
    else:
        boundary_active = boundary.copy()
        dof_count = grid.dof_count

    ratio = eta_q / q_q
    return QuadraticForms(
        A_b=mats[0], M_q=mats[1], M_eta=mats[2], M_0=mats[3], M_log=mats[4],
        dof_count=dof_count,
        config_hash=config_hash(cfg, spec),
        cfg=cfg, spec=spec,
        boundary_active=boundary_active,
        node_r=node_r, node_z=node_z,
        max_eta_over_q=float(ratio.max()),
        min_eta_over_q=float(ratio.min()),
        max_q_logsq=float((q_q * log_r**2).max()),
    )


def quotient(forms: QuadraticForms, lam: float, u: np.ndarray) -> float:
    """(A_b[u] - lam M_eta[u]) / M_q[u]; scale invariant in u."""
    u = np.asarray(u, dtype=float)
    den = float(u @ (forms.M_q @ u))
    if den <= 0.0:
        raise ZeroDenominator("M_q[u] <= 0")
    num = float(u @ (forms.A_b @ u)) - lam * float(u @ (forms.M_eta @ u))
    return num / den


# ---------------------------------------------------------------------------
# matrix cache (binary triplet format, atomic writes)
# ---------------------------------------------------------------------------

def cache_path(cache_dir: str, chash: str) -> str:
    return os.path.join(cache_dir, f"{chash}.forms")


def write_forms(forms: QuadraticForms, cache_dir: str) -> str:
    """Write sorted (row, col, five values) records; atomic via rename."""
    os.makedirs(cache_dir, exist_ok=True)
    path = cache_path(cache_dir, forms.config_hash)
    coo = forms.A_b.tocoo()
    order = np.lexsort((coo.col, coo.row))
    rows = coo.row[order].astype(np.int64)
    cols = coo.col[order].astype(np.int64)
    vals = []
    for m in forms.matrices():
        c = m.tocoo()
        o = np.lexsort((c.col, c.row))
        if not (np.array_equal(c.row[o], rows) and np.array_equal(c.col[o], cols)):
            raise SingularMass("sparsity patterns diverged; cannot cache")
        vals.append(c.data[o])
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(bytes.fromhex(forms.config_hash))
        np.array([forms.dof_count, len(rows)], dtype=np.int64).tofile(fh)
        np.array([forms.max_eta_over_q, forms.min_eta_over_q,
                  forms.max_q_logsq], dtype=np.float64).tofile(fh)
        rows.tofile(fh)
        cols.tofile(fh)
        for v in vals:
            v.astype(np.float64).tofile(fh)
    os.replace(tmp, path)
    return path


def read_forms(path: str, grid: Grid, spec: WeightSpec) -> QuadraticForms:
    """Load cached matrices; geometry-derived fields come from the grid."""
    cfg = grid.cfg
    with open(path, "rb") as fh:
        magic = fh.read(len(_CACHE_MAGIC))
        if magic != _CACHE_MAGIC:
            raise OSError(f"{path}: not a forms cache file")
        chash = fh.read(32).hex()
        dof_count, nnz = np.fromfile(fh, dtype=np.int64, count=2)
        stats = np.fromfile(fh, dtype=np.float64, count=3)
        rows = np.fromfile(fh, dtype=np.int64, count=nnz)
        cols = np.fromfile(fh, dtype=np.int64, count=nnz)
        mats = []
        for _ in range(5):
            data = np.fromfile(fh, dtype=np.float64, count=nnz)
            m = sp.csr_matrix((data, (rows, cols)),
                              shape=(dof_count, dof_count))
            m.sort_indices()
            mats.append(m)
    node_r = grid.node_r
    node_z = grid.node_z
    boundary = grid.boundary_dofs
    if cfg.model is Model.REDUCED and cfg.boundary is Boundary.DIRICHLET:
        keep = np.setdiff1d(np.arange(grid.dof_count), boundary)
        node_r = node_r[keep]
        node_z = node_z[keep]
        boundary_active = np.array([], dtype=np.int64)
    else:
        boundary_active = boundary.copy()
    return QuadraticForms(
        A_b=mats[0], M_q=mats[1], M_eta=mats[2], M_0=mats[3], M_log=mats[4],
        dof_count=int(dof_count), config_hash=chash, cfg=cfg, spec=spec,
        boundary_active=boundary_active, node_r=node_r, node_z=node_z,
        max_eta_over_q=float(stats[0]), min_eta_over_q=float(stats[1]),
        max_q_logsq=float(stats[2]))


def assemble_or_load(grid: Grid, spec: WeightSpec,
                     cache_dir: str | None = None):
    """Assemble, or reuse the cache when the config hash matches.

    Returns (forms, cache_hit).
    """
    if cache_dir is None:
        return assemble_forms(grid, spec), False
    chash = config_hash(grid.cfg, spec)
    path = cache_path(cache_dir, chash)
    if os.path.exists(path):
        return read_forms(path, grid, spec), True
    forms = assemble_forms(grid, spec)
    write_forms(forms, cache_dir)
    return forms, False
