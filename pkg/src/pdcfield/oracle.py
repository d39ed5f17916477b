"""Discretized-mode and quadrature oracles.

Everything here validates the closed forms independently: kernels sampled
on a (K, omega) grid with quadrature weights turn the mode contraction
into weighted matrix algebra, the forward/conjugate kernel pair is
integrated through the crystal as a matrix ODE, and the leading idler and
background terms are checked against direct depth quadrature.

The grid symmetry machinery block-diagonalizes every grid operator over
the square-grid point group.  It changes nothing numerically (verified
against the plain path in the tests); it only makes the default-size runs
fast on one core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad, dblquad

from .config import ExperimentConfig, seed_shift
from .kernels import FieldKernels

TWO_PI_CUBED = (2.0 * math.pi) ** 3


class GridMismatchError(ValueError):
    """Raised when two kernel matrices live on different grids."""


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature cannot reach its tolerance."""


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    if x.size == 1:
        return np.ones(1)
    w = np.empty_like(x)
    w[1:-1] = 0.5 * (x[2:] - x[:-2])
    w[0] = 0.5 * (x[1] - x[0])
    w[-1] = 0.5 * (x[-1] - x[-2])
    return w


@dataclass
class ModeGrid:
    """Tensor-product (Kx, Ky, omega) samples with mode-measure weights.

    Flattened index runs omega fastest, then Ky, then Kx.  ``weight``
    implements the measure d2K domega / (2pi)^3.
    """

    kx: np.ndarray
    ky: np.ndarray
    omega_axis: np.ndarray
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        for name, ax in (("kx", self.kx), ("ky", self.ky), ("omega", self.omega_axis)):
            n = ax.size
            if n != 1 and n < 8:
                raise ValueError(f"{name} axis needs 1 or >= 8 points, got {n}")
        wx = _trapezoid_weights(self.kx)
        wy = _trapezoid_weights(self.ky)
        ww = _trapezoid_weights(self.omega_axis)
        KX, KY, OM = np.meshgrid(self.kx, self.ky, self.omega_axis, indexing="ij")
        self.K = np.stack([KX.ravel(), KY.ravel()], axis=-1)
        self.omega = OM.ravel()
        self.weight = (
            np.einsum("i,j,k->ijk", wx, wy, ww).ravel() / TWO_PI_CUBED
        )

    @property
    def size(self) -> int:
        return self.omega.size

    @property
    def shape(self) -> tuple:
        return (self.kx.size, self.ky.size, self.omega_axis.size)


def build_grid(
    k_half_extent: float,
    k_count: int,
    omega_center: float,
    omega_half_extent: float,
    omega_count: int,
    cfg: ExperimentConfig | None = None,
) -> ModeGrid:
    """Symmetric tensor grid with trapezoid weights.

    If ``cfg`` is given, extents are checked against the pump envelope
    (six K-widths and six bandwidths); shortfalls are recorded as warnings
    on the result rather than raised.
    """
    kx = (
        np.linspace(-k_half_extent, k_half_extent, k_count)
        if k_count > 1
        else np.zeros(1)
    )
    om = (
        omega_center + np.linspace(-omega_half_extent, omega_half_extent, omega_count)
        if omega_count > 1
        else np.array([omega_center])
    )
    grid = ModeGrid(kx=kx, ky=kx.copy(), omega_axis=om)
    if cfg is not None:
        k_width = math.sqrt(2.0) / cfg.pump.waist
        if k_count > 1 and 2.0 * k_half_extent < 6.0 * k_width:
            grid.warnings.append(
                f"K span {2 * k_half_extent:.3g} < 6 pump K-widths {6 * k_width:.3g}"
            )
        if omega_count > 1 and 2.0 * omega_half_extent < 6.0 * cfg.pump.bandwidth:
            grid.warnings.append(
                f"omega span {2 * omega_half_extent:.3g} < 6 bandwidths "
                f"{6 * cfg.pump.bandwidth:.3g}"
            )
    return grid


def default_grid(cfg: ExperimentConfig, k_count: int = 17, omega_count: int = 9) -> ModeGrid:
    """Six pump K-widths across and seven bandwidths across, the default
    oracle resolution."""
    q = cfg.derive()
    return build_grid(
        6.0 / cfg.pump.waist,
        k_count,
        q.omega_deg,
        3.5 * cfg.pump.bandwidth,
        omega_count,
        cfg=cfg,
    )


@dataclass
class KernelMatrix:
    """A kernel sampled on a ModeGrid.

    ``weighted`` distinguishes plain samples K(k_i, k_j) from the
    weight-absorbed form sqrt(w_i) K sqrt(w_j), in which the mode
    contraction is the ordinary matrix product.
    """

    grid: ModeGrid
    matrix: np.ndarray
    weighted: bool = False

    def to_weighted(self) -> "KernelMatrix":
        if self.weighted:
            return self
        s = np.sqrt(self.grid.weight)
        return KernelMatrix(self.grid, self.matrix * np.outer(s, s), True)

    def to_plain(self) -> "KernelMatrix":
        if not self.weighted:
            return self
        s = np.sqrt(self.grid.weight)
        return KernelMatrix(self.grid, self.matrix / np.outer(s, s), False)


def identity_kernel(grid: ModeGrid, weighted: bool = False) -> KernelMatrix:
    if weighted:
        return KernelMatrix(grid, np.eye(grid.size, dtype=complex), True)
    return KernelMatrix(grid, np.diag(1.0 / grid.weight).astype(complex), False)


def diamond_contract(a: KernelMatrix, b: KernelMatrix) -> KernelMatrix:
    """Weighted matrix product implementing the mode contraction."""
    if a.grid is not b.grid and (
        a.grid.shape != b.grid.shape
        or not np.array_equal(a.grid.K, b.grid.K)
        or not np.array_equal(a.grid.omega, b.grid.omega)
    ):
        raise GridMismatchError("kernel matrices live on different grids")
    if a.weighted != b.weighted:
        raise GridMismatchError("mixed weighted/plain kernel matrices")
    if a.weighted:
        return KernelMatrix(a.grid, a.matrix @ b.matrix, True)
    return KernelMatrix(a.grid, a.matrix @ (a.grid.weight[:, None] * b.matrix), False)


# ---------------------------------------------------------------------------
# grid operators for the pair kernel


class GridOperators:
    """Weight-absorbed pair-kernel matrices on a grid.

    The depth dependence factorizes into a fixed complex matrix times an
    elementwise phase exp(i z Delta); both pieces are precomputed.
    """

    def __init__(self, kern: FieldKernels, grid: ModeGrid):
        self.kern = kern
        self.grid = grid
        q = kern.q
        p = kern.cfg.pump
        K, om, w = grid.K, grid.omega, grid.weight

        kz = np.asarray(kern.kz(om))
        chi = np.asarray(kern.chi(om))
        r2 = np.sum(K * K, axis=-1)
        dot = np.outer(K[:, 0], K[:, 0]) + np.outer(K[:, 1], K[:, 1])

        sum_sq = r2[:, None] + r2[None, :] + 2.0 * dot
        quad_coeff = 0.5 * np.outer(kz, kz) / (kz[:, None] + kz[None, :])
        rel_sq = (
            r2[:, None] / kz[:, None] ** 2
            + r2[None, :] / kz[None, :] ** 2
            - 2.0 * dot / np.outer(kz, kz)
        )
        self.delta = quad_coeff * rel_sq - 0.5 * (chi[:, None] + chi[None, :])

        bw = p.bandwidth
        spectral = np.sqrt(2.0 * math.sqrt(math.pi) / bw) * np.exp(
            -((om[:, None] + om[None, :] - p.omega) ** 2) / (2.0 * bw**2)
        )
        amp = q.kernel_prefactor * q.order_gain / kern.cfg.crystal.length
        sw = np.sqrt(w)
        magnitude = np.exp(-0.25 * p.waist**2 * sum_sq)
        magnitude *= spectral
        magnitude *= amp * np.sqrt(np.outer(om, om))
        magnitude *= np.outer(sw, sw)
        self.base = (-1j * np.exp(-1j * p.phase)) * magnitude

    def htilde(self, z: float) -> np.ndarray:
        """Weight-absorbed pair kernel at depth z."""
        return self.base * np.exp(1j * z * self.delta)


# ---------------------------------------------------------------------------
# square-grid point-group block decomposition


class _BlockSpace:
    """Orthogonal decomposition of grid space into invariant blocks.

    ``bases`` holds one orthonormal basis per block as a sparse matrix;
    ``copies`` holds, per block, every basis on which the block repeats
    (two for the paired two-dimensional symmetry type, one otherwise).
    """

    def __init__(self, bases, copies):
        self.bases = bases
        self.copies = copies

    @property
    def nblocks(self):
        return len(self.bases)

    def project(self, full: np.ndarray):
        return [np.asarray((b.T @ full) @ b) for b in self.bases]

    def spread(self, blocks) -> np.ndarray:
        n = self.copies[0][0].shape[0]
        out = np.zeros((n, n), dtype=blocks[0].dtype)
        for blk, basis_list in zip(blocks, self.copies):
            for b in basis_list:
                out += np.asarray((b @ blk) @ b.T)
        return out


def _trivial_space(n: int) -> _BlockSpace:
    b = sp.identity(n, format="csr")
    return _BlockSpace([b], [[b]])


_D4_CHARACTERS = {
    # element order: e, r90, r180, r270, mx, my, diag, antidiag
    "A1": (1, 1, 1, 1, 1, 1, 1, 1),
    "A2": (1, 1, 1, 1, -1, -1, -1, -1),
    "B1": (1, -1, 1, -1, 1, 1, -1, -1),
    "B2": (1, -1, 1, -1, -1, -1, 1, 1),
}


def square_grid_blocks(grid: ModeGrid) -> _BlockSpace | None:
    """Point-group block decomposition for a centered square K grid.

    Returns None when the grid lacks the symmetry.  Kernels built from
    rotationally invariant combinations of the two transverse wave vectors
    commute with every block, so grid operators act blockwise.
    """
    kx, ky = grid.kx, grid.ky
    n = kx.size
    if n != ky.size or not np.array_equal(kx, ky):
        return None
    scale = max(abs(kx[0]), abs(kx[-1]), 1.0)
    mirror = np.empty(n, dtype=int)
    for i, v in enumerate(kx):
        j = np.argmin(np.abs(kx + v))
        if abs(kx[j] + v) > 1e-12 * scale:
            return None
        mirror[i] = j

    idx = np.arange(n)
    grids = np.meshgrid(idx, idx, indexing="ij")
    flat = lambda ix, iy: ix * n + iy
    e = flat(grids[0], grids[1]).ravel()
    mx = flat(mirror[grids[0]], grids[1]).ravel()
    my = flat(grids[0], mirror[grids[1]]).ravel()
    r180 = flat(mirror[grids[0]], mirror[grids[1]]).ravel()
    diag = flat(grids[1], grids[0]).ravel()
    anti = flat(mirror[grids[1]], mirror[grids[0]]).ravel()
    r90 = flat(mirror[grids[1]], grids[0]).ravel()
    r270 = flat(grids[1], mirror[grids[0]]).ravel()
    perms = [e, r90, r180, r270, mx, my, diag, anti]

    nk = n * n
    seen = np.zeros(nk, dtype=bool)
    columns = {name: ([], [], []) for name in _D4_CHARACTERS}  # rows, cols, vals
    e_plus_cols = []
    e_minus_cols = []

    for pt in range(nk):
        if seen[pt]:
            continue
        images = [g[pt] for g in perms]
        orbit = sorted(set(images))
        seen[orbit] = True
        local = {g: i for i, g in enumerate(orbit)}
        ell = len(orbit)

        for name, chars in _D4_CHARACTERS.items():
            vec = np.zeros(ell)
            for ch, img in zip(chars, images):
                vec[local[img]] += ch
            nrm = np.linalg.norm(vec)
            if nrm > 1e-9:
                rows, cols, vals = columns[name]
                col = cols[-1] + 1 if cols else 0
                for member, v in zip(orbit, vec / nrm):
                    if v != 0.0:
                        rows.append(member)
                        cols.append(col)
                        vals.append(v)

        # paired two-dimensional type: odd under r180, even under my,
        # partner column generated by the quarter-turn difference
        perm_loc = {}
        for gname, g in zip(
            ("r90", "r180", "r270", "my"), (r90, r180, r270, my)
        ):
            m = np.zeros((ell, ell))
            for member in orbit:
                m[local[g[member]], local[member]] = 1.0
            perm_loc[gname] = m
        proj = 0.25 * (np.eye(ell) - perm_loc["r180"]) @ (np.eye(ell) + perm_loc["my"])
        u, s, _ = np.linalg.svd(proj)
        for k in range(ell):
            if s[k] > 1e-9:
                vec = u[:, k]
                partner = 0.5 * (perm_loc["r90"] - perm_loc["r270"]) @ vec
                if abs(np.linalg.norm(partner) - 1.0) > 1e-9:
                    return None  # quarter-turn pairing failed; use plain path
                e_plus_cols.append((orbit, vec))
                e_minus_cols.append((orbit, partner))

    def assemble(entries):
        rows, cols, vals = [], [], []
        for col, (orbit, vec) in enumerate(entries):
            for member, v in zip(orbit, vec):
                if abs(v) > 1e-14:
                    rows.append(member)
                    cols.append(col)
                    vals.append(v)
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(nk, len(entries))
        )

    bases_k = []
    copies_k = []
    for name in _D4_CHARACTERS:
        rows, cols, vals = columns[name]
        if not cols:
            continue
        b = sp.csr_matrix((vals, (rows, cols)), shape=(nk, max(cols) + 1))
        bases_k.append(b)
        copies_k.append([b])
    if e_plus_cols:
        b_plus = assemble(e_plus_cols)
        b_minus = assemble(e_minus_cols)
        bases_k.append(b_plus)
        copies_k.append([b_plus, b_minus])

    total = sum(c[0].shape[1] * len(c) for c in copies_k)
    if total != nk:
        return None  # incomplete decomposition; fall back to the plain path

    nw = grid.omega_axis.size
    eye_w = sp.identity(nw, format="csr")
    bases = [sp.kron(b, eye_w, format="csr") for b in bases_k]
    copies = [[sp.kron(b, eye_w, format="csr") for b in cl] for cl in copies_k]
    return _BlockSpace(bases, copies)


# ---------------------------------------------------------------------------
# depth providers: blockwise pair kernel as a function of z


class _TaylorProvider:
    """Blockwise H(z) via an exact-in-practice phase Taylor expansion.

    Valid when max |z * Delta| stays small enough that the truncated
    exponential series is at machine precision; the caller checks this.
    """

    def __init__(self, ops: GridOperators, space: _BlockSpace, length: float):
        max_arg = float(np.max(np.abs(ops.delta))) * length
        kmax, term, fact = 1, max_arg, 1.0
        while term > 1e-13 and kmax < 24:
            kmax += 1
            fact *= kmax
            term = max_arg**kmax / fact
        self.coeffs = []
        work = ops.base.copy()
        self.coeffs.append(space.project(work))
        for k in range(1, kmax + 1):
            work *= 1j * ops.delta / k
            self.coeffs.append(space.project(work))
        self.nblocks = space.nblocks
        self._scratch = [np.empty_like(c) for c in self.coeffs[0]]
        self._pool = [
            [np.empty_like(c) for c in self.coeffs[0]] for _ in range(3)
        ]
        self._pool_next = 0

    def blocks(self, z: float):
        # rotate through a small buffer pool; callers hold at most three
        # depth samples at a time
        out = self._pool[self._pool_next]
        self._pool_next = (self._pool_next + 1) % len(self._pool)
        zk = 1.0
        for s in range(self.nblocks):
            np.copyto(out[s], self.coeffs[0][s])
        for ck in self.coeffs[1:]:
            zk *= z
            for s in range(self.nblocks):
                np.multiply(ck[s], zk, out=self._scratch[s])
                out[s] += self._scratch[s]
        return out


class _DirectProvider:
    """Blockwise H(z) by rebuilding the full phase factor at every depth."""

    def __init__(self, ops: GridOperators, space: _BlockSpace):
        self.ops = ops
        self.space = space

    def blocks(self, z: float):
        return self.space.project(self.ops.htilde(z))


def _make_provider(ops: GridOperators, space: _BlockSpace, length: float):
    if float(np.max(np.abs(ops.delta))) * length <= 1.5:
        return _TaylorProvider(ops, space, length)
    return _DirectProvider(ops, space)


class GridWorkspace:
    """Precomputed grid operators, block decomposition and depth provider.

    Building these dominates setup time on large grids; a workspace lets
    the depth integration and the series share them.
    """

    def __init__(self, kern: FieldKernels, grid: ModeGrid,
                 length: float | None = None, symmetry: str = "auto"):
        if length is None:
            length = kern.cfg.crystal.length
        self.kern = kern
        self.grid = grid
        self.length = length
        self.ops = GridOperators(kern, grid)
        space = None
        if symmetry in ("auto", "on") and grid.size > 1:
            space = square_grid_blocks(grid)
        if symmetry == "on" and space is None:
            raise ValueError("grid does not admit the point-group decomposition")
        if space is None or symmetry == "off":
            space = _trivial_space(grid.size)
        self.space = space
        self.provider = _make_provider(self.ops, space, length)


# ---------------------------------------------------------------------------
# Bogoliubov kernel construction


@dataclass
class BogoliubovSolution:
    forward: KernelMatrix          # U, plain kernel convention
    conjugate: KernelMatrix        # V, plain kernel convention
    constraint_defect: float       # max |U+U - V+V - 1| in weighted form
    info: dict


def _block_dims(space: _BlockSpace):
    return [b.shape[1] for b in space.bases]


def _rk4_blocks(provider, space: _BlockSpace, length: float, steps: int):
    """Classical fourth-order steps of dU = (1/2) V H dz, dV = (1/2) U H* dz.

    Works blockwise with preallocated buffers; the 1/2 of the equations is
    folded into the stage constants so provider blocks are used as-is.
    """
    dims = _block_dims(space)
    U = [np.eye(d, dtype=complex) for d in dims]
    V = [np.zeros((d, d), dtype=complex) for d in dims]
    h = length / steps
    buf = [
        {name: np.empty((d, d), dtype=complex)
         for name in ("tmp", "k1u", "k1v", "k2u", "k2v", "k3u", "k3v", "k4u", "k4v")}
        for d in dims
    ]

    def conjed(blocks):
        return [np.conj(arr) for arr in blocks]

    a_lo = provider.blocks(0.0)
    a_lo_c = conjed(a_lo)
    for n in range(steps):
        z = n * h
        a_mid = provider.blocks(z + 0.5 * h)
        a_mid_c = conjed(a_mid)
        a_hi = provider.blocks(z + h)
        a_hi_c = conjed(a_hi)
        for s in range(space.nblocks):
            u, v, b = U[s], V[s], buf[s]
            tmp = b["tmp"]
            # stage slopes carry twice the true derivative; the factors of
            # 1/2 reappear in the h/4, h/2 and h/12 constants below
            np.matmul(v, a_lo[s], out=b["k1u"])
            np.matmul(u, a_lo_c[s], out=b["k1v"])
            np.multiply(b["k1v"], 0.25 * h, out=tmp)
            tmp += v
            np.matmul(tmp, a_mid[s], out=b["k2u"])
            np.multiply(b["k1u"], 0.25 * h, out=tmp)
            tmp += u
            np.matmul(tmp, a_mid_c[s], out=b["k2v"])
            np.multiply(b["k2v"], 0.25 * h, out=tmp)
            tmp += v
            np.matmul(tmp, a_mid[s], out=b["k3u"])
            np.multiply(b["k2u"], 0.25 * h, out=tmp)
            tmp += u
            np.matmul(tmp, a_mid_c[s], out=b["k3v"])
            np.multiply(b["k3v"], 0.5 * h, out=tmp)
            tmp += v
            np.matmul(tmp, a_hi[s], out=b["k4u"])
            np.multiply(b["k3u"], 0.5 * h, out=tmp)
            tmp += u
            np.matmul(tmp, a_hi_c[s], out=b["k4v"])
            for k1, k2, k3, k4, target in (
                ("k1u", "k2u", "k3u", "k4u", u),
                ("k1v", "k2v", "k3v", "k4v", v),
            ):
                acc = b[k1]
                b[k2] += b[k3]
                b[k2] *= 2.0
                acc += b[k2]
                acc += b[k4]
                acc *= h / 12.0
                target += acc
        a_lo, a_lo_c = a_hi, a_hi_c
    return U, V


def _blocks_constraint_defect(space: _BlockSpace, U, V) -> float:
    blocks = []
    for u, v in zip(U, V):
        d = u.conj().T @ u - v.conj().T @ v
        np.fill_diagonal(d, np.diagonal(d) - 1.0)
        blocks.append(d)
    return float(np.max(np.abs(space.spread(blocks))))


def _plain_from_blocks(grid: ModeGrid, space: _BlockSpace, blocks) -> KernelMatrix:
    s = np.sqrt(grid.weight)
    full = space.spread(blocks)
    return KernelMatrix(grid, full / np.outer(s, s), False)


def solve_UV_ode(
    kern: FieldKernels,
    grid: ModeGrid,
    steps: int = 64,
    length: float | None = None,
    symmetry: str = "auto",
    workspace: GridWorkspace | None = None,
) -> BogoliubovSolution:
    """Integrate the forward/conjugate kernel pair through the crystal.

    Fixed-step classical fourth-order integration of the coupled pair,
    from the identity/zero initial kernels, with the fully z-dependent
    pair kernel.  ``symmetry='auto'`` block-diagonalizes over the square
    grid point group when the grid allows it (bitwise-equivalent result).
    """
    if steps < 64:
        raise ValueError("steps must be >= 64")
    if workspace is None:
        workspace = GridWorkspace(kern, grid, length, symmetry)
    space = workspace.space
    U, V = _rk4_blocks(workspace.provider, space, workspace.length, steps)
    defect = _blocks_constraint_defect(space, U, V)
    return BogoliubovSolution(
        forward=_plain_from_blocks(grid, space, U),
        conjugate=_plain_from_blocks(grid, space, V),
        constraint_defect=defect,
        info={"steps": steps, "blocks": _block_dims(space)},
    )


def series_UV(
    kern: FieldKernels,
    grid: ModeGrid,
    order: int = 4,
    length: float | None = None,
    z_nodes: int = 33,
    symmetry: str = "auto",
    workspace: GridWorkspace | None = None,
) -> tuple[KernelMatrix, KernelMatrix]:
    """Iterated-integral expansion of the kernel pair up to ``order``.

    Nested z-ordered integrals are evaluated by cumulative trapezoid
    rule over ``z_nodes`` equally spaced depths.
    """
    if not 1 <= order <= 6:
        raise ValueError("order must be in 1..6")
    if workspace is None:
        workspace = GridWorkspace(kern, grid, length, symmetry)
    space = workspace.space
    provider = workspace.provider
    length = workspace.length

    u_blocks, v_blocks = _series_blocks(workspace, order, z_nodes)
    return (
        _plain_from_blocks(grid, space, u_blocks),
        _plain_from_blocks(grid, space, v_blocks),
    )


def _series_blocks(workspace: GridWorkspace, order: int, z_nodes: int):
    space = workspace.space
    provider = workspace.provider
    zs = np.linspace(0.0, workspace.length, z_nodes)
    h = zs[1] - zs[0]
    dims = _block_dims(space)
    nb = space.nblocks

    # running iterated integrals T_k(z); T_k integrates T_{k-1} against the
    # kernel (conjugated for odd k).  Each level is brought up to date at a
    # node before the next level's integrand is formed there.
    levels = [
        [np.zeros((d, d), dtype=complex) for d in dims] for _ in range(order)
    ]
    prev_f = [None] * order
    for j, z in enumerate(zs):
        cur = provider.blocks(z)
        for lvl in range(order):
            f = []
            for s in range(nb):
                mat = np.conj(cur[s]) if lvl % 2 == 0 else cur[s]
                f.append(mat if lvl == 0 else levels[lvl - 1][s] @ mat)
            if j:
                for s in range(nb):
                    levels[lvl][s] += (0.5 * h) * (prev_f[lvl][s] + f[s])
            prev_f[lvl] = f

    u_blocks = [np.eye(d, dtype=complex) for d in dims]
    v_blocks = [np.zeros((d, d), dtype=complex) for d in dims]
    for lvl in range(order):
        coeff = 0.5 ** (lvl + 1)
        target = v_blocks if lvl % 2 == 0 else u_blocks
        for s in range(nb):
            target[s] = target[s] + coeff * levels[lvl][s]
    return u_blocks, v_blocks


def bogoliubov_defect(U: KernelMatrix, V: KernelMatrix) -> float:
    """max |U+ <> U - V+ <> V - 1| in the weight-absorbed convention."""
    u = U.to_weighted().matrix
    v = V.to_weighted().matrix
    d = u.conj().T @ u - v.conj().T @ v
    np.fill_diagonal(d, np.diagonal(d) - 1.0)
    return float(np.max(np.abs(d)))


def build_AB(U: KernelMatrix, V: KernelMatrix) -> tuple[KernelMatrix, KernelMatrix]:
    """Squeezed-state kernels from the Bogoliubov pair."""
    u = U.to_weighted().matrix
    v = V.to_weighted().matrix
    a = u.conj().T @ u + v.T @ np.conj(v)
    b = u.conj().T @ v + v.T @ np.conj(u)
    grid = U.grid
    return (
        KernelMatrix(grid, a, True).to_plain(),
        KernelMatrix(grid, b, True).to_plain(),
    )


def ab_consistency_defect(
    kern: FieldKernels,
    grid: ModeGrid,
    steps: int = 256,
    stations: int = 8,
    length: float | None = None,
) -> float:
    """Residual of the squeezed-kernel depth equations along the trajectory.

    The derivative of the composed kernels is estimated by one-step central
    differences at evenly spaced stations and compared against the
    right-hand side built from the pair kernel; returns the worst relative
    residual.
    """
    if length is None:
        length = kern.cfg.crystal.length
    ops = GridOperators(kern, grid)
    space = _trivial_space(grid.size)
    provider = _make_provider(ops, space, length)
    h = length / steps
    station_steps = {
        int(round(i * steps / (stations + 1))) for i in range(1, stations + 1)
    }

    U = [np.eye(grid.size, dtype=complex)]
    V = [np.zeros((grid.size, grid.size), dtype=complex)]
    snapshots = {}
    a_lo = provider.blocks(0.0)
    for n in range(steps):
        z = n * h
        a_mid = provider.blocks(z + 0.5 * h)
        a_hi = provider.blocks(z + h)
        A0, Am, A1 = a_lo[0], a_mid[0], a_hi[0]
        A0c, Amc, A1c = np.conj(A0), np.conj(Am), np.conj(A1)
        u, v = U[0], V[0]
        k1u = 0.5 * (v @ A0)
        k1v = 0.5 * (u @ A0c)
        k2u = 0.5 * ((v + 0.5 * h * k1v) @ Am)
        k2v = 0.5 * ((u + 0.5 * h * k1u) @ Amc)
        k3u = 0.5 * ((v + 0.5 * h * k2v) @ Am)
        k3v = 0.5 * ((u + 0.5 * h * k2u) @ Amc)
        k4u = 0.5 * ((v + h * k3v) @ A1)
        k4v = 0.5 * ((u + h * k3u) @ A1c)
        U[0] = u + (h / 6.0) * (k1u + 2.0 * (k2u + k3u) + k4u)
        V[0] = v + (h / 6.0) * (k1v + 2.0 * (k2v + k3v) + k4v)
        a_lo = a_hi
        for m in station_steps:
            if n + 1 in (m - 1, m, m + 1):
                snapshots[(m, n + 1)] = (U[0].copy(), V[0].copy())

    def compose(u, v):
        a = u.conj().T @ u + v.T @ np.conj(v)
        b = u.conj().T @ v + v.T @ np.conj(u)
        return a, b

    worst = 0.0
    for m in station_steps:
        if (m, m - 1) not in snapshots or (m, m + 1) not in snapshots:
            continue
        a_prev, b_prev = compose(*snapshots[(m, m - 1)])
        a_next, b_next = compose(*snapshots[(m, m + 1)])
        da = (a_next - a_prev) / (2.0 * h)
        db = (b_next - b_prev) / (2.0 * h)
        a_here, b_here = compose(*snapshots[(m, m)])
        ht = ops.htilde(m * h)
        rhs_a = 0.5 * (ht.conj().T @ np.conj(b_here)) + 0.5 * (b_here @ ht)
        rhs_b = 0.5 * (ht.conj().T @ a_here.T) + 0.5 * (a_here @ np.conj(ht))
        scale = max(np.max(np.abs(rhs_a)), np.max(np.abs(rhs_b)), 1e-300)
        worst = max(
            worst,
            float(np.max(np.abs(da - rhs_a)) / scale),
            float(np.max(np.abs(db - rhs_b)) / scale),
        )
    return worst


# ---------------------------------------------------------------------------
# thin-crystal matrix functions (independent route to the kernel sums)


def magnitude_tilde(kern: FieldKernels, grid: ModeGrid) -> np.ndarray:
    """Weight-absorbed pair-kernel magnitude (real symmetric), built lean."""
    q = kern.q
    p = kern.cfg.pump
    K, om, w = grid.K, grid.omega, grid.weight
    r2 = np.sum(K * K, axis=-1)
    sum_sq = r2[:, None] + r2[None, :]
    sum_sq += 2.0 * (np.outer(K[:, 0], K[:, 0]) + np.outer(K[:, 1], K[:, 1]))
    spectral = np.sqrt(2.0 * math.sqrt(math.pi) / p.bandwidth) * np.exp(
        -((om[:, None] + om[None, :] - p.omega) ** 2) / (2.0 * p.bandwidth**2)
    )
    amp = q.kernel_prefactor * q.order_gain / kern.cfg.crystal.length
    sw = np.sqrt(w)
    out = np.exp(-0.25 * p.waist**2 * sum_sq)
    out *= spectral
    out *= amp * np.sqrt(np.outer(om, om))
    out *= np.outer(sw, sw)
    return out


def hyperbolic_matrix_uv(kern: FieldKernels, grid: ModeGrid, length: float | None = None):
    """Matrix cosh/sinh of half the depth-integrated kernel magnitude.

    Returns weight-absorbed real symmetric matrices; their difference of
    squares is the identity to rounding error.
    """
    if length is None:
        length = kern.cfg.crystal.length
    mag = 0.5 * length * magnitude_tilde(kern, grid)
    mag = 0.5 * (mag + mag.T)
    evals, evecs = np.linalg.eigh(mag)
    cosh = (evecs * np.cosh(evals)) @ evecs.T
    sinh = (evecs * np.sinh(evals)) @ evecs.T
    return cosh, sinh


def hyperbolic_uv_subblock(
    kern: FieldKernels, grid: ModeGrid, indices: np.ndarray, length: float | None = None
):
    """cosh/sinh sub-blocks on selected modes, via the point-group sectors.

    Avoids materializing the full matrix functions; the full-grid
    eigenproblem is solved per invariant block and only the requested
    rows/columns are reconstructed.
    """
    if length is None:
        length = kern.cfg.crystal.length
    mag = 0.5 * length * magnitude_tilde(kern, grid)
    space = square_grid_blocks(grid)
    if space is None:
        cosh, sinh = hyperbolic_matrix_uv(kern, grid, length)
        return cosh[np.ix_(indices, indices)], sinh[np.ix_(indices, indices)]
    n_sel = indices.size
    cosh_sub = np.zeros((n_sel, n_sel))
    sinh_sub = np.zeros((n_sel, n_sel))
    for blk, copies in zip(space.project(mag), space.copies):
        blk = 0.5 * (blk.real + blk.real.T)
        evals, evecs = np.linalg.eigh(blk)
        for b in copies:
            proj = np.asarray(b[indices, :].todense()) @ evecs
            cosh_sub += (proj * np.cosh(evals)) @ proj.T
            sinh_sub += (proj * np.sinh(evals)) @ proj.T
    return cosh_sub, sinh_sub


# ---------------------------------------------------------------------------
# direct depth-quadrature oracles


def _quad_complex(f, a, b, epsabs, epsrel, what):
    res, err = quad(f, a, b, epsabs=epsabs, epsrel=epsrel, complex_func=True, limit=200)
    mag = abs(res)
    if mag > 0 and abs(err) > max(epsabs, 50.0 * epsrel * mag):
        raise QuadratureError(
            f"{what}: quadrature reached only {abs(err) / mag:.2e} relative"
        )
    return res


def oracle_zeta2(kern: FieldKernels, K1, omega1=None, rtol: float = 1e-9):
    """Leading-order idler amplitude by direct depth quadrature.

    The transverse integral over the shared mode is done analytically (a
    complex Gaussian), the frequency integral and the depth integral
    adaptively, with no thin-crystal expansion anywhere.
    """
    cfg, q = kern.cfg, kern.q
    p, s = cfg.pump, cfg.seed
    if omega1 is None:
        omega1 = q.omega_deg
    K1 = np.asarray(K1, dtype=float)
    shift = np.asarray(seed_shift(cfg, q))
    kz1 = float(kern.kz(omega1))
    chi1 = float(kern.chi(omega1))
    pair_amp_conj = 1j * (q.kernel_prefactor * q.order_gain / cfg.crystal.length) * np.exp(
        1j * p.phase
    )
    seed_amp_conj = math.sqrt(2.0 * math.pi) * s.amplitude * np.exp(-1j * s.phase) * s.waist

    wp2, wx2 = p.waist**2, s.waist**2

    def omega_integrand(w2, z):
        kz2 = float(kern.kz(w2))
        qq = kz1 * kz2 / (kz1 + kz2)
        a = 0.25 * (wp2 + wx2) + 0.5j * z * qq / kz2**2
        val = 0.0j
        for c in range(2):
            b = -0.5 * wp2 * K1[c] + 0.5 * wx2 * shift[c] + 1j * z * qq * K1[c] / (kz1 * kz2)
            const = (
                -0.25 * wp2 * K1[c] ** 2
                - 0.25 * wx2 * shift[c] ** 2
                - 0.5j * z * qq * K1[c] ** 2 / kz1**2
            )
            val += b * b / (4.0 * a) + const
        k_int = (math.pi / a) * np.exp(val) / (2.0 * math.pi) ** 2
        spectra = (
            np.sqrt(2.0 * math.sqrt(math.pi) / p.bandwidth)
            * np.exp(-((omega1 + w2 - p.omega) ** 2) / (2.0 * p.bandwidth**2))
            * np.sqrt(2.0 * math.sqrt(math.pi) / s.bandwidth)
            * np.exp(-((w2 - q.omega_deg) ** 2) / (2.0 * s.bandwidth**2))
        )
        phase = np.exp(0.5j * z * (chi1 + float(kern.chi(w2))))
        return pair_amp_conj * seed_amp_conj * math.sqrt(omega1 * w2) * spectra * phase * k_int

    bw = math.hypot(p.bandwidth, s.bandwidth)
    lo = q.omega_deg - 8.0 * bw
    hi = q.omega_deg + 8.0 * bw

    def z_integrand(z):
        return _quad_complex(
            lambda w2: omega_integrand(w2, z), lo, hi, 0.0, rtol, "idler frequency integral"
        ) / (2.0 * math.pi)

    total = _quad_complex(z_integrand, 0.0, cfg.crystal.length, 0.0, rtol, "idler depth integral")
    return 0.5 * total


def oracle_background(kern: FieldKernels, radius: float, rtol: float = 1e-9) -> float:
    """Background intensity by adaptive double depth quadrature.

    Uses the pair-kernel contraction with detector substitutions but
    without the extra depth expansions of the closed form.
    """
    from .background import hh_contraction

    cfg, q = kern.cfg, kern.q
    K0 = np.array([q.k_deg * radius / cfg.detector.focal_length, 0.0])
    L = cfg.crystal.length

    def integrand(z2, z1):
        return float(
            np.real(hh_contraction(kern, K0, K0, q.omega_deg, q.omega_deg, z1, z2))
        )

    val, err = dblquad(integrand, 0.0, L, 0.0, L, epsabs=0.0, epsrel=rtol)
    if abs(val) > 0 and err > 50.0 * rtol * abs(val):
        raise QuadratureError(
            f"background depth quadrature reached only {err / abs(val):.2e} relative"
        )
    return 0.25 * q.detector_gain * val
