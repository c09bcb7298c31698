"""Steady-state solve of a crossbar with resistive row and column wires.

Topology: each row is driven at its left end through one wire segment and
continues rightwards in segments of ``wire_resistance``; each column runs
downwards in segments of ``wire_resistance`` to a virtual ground reached
through one last segment. Every cell joins its row node to its column node.

Two formulations are used.

Small arrays are solved directly in node voltages, written as deficits
``u = V_in - V_row`` and ``V_col`` so that the tiny wire drops are not lost
against the drive voltage::

    [L_row + G      G     ] [u    ]   [G V_in]
    [    G      L_col + G ] [V_col] = [G V_in]

Large arrays are solved for the cell currents ``I`` directly. The drop
along a row wire at cell j is ``R_w * cumsum_j(revcumsum_j(I))`` and the
rise of a column node above ground is ``R_w * revcumsum_i(cumsum_i(I))``,
so the cell equations become the symmetric positive definite system::

    I / G + R_w (P_row + P_col) I = V_in

solved by conjugate gradients with a diagonal (multiply by G)
preconditioner. Many right-hand sides are handled through the transfer
matrix: one solve per driven row, then outputs = V @ T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, DomainError, SolverError

# Above this many cells the sparse factorization loses to the iterative path.
DIRECT_CELL_LIMIT = 4096


@dataclass
class NetworkSolution:
    column_currents: np.ndarray  # (n, cols) amperes into each ground terminal
    driver_currents: np.ndarray  # (n, rows) amperes out of each row driver
    relative_residual: float
    method: str


@nb.njit(cache=True, nogil=True)
def _apply(x, inv_g, rw, out, scratch, acc):
    rows, cols = x.shape
    for i in range(rows):
        s = 0.0
        for j in range(cols - 1, -1, -1):
            s += x[i, j]
            scratch[i, j] = s
        s2 = 0.0
        for j in range(cols):
            s2 += scratch[i, j]
            out[i, j] = rw * s2 + x[i, j] * inv_g[i, j]
    for j in range(cols):
        acc[j] = 0.0
    for i in range(rows):
        for j in range(cols):
            acc[j] += x[i, j]
            scratch[i, j] = acc[j]
    for j in range(cols):
        acc[j] = 0.0
    for i in range(rows - 1, -1, -1):
        for j in range(cols):
            acc[j] += scratch[i, j]
            out[i, j] += rw * acc[j]


@nb.njit(cache=True, nogil=True)
def _pcg(g, rw, v_in, tol, maxit, x):
    """Cell currents for row drive ``v_in``; returns (iterations, residual).

    Iterations is -1 when ``maxit`` is reached.
    """
    rows, cols = g.shape
    inv_g = 1.0 / g
    r = np.empty((rows, cols))
    z = np.empty((rows, cols))
    p = np.empty((rows, cols))
    ap = np.empty((rows, cols))
    scratch = np.empty((rows, cols))
    acc = np.empty(cols)
    for i in range(rows):
        for j in range(cols):
            x[i, j] = v_in[i] * g[i, j]
    _apply(x, inv_g, rw, ap, scratch, acc)
    bn = 0.0
    rz = 0.0
    rr = 0.0
    for i in range(rows):
        for j in range(cols):
            r[i, j] = v_in[i] - ap[i, j]
            z[i, j] = r[i, j] * g[i, j]
            p[i, j] = z[i, j]
            rz += r[i, j] * z[i, j]
            rr += r[i, j] * r[i, j]
        bn += cols * v_in[i] * v_in[i]
    bn = np.sqrt(bn)
    if bn == 0.0:
        return 0, 0.0
    if np.sqrt(rr) <= tol * bn:
        return 0, np.sqrt(rr) / bn
    for it in range(maxit):
        _apply(p, inv_g, rw, ap, scratch, acc)
        pap = 0.0
        for i in range(rows):
            for j in range(cols):
                pap += p[i, j] * ap[i, j]
        a = rz / pap
        rr = 0.0
        rzn = 0.0
        for i in range(rows):
            for j in range(cols):
                x[i, j] += a * p[i, j]
                r[i, j] -= a * ap[i, j]
                rr += r[i, j] * r[i, j]
                z[i, j] = r[i, j] * g[i, j]
                rzn += r[i, j] * z[i, j]
        if np.sqrt(rr) <= tol * bn:
            return it + 1, np.sqrt(rr) / bn
        beta = rzn / rz
        rz = rzn
        for i in range(rows):
            for j in range(cols):
                p[i, j] = z[i, j] + beta * p[i, j]
    return -1, np.sqrt(rr) / bn


def _path_laplacian(n: int, rw: float, grounded_end: str) -> sp.csr_matrix:
    """Laplacian of an n-node wire of segments ``rw`` with one end tied to a source."""
    c = 1.0 / rw
    main = np.full(n, 2.0 * c)
    if grounded_end == "first":
        main[-1] = c
    else:
        main[0] = c
    off = np.full(n - 1, -c)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _direct(g: np.ndarray, rw: float, v: np.ndarray) -> NetworkSolution:
    rows, cols = g.shape
    n = rows * cols
    # row-major flattening: index i*cols + j
    l_row = sp.kron(sp.identity(rows), _path_laplacian(cols, rw, "first"))
    l_col = sp.kron(_path_laplacian(rows, rw, "last"), sp.identity(cols))
    gd = sp.diags(g.ravel())
    a = sp.bmat([[l_row + gd, gd], [gd, l_col + gd]], format="csc")
    rhs_cells = (v[:, :, None] * g[None, :, :]).reshape(len(v), n)
    rhs = np.concatenate([rhs_cells, rhs_cells], axis=1).T
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        raise SolverError(f"crossbar matrix is singular: {exc}") from exc
    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise SolverError("direct crossbar solve produced non-finite values")
    resid = a @ sol - rhs
    scale = np.linalg.norm(rhs, axis=0)
    scale[scale == 0] = 1.0
    rel = float(np.max(np.linalg.norm(resid, axis=0) / scale))
    u = sol[:n].T.reshape(len(v), rows, cols)
    vc = sol[n:].T.reshape(len(v), rows, cols)
    return NetworkSolution(
        column_currents=vc[:, -1, :] / rw,
        driver_currents=u[:, :, 0] / rw,
        relative_residual=rel,
        method="direct",
    )


def _iterative(g: np.ndarray, rw: float, v: np.ndarray, tol: float, maxit: int) -> NetworkSolution:
    rows, cols = g.shape
    g = np.ascontiguousarray(g, dtype=float)
    cell = np.empty((rows, cols))
    worst = 0.0

    def run(drive):
        nonlocal worst
        its, res = _pcg(g, rw, drive, tol, maxit, cell)
        if its < 0:
            raise ConvergenceError(
                f"conjugate gradients stalled at relative residual {res:.3e} after {maxit} iterations",
                residual=res,
                estimates=cell.sum(axis=0),
            )
        worst = max(worst, res)
        return cell.sum(axis=0), cell.sum(axis=1)

    if len(v) > rows:
        # transfer matrix: one solve per driven row
        t_col = np.empty((rows, cols))
        t_drv = np.empty((rows, rows))
        unit = np.zeros(rows)
        for i in range(rows):
            unit[:] = 0.0
            unit[i] = 1.0
            t_col[i], t_drv[i] = run(unit)
        col, drv = v @ t_col, v @ t_drv
    else:
        col = np.empty((len(v), cols))
        drv = np.empty((len(v), rows))
        for k, drive in enumerate(v):
            col[k], drv[k] = run(np.ascontiguousarray(drive, dtype=float))
    return NetworkSolution(col, drv, worst, "pcg")


def solve_network(g: np.ndarray, v: np.ndarray, wire_resistance: float, tolerance: float = 1e-9,
                  max_iterations: int = 2000, method: str = "auto") -> NetworkSolution:
    """Solve the array for one drive vector (rows,) or a batch (n, rows)."""
    g = np.asarray(g, dtype=float)
    v = np.asarray(v, dtype=float)
    if g.ndim != 2 or g.size == 0:
        raise DomainError("conductance grid must be a non-empty 2D array")
    if np.any(~(g > 0)):
        raise SolverError("cell conductances must be positive and finite")
    single = v.ndim == 1
    v2 = v[None, :] if single else v
    if v2.ndim != 2 or v2.shape[1] != g.shape[0]:
        raise DomainError(f"drive has {v2.shape[-1]} entries for {g.shape[0]} rows")
    if wire_resistance < 0:
        raise DomainError("wire_resistance must be >= 0")

    if wire_resistance == 0:
        col = v2 @ g
        sol = NetworkSolution(col, v2 * g.sum(axis=1), 0.0, "ideal")
    else:
        if method == "auto":
            method = "direct" if g.size <= DIRECT_CELL_LIMIT else "pcg"
        if method == "direct":
            sol = _direct(g, wire_resistance, v2)
        elif method == "pcg":
            sol = _iterative(g, wire_resistance, v2, tolerance, max_iterations)
        else:
            raise DomainError(f"unknown solver method {method!r}")
    if single:
        sol.column_currents = sol.column_currents[0]
        sol.driver_currents = sol.driver_currents[0]
    return sol


def solve_array(mapped, v, config) -> np.ndarray:
    """Currents into each physical column's virtual ground."""
    g = mapped.physical(config.interleave)
    return solve_network(g, v, config.wire_resistance, config.solver_tolerance,
                         config.max_iterations).column_currents
