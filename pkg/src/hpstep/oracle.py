"""Independent dense reference discretization.

Assembles the complete collocation system over all active nodes in one
N-by-N matrix and solves it with dense LU. Row classes mirror the node
classes: interior rows collocate the operator, interface rows equate the
one-sided edge-normal derivatives of the two touching leaves, and outer
boundary rows take the outward normal derivative from the owning leaf.
Dirichlet data is imposed by swapping boundary rows for identity rows at
solve time, so the assembled matrix itself stays purely structural.

This path shares only the differentiation stencils with the fast solver;
assembly and solution are otherwise disjoint, which is what makes it
usable as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .mesh import BOUNDARY, INTERFACE, INTERIOR, Mesh
from .operators import EllipticOperator, collocate_leaf, flux_matrix

MAX_DENSE_NODES = 6000


@dataclass
class GlobalSystem:
    mesh: Mesh
    op: EllipticOperator
    matrix: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes


def _outward_sign(mesh: Mesh, local_edge_pos: int) -> float:
    """Sign turning the stored directional derivative into an outward one."""
    if mesh.dim == 1:
        return -1.0 if local_edge_pos == 0 else 1.0
    q = mesh.p - 2
    edge = local_edge_pos // q  # 0=S, 1=E, 2=N, 3=W
    return -1.0 if edge in (0, 3) else 1.0


def assemble_global(mesh: Mesh, op: EllipticOperator) -> GlobalSystem:
    """Build the dense N-by-N system for one mesh and operator."""
    n = mesh.n_nodes
    if n > MAX_DENSE_NODES:
        raise ValueError(
            f"dense assembly capped at {MAX_DENSE_NODES} nodes, mesh has {n}"
        )
    F = flux_matrix(mesh)
    probe = collocate_leaf(op, mesh, 0)
    A = np.zeros((n, n), dtype=probe.dtype)
    for l in range(mesh.n_leaves):
        M = probe if op.is_constant else collocate_leaf(op, mesh, l)
        ids = mesh.leaf_grid[l].ravel()
        active = ids >= 0
        cols = ids[active]
        for li in mesh.interior_local:
            A[ids[li], cols] = M[li, active]
        for q, le in enumerate(mesh.edge_local):
            r = ids[le]
            if mesh.node_class[r] == BOUNDARY:
                A[r, cols] = _outward_sign(mesh, q) * F[q, active]
            elif A[r].any():
                # second owner: the row becomes a one-sided derivative jump
                A[r, cols] -= F[q, active]
            else:
                A[r, cols] += F[q, active]
    return GlobalSystem(mesh=mesh, op=op, matrix=A)


def oracle_solve(
    system: GlobalSystem,
    load: np.ndarray,
    dirichlet: np.ndarray | None = None,
    neumann: np.ndarray | None = None,
) -> np.ndarray:
    """Solve the assembled system for one load and one set of boundary data.

    Args:
        load: values at all nodes; only interior entries are read.
        dirichlet: boundary values ordered by ascending boundary node id;
            imposed by replacing the boundary rows with identity rows.
        neumann: outward normal derivative data, same ordering, used with
            the assembled rows as-is. Exactly one of the two must be given.
    """
    if (dirichlet is None) == (neumann is None):
        raise ValueError("provide exactly one of dirichlet or neumann data")
    mesh = system.mesh
    cls = mesh.node_class
    gamma = np.nonzero(cls == BOUNDARY)[0]
    dtype = np.result_type(system.matrix.dtype, np.asarray(load).dtype)
    rhs = np.zeros(mesh.n_nodes, dtype=dtype)
    rhs[cls == INTERIOR] = np.asarray(load)[cls == INTERIOR]
    A = system.matrix
    if dirichlet is not None:
        data = np.asarray(dirichlet)
        if data.shape != gamma.shape:
            raise ValueError(f"expected {gamma.size} boundary values")
        A = A.astype(np.result_type(dtype, data.dtype), copy=True)
        A[gamma, :] = 0.0
        A[gamma, gamma] = 1.0
        rhs = rhs.astype(A.dtype)
        rhs[gamma] = data
    else:
        data = np.asarray(neumann)
        if data.shape != gamma.shape:
            raise ValueError(f"expected {gamma.size} boundary values")
        rhs = rhs.astype(np.result_type(dtype, data.dtype))
        rhs[gamma] = data
    return scipy.linalg.solve(A, rhs)
