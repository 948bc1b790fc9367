"""Self-contained cross-check reports for the command line and tests.

Two independent routes to the same answers: the tree solver against the
dense assembled system, and the stepping tables against their algebraic
conditions. Both return plain check records so the command line can
print them and the test suite can assert on them without duplicating
the definitions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BOUNDARY, build_mesh
from .operators import EllipticOperator, laplace_operator
from .oracle import assemble_global, oracle_solve
from .solver import build_factorization
from .tableaus import (
    load_tableau,
    order_condition_residuals,
    scalar_step_slopes,
    scalar_step_stages,
    stability_function,
)


@dataclass
class Check:
    """One named quantity against its bound."""

    name: str
    value: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.value <= self.bound

    def line(self) -> str:
        mark = "PASS" if self.ok else "FAIL"
        return f"{mark}  {self.name}: {self.value:.3e} (bound {self.bound:.1e})"


def _operator_families() -> list[tuple[str, EllipticOperator, type]]:
    return [
        ("shifted-laplace", laplace_operator().shifted(1.0, 1.0), float),
        ("complex-shift", laplace_operator().shifted(1.0, 0.03 + 0.07j), complex),
        (
            "variable-reaction",
            EllipticOperator(c11=1.0, c22=1.0, c0=lambda x, y: 1 + x * x + y * y),
            float,
        ),
    ]


def oracle_equivalence_report(
    meshes=((1, 1), (2, 1), (2, 2), (3, 2)),
    orders=(5, 7, 9),
    tol: float = 1e-9,
) -> list[Check]:
    """Tree solve versus dense global solve on random data.

    Every mesh/order combination runs all three operator families; the
    reported value is the relative max-norm difference of the two
    solution routes.
    """
    checks = []
    for n1, n2 in meshes:
        for p in orders:
            mesh = build_mesh(((0.0, float(n1)), (0.0, float(n2))), n1, n2, p=p)
            gamma = np.nonzero(mesh.node_class == BOUNDARY)[0]
            rng = np.random.default_rng(100 * n1 + 10 * n2 + p)
            for label, op, dtype in _operator_families():
                f = rng.standard_normal(mesh.n_nodes).astype(dtype)
                g_sorted = rng.standard_normal(gamma.size).astype(dtype)
                if dtype is complex:
                    f = f + 1j * rng.standard_normal(mesh.n_nodes)
                    g_sorted = g_sorted + 1j * rng.standard_normal(gamma.size)
                fact = build_factorization(mesh, op)
                g_tree = np.empty_like(g_sorted)
                g_tree[np.argsort(fact.gamma_ids)] = g_sorted
                got = fact.solve(f, g_tree)
                want = oracle_solve(assemble_global(mesh, op), f, dirichlet=g_sorted)
                rel = float(np.abs(got - want).max() / max(1.0, np.abs(want).max()))
                checks.append(Check(f"{label} {n1}x{n2} p={p}", rel, tol))
    return checks


def tableau_report() -> list[Check]:
    """Algebraic conditions on the stepping tables of orders 3, 4, 5."""
    checks = []
    lam, dt, u0 = -1.3 + 0.9j, 0.37, 1.0
    for q in (3, 4, 5):
        tab = load_tableau(q)
        for label, A in (("implicit", tab.A_im), ("explicit", tab.A_ex)):
            r = float(np.abs(order_condition_residuals(A, tab.b, tab.c, q)).max())
            checks.append(Check(f"q{q} {label} order conditions", r, 1e-12))
        checks.append(
            Check(f"q{q} stiff accuracy", float(np.abs(tab.A_im[-1] - tab.b).max()), 0.0)
        )
        checks.append(
            Check(
                f"q{q} explicit strictly lower",
                float(np.abs(np.triu(tab.A_ex, 0)).max()),
                0.0,
            )
        )
        checks.append(
            Check(
                f"q{q} damping at -1e8",
                float(np.abs(stability_function(tab.A_im, tab.b, -1e8))),
                1e-6,
            )
        )
        want = complex(stability_function(tab.A_im, tab.b, lam * dt)) * u0
        for label, step in (("slopes", scalar_step_slopes), ("stages", scalar_step_stages)):
            got = step(tab, lam, 0.0, dt, u0)
            checks.append(Check(f"q{q} {label} scalar step vs R", abs(got - want), 1e-13))
    return checks
