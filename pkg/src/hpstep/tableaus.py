"""Additive Runge-Kutta tableau pairs and their validation suite.

Each pair couples a stiffly accurate, L-stable, singly-diagonal implicit
table (explicit first stage, constant diagonal gamma afterwards) with an
explicit table sharing the same abscissae and quadrature weights. The
three pairs embedded here are the classical order 3, 4 and 5 members of
the Kennedy-Carpenter additive family, written as exact rationals.

`load_tableau` revalidates every structural invariant on each call:
row sums, order conditions through the design order, stiff accuracy,
strict lower-triangularity of the explicit table, and decay of the
implicit stability function far in the left half-plane. A transcription
error in any coefficient trips at least one of these checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ImexTableau:
    """One implicit/explicit tableau pair with shared b and c."""

    name: str
    order: int
    gamma: float
    A_im: np.ndarray = field(repr=False)
    A_ex: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)

    @property
    def stages(self) -> int:
        return self.b.size


def _ark3() -> ImexTableau:
    g = 1767732205903 / 4055673282236
    b = [
        1471266399579 / 7840856788654,
        -4482444167858 / 7529755066697,
        11266239266428 / 11593286722821,
        g,
    ]
    A_im = [
        [0, 0, 0, 0],
        [g, g, 0, 0],
        [2746238789719 / 10658868560708, -640167445237 / 6845629431997, g, 0],
        b[:3] + [g],
    ]
    A_ex = [
        [0, 0, 0, 0],
        [2 * g, 0, 0, 0],
        [5535828885825 / 10492691773637, 788022342437 / 10882634858940, 0, 0],
        [
            6485989280629 / 16251701735622,
            -4246266847089 / 9704473918619,
            10755448449292 / 10357097424841,
            0,
        ],
    ]
    c = [0.0, 2 * g, 3 / 5, 1.0]
    return ImexTableau(
        name="additive-3(2)4",
        order=3,
        gamma=g,
        A_im=np.array(A_im),
        A_ex=np.array(A_ex),
        b=np.array(b),
        c=np.array(c),
    )


def _ark4() -> ImexTableau:
    g = 1 / 4
    b = [82889 / 524892, 0, 15625 / 83664, 69875 / 102672, -2260 / 8211, g]
    A_im = [
        [0, 0, 0, 0, 0, 0],
        [g, g, 0, 0, 0, 0],
        [8611 / 62500, -1743 / 31250, g, 0, 0, 0],
        [5012029 / 34652500, -654441 / 2922500, 174375 / 388108, g, 0, 0],
        [
            15267082809 / 155376265600,
            -71443401 / 120774400,
            730878875 / 902184768,
            2285395 / 8070912,
            g,
            0,
        ],
        b[:5] + [g],
    ]
    A_ex = [
        [0, 0, 0, 0, 0, 0],
        [1 / 2, 0, 0, 0, 0, 0],
        [13861 / 62500, 6889 / 62500, 0, 0, 0, 0],
        [
            -116923316275 / 2393684061468,
            -2731218467317 / 15368042101831,
            9408046702089 / 11113171139209,
            0,
            0,
            0,
        ],
        [
            -451086348788 / 2902428689909,
            -2682348792572 / 7519795681897,
            12662868775082 / 11960479115383,
            3355817975965 / 11060851509271,
            0,
            0,
        ],
        [
            647845179188 / 3216320057751,
            73281519250 / 8382639484533,
            552539513391 / 3454668386233,
            3354512671639 / 8306763924573,
            4040 / 17871,
            0,
        ],
    ]
    c = [0.0, 1 / 2, 83 / 250, 31 / 50, 17 / 20, 1.0]
    return ImexTableau(
        name="additive-4(3)6",
        order=4,
        gamma=g,
        A_im=np.array(A_im),
        A_ex=np.array(A_ex),
        b=np.array(b),
        c=np.array(c),
    )


def _ark5() -> ImexTableau:
    g = 41 / 200
    b = [
        -872700587467 / 9133579230613,
        0,
        0,
        22348218063261 / 9555858737531,
        -1143369518992 / 8141816002931,
        -39379526789629 / 19018526304540,
        32727382324388 / 42900044865799,
        g,
    ]
    A_im = [
        [0] * 8,
        [g, g, 0, 0, 0, 0, 0, 0],
        [41 / 400, -567603406766 / 11931857230679, g, 0, 0, 0, 0, 0],
        [
            683785636431 / 9252920307686,
            0,
            -110385047103 / 1367015193373,
            g,
            0,
            0,
            0,
            0,
        ],
        [
            3016520224154 / 10081342136671,
            0,
            30586259806659 / 12414158314087,
            -22760509404356 / 11113319521817,
            g,
            0,
            0,
            0,
        ],
        [
            218866479029 / 1489978393911,
            0,
            638256894668 / 5436446318841,
            -1179710474555 / 5321154724896,
            -60928119172 / 8023461067671,
            g,
            0,
            0,
        ],
        [
            1020004230633 / 5715676835656,
            0,
            25762820946817 / 25263940353407,
            -2161375909145 / 9755907335909,
            -211217309593 / 5846859502534,
            -4269925059573 / 7827059040749,
            g,
            0,
        ],
        b[:7] + [g],
    ]
    A_ex = [
        [0] * 8,
        [41 / 100, 0, 0, 0, 0, 0, 0, 0],
        [
            367902744464 / 2072280473677,
            677623207551 / 8224143866563,
            0,
            0,
            0,
            0,
            0,
            0,
        ],
        [
            1268023523408 / 10340822734521,
            0,
            1029933939417 / 13636558850479,
            0,
            0,
            0,
            0,
            0,
        ],
        [
            14463281900351 / 6315353703477,
            0,
            66114435211212 / 5879490589093,
            -54053170152839 / 4284798021562,
            0,
            0,
            0,
            0,
        ],
        [
            14090043504691 / 34967701212078,
            0,
            15191511035443 / 11219624916014,
            -18461159152457 / 12425892160975,
            -281667163811 / 9011619295870,
            0,
            0,
            0,
        ],
        [
            19230459214898 / 13134317526959,
            0,
            21275331358303 / 2942455364971,
            -38145345988419 / 4862620318723,
            -1 / 8,
            -1 / 8,
            0,
            0,
        ],
        [
            -19977161125411 / 11928030595625,
            0,
            -40795976796054 / 6384907823539,
            177454434618887 / 12078138498510,
            782672205425 / 8267701900261,
            -69563011059811 / 9646580694205,
            7356628210526 / 4942186776405,
            0,
        ],
    ]
    c = [
        0.0,
        41 / 100,
        2935347310677 / 11292855782101,
        1426016391358 / 7196633302097,
        92 / 100,
        24 / 100,
        3 / 5,
        1.0,
    ]
    return ImexTableau(
        name="additive-5(4)8",
        order=5,
        gamma=g,
        A_im=np.array(A_im),
        A_ex=np.array(A_ex),
        b=np.array(b),
        c=np.array(c),
    )


_BUILDERS = {3: _ark3, 4: _ark4, 5: _ark5}


def order_condition_residuals(A: np.ndarray, b: np.ndarray, c: np.ndarray, order: int):
    """Residuals of the rooted-tree conditions through the given order."""
    if order < 1 or order > 5:
        raise ValueError("order conditions implemented for orders 1..5")
    Ac = A @ c
    res = [b.sum() - 1.0]
    if order >= 2:
        res.append(b @ c - 1 / 2)
    if order >= 3:
        res += [b @ c**2 - 1 / 3, b @ Ac - 1 / 6]
    if order >= 4:
        res += [
            b @ c**3 - 1 / 4,
            b @ (c * Ac) - 1 / 8,
            b @ (A @ c**2) - 1 / 12,
            b @ (A @ Ac) - 1 / 24,
        ]
    if order >= 5:
        res += [
            b @ c**4 - 1 / 5,
            b @ (c**2 * Ac) - 1 / 10,
            b @ (Ac * Ac) - 1 / 20,
            b @ (c * (A @ c**2)) - 1 / 15,
            b @ (c * (A @ Ac)) - 1 / 30,
            b @ (A @ c**3) - 1 / 20,
            b @ (A @ (c * Ac)) - 1 / 40,
            b @ (A @ (A @ c**2)) - 1 / 60,
            b @ (A @ (A @ Ac)) - 1 / 120,
        ]
    return np.array(res)


def stability_function(A: np.ndarray, b: np.ndarray, z) -> np.ndarray:
    """R(z) = 1 + z b^T (I - z A)^{-1} 1, vectorized over z."""
    z_arr = np.asarray(z, dtype=complex)
    s = b.size
    one = np.ones(s)
    out = np.empty(z_arr.shape, dtype=complex)
    for i, zi in np.ndenumerate(z_arr):
        out[i] = 1.0 + zi * (b @ np.linalg.solve(np.eye(s) - zi * A, one))
    return out if out.ndim else out[()]


def load_tableau(order: int) -> ImexTableau:
    """Return the validated pair of the given design order (3, 4 or 5)."""
    try:
        tab = _BUILDERS[order]()
    except KeyError:
        raise ValueError(f"no tableau of order {order}; choose 3, 4 or 5") from None
    _validate(tab)
    return tab


def _validate(tab: ImexTableau) -> None:
    s = tab.stages
    A_im, A_ex, b, c = tab.A_im, tab.A_ex, tab.b, tab.c

    def check(cond: bool, what: str) -> None:
        if not cond:
            raise ValueError(f"tableau {tab.name}: {what}")

    check(A_im.shape == (s, s) and A_ex.shape == (s, s) and c.shape == (s,), "shape")
    check(c[0] == 0.0 and not A_im[0].any(), "first stage must be explicit")
    diag = np.diag(A_im)
    check(np.all(diag[1:] == tab.gamma), "implicit diagonal must be constant")
    check(np.allclose(np.triu(A_im, 1), 0.0, atol=0), "implicit table not lower")
    check(np.allclose(np.triu(A_ex, 0), 0.0, atol=0), "explicit table not strictly lower")
    check(np.array_equal(A_im[-1], b), "not stiffly accurate")
    check(np.abs(A_im.sum(axis=1) - c).max() < 1e-12, "implicit row sums differ from c")
    check(np.abs(A_ex.sum(axis=1) - c).max() < 1e-12, "explicit row sums differ from c")
    for label, A in (("implicit", A_im), ("explicit", A_ex)):
        r = np.abs(order_condition_residuals(A, b, c, tab.order)).max()
        check(r < 1e-12, f"{label} order conditions fail at {r:.2e}")
    check(
        abs(stability_function(A_im, b, -1e8)) < 1e-6,
        "implicit stability function does not vanish at -inf",
    )


def scalar_step_slopes(
    tab: ImexTableau, lam_im: complex, lam_ex: complex, dt: float, u: complex
) -> complex:
    """One step of u' = lam_im*u + lam_ex*u via the slope formulation."""
    s = tab.stages
    k = np.zeros(s, dtype=complex)
    l = np.zeros(s, dtype=complex)
    for i in range(s):
        p = u + dt * (tab.A_im[i, :i] @ k[:i] + tab.A_ex[i, :i] @ l[:i])
        if i == 0:
            y = p
            k[0] = lam_im * y
        else:
            k[i] = lam_im * p / (1.0 - dt * tab.gamma * lam_im)
            y = p + dt * tab.gamma * k[i]
        l[i] = lam_ex * y
    return u + dt * (tab.b @ k + tab.b @ l)


def scalar_step_stages(
    tab: ImexTableau, lam_im: complex, lam_ex: complex, dt: float, u: complex
) -> complex:
    """One step of u' = lam_im*u + lam_ex*u via the stage formulation."""
    s = tab.stages
    us = np.zeros(s, dtype=complex)
    us[0] = u
    f_im = np.zeros(s, dtype=complex)
    f_ex = np.zeros(s, dtype=complex)
    f_im[0] = lam_im * u
    f_ex[0] = lam_ex * u
    for i in range(1, s):
        rhs = u + dt * (tab.A_im[i, :i] @ f_im[:i] + tab.A_ex[i, :i] @ f_ex[:i])
        us[i] = rhs / (1.0 - dt * tab.gamma * lam_im)
        f_im[i] = lam_im * us[i]
        f_ex[i] = lam_ex * us[i]
    if lam_ex == 0:
        return us[-1]
    return us[-1] + dt * ((tab.A_im[-1] - tab.A_ex[-1]) @ f_ex)
