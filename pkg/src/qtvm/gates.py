"""Single-qubit gate matrices and the u(theta, phi, lam) parametrization.

Every 2x2 unitary the machine applies is produced here, either as a named
constant or from the generic form

    u(theta, phi, lam) = [[cos(t/2),            -e^{i lam} sin(t/2)],
                          [e^{i phi} sin(t/2),   e^{i(phi+lam)} cos(t/2)]]

which covers SU(2) up to a global phase.  Rotations follow the
half-angle convention rz(t) = exp(-i t/2 sigma_z) (likewise rx, ry).
"""

from __future__ import annotations

import cmath
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "X", "Y", "Z", "S", "SDG", "H", "IDENTITY",
    "rotation_x", "rotation_y", "rotation_z", "u_matrix",
    "fixed_gate", "is_unitary", "u_params_from_matrix",
]

_c = np.complex128

X = np.array([[0, 1], [1, 0]], dtype=_c)
Y = np.array([[0, -1j], [1j, 0]], dtype=_c)
Z = np.array([[1, 0], [0, -1]], dtype=_c)
S = np.array([[1, 0], [0, 1j]], dtype=_c)
SDG = np.array([[1, 0], [0, -1j]], dtype=_c)
H = np.array([[1, 1], [1, -1]], dtype=_c) / math.sqrt(2)
IDENTITY = np.eye(2, dtype=_c)

_FIXED = {"x": X, "y": Y, "z": Z, "s": S, "sdg": SDG, "h": H}

for _m in (X, Y, Z, S, SDG, H, IDENTITY):
    _m.setflags(write=False)


def fixed_gate(name: str) -> np.ndarray:
    """Matrix for one of the fixed mnemonics x, y, z, s, sdg, h."""
    return _FIXED[name]


@lru_cache(maxsize=4096)
def rotation_x(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    m = np.array([[c, -1j * s], [-1j * s, c]], dtype=_c)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=4096)
def rotation_y(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    m = np.array([[c, -s], [s, c]], dtype=_c)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=4096)
def rotation_z(theta: float) -> np.ndarray:
    m = np.array([[cmath.exp(-0.5j * theta), 0], [0, cmath.exp(0.5j * theta)]], dtype=_c)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=4096)
def u_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    m = np.array(
        [
            [c, -cmath.exp(1j * lam) * s],
            [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c],
        ],
        dtype=_c,
    )
    m.setflags(write=False)
    return m


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    m = np.asarray(m, dtype=_c)
    if m.shape != (2, 2):
        return False
    return bool(np.allclose(m.conj().T @ m, np.eye(2), atol=tol))


def u_params_from_matrix(m: np.ndarray) -> tuple[float, float, float]:
    """Decompose a 2x2 unitary as e^{i alpha} * u(theta, phi, lam), dropping alpha.

    Inverse of u_matrix up to global phase; used when the optimizer folds a
    run of single-qubit gates into one instruction.
    """
    a00, a01 = complex(m[0, 0]), complex(m[0, 1])
    a10, a11 = complex(m[1, 0]), complex(m[1, 1])
    theta = 2.0 * math.atan2(abs(a10), abs(a00))
    if abs(a00) > 1e-12:
        alpha = cmath.phase(a00)
        phi = cmath.phase(a10) - alpha if abs(a10) > 1e-12 else 0.0
        lam = cmath.phase(-a01) - alpha if abs(a01) > 1e-12 else cmath.phase(a11) - alpha - phi
    else:
        # theta == pi: only phi+alpha and lam+alpha are defined; pin alpha = 0.
        phi = cmath.phase(a10)
        lam = cmath.phase(-a01)
    return theta, phi, lam
