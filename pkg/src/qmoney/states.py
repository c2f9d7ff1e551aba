"""Signal-state families for the mint and the squashed measurement bases.

The mint emits one of four two-mode weak coherent states; after reducing to
the informative mode they are coherent states with amplitudes
``i**k * sqrt(mu/2)`` for ``k = 0..3``.  Two finite-dimensional descriptions
are used:

* fixed global phase: the four pure states expanded in a 4-dimensional
  orthonormal basis, with real expansion coefficients ``C0..C3`` built from
  ``cosh``/``cos`` combinations of ``mu/2``;
* randomized global phase: rank-3 density matrices on a 7-dimensional space
  spanned by a vacuum flag, a qubit block holding the single-photon
  component, and four mutually orthogonal multiphoton flags (the multiphoton
  component is perfectly distinguishable, so it is modelled by orthogonal
  outcomes).  The Poisson weights are ``p0 = exp(-mu)``, ``p1 = mu exp(-mu)``
  and ``pm = 1 - (1 + mu) exp(-mu)``.

Conjugation is always entrywise in the stored basis; that is the convention
under which the Choi-contraction identity used by the operator builders
holds.  The global phase of the pure family is fixed by taking the amplitude
real and positive, which is the regime where the coefficient formulas are
unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import hermitize

#: Qubit components of the four signal states: |+>, |+i>, |->, |-i>.
_QUBIT_STATES = np.array(
    [
        [1, 1],
        [1, 1j],
        [1, -1],
        [1, -1j],
    ],
    dtype=complex,
) / np.sqrt(2)


@dataclass(frozen=True)
class StateFamily:
    """The four mint signal states on a fixed finite basis.

    Attributes
    ----------
    mu : float
        Mean photon number per pulse (= |amplitude|**2).
    phase_randomized : bool
        Whether the global optical phase is scrambled.
    mint_dim : int
        4 for the pure family, 7 for the phase-randomized family.
    states : tuple of ndarray
        Four density matrices on the mint space.
    conjugate_states : tuple of ndarray
        Entrywise complex conjugates in the fixed basis.
    vectors : tuple of ndarray or None
        State vectors for the pure family (None when randomized).
    """

    mu: float
    phase_randomized: bool
    mint_dim: int
    states: tuple[np.ndarray, ...]
    conjugate_states: tuple[np.ndarray, ...]
    vectors: tuple[np.ndarray, ...] | None = None


@dataclass(frozen=True)
class SquashedBasis:
    """Squashed-qubit vectors embedded in the 3-dimensional clone space.

    The clone outcome space is spanned by {|0>, |1>, |no-click>}; the qubit
    block occupies the first two coordinates.  ``beta[k]`` is the squashed
    qubit associated with signal state k, ``beta_perp[k]`` its orthogonal
    qubit partner (still orthogonal to the no-click flag), and ``vacuum``
    the no-click flag vector.
    """

    beta: np.ndarray
    beta_perp: np.ndarray
    vacuum: np.ndarray


def coherent_overlap(amp_a: complex, amp_b: complex) -> complex:
    """Inner product <a|b> of two coherent states with amplitudes a, b."""
    a = complex(amp_a)
    b = complex(amp_b)
    return np.exp(-abs(a) ** 2 / 2 - abs(b) ** 2 / 2 + np.conj(a) * b)


def basis_coefficients(mu: float) -> np.ndarray:
    """Expansion coefficients (C0, C1, C2, C3) of the pure signal states.

    The four states share the same coefficient magnitudes; state k carries
    phases ``i**(j*k)`` on component j.  The coefficients are normalized:
    ``sum(C**2) == 1`` for every mu >= 0.
    """
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    x = mu / 2.0
    pref = np.exp(-mu / 4.0) / np.sqrt(2.0)
    # sinh(x) >= sin(x) and cosh(x) >= cos(x) for x >= 0; clip guards the
    # tiny negative rounding of the differences near x = 0.
    c0 = pref * np.sqrt(max(np.cosh(x) + np.cos(x), 0.0))
    c1 = pref * np.sqrt(max(np.sinh(x) + np.sin(x), 0.0))
    c2 = pref * np.sqrt(max(np.cosh(x) - np.cos(x), 0.0))
    c3 = pref * np.sqrt(max(np.sinh(x) - np.sin(x), 0.0))
    return np.array([c0, c1, c2, c3])


def pure_state_vectors(mu: float) -> np.ndarray:
    """Four pure signal states as rows of a (4, 4) complex array."""
    coeff = basis_coefficients(mu)
    k = np.arange(4)
    j = np.arange(4)
    phases = (1j) ** np.outer(k, j)  # phases[k, j] = i**(j*k)
    return phases * coeff[np.newaxis, :]


def poisson_weights(mu: float) -> tuple[float, float, float]:
    """Vacuum, single-photon and multiphoton weights (p0, p1, pm)."""
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    p0 = float(np.exp(-mu))
    p1 = float(mu * np.exp(-mu))
    pm = float(1.0 - (1.0 + mu) * np.exp(-mu))
    return p0, p1, pm


def build_states(mu: float, phase_randomized: bool = False) -> StateFamily:
    """Construct the four-signal state family at mean photon number ``mu``."""
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    if not phase_randomized:
        vectors = pure_state_vectors(mu)
        states = tuple(hermitize(np.outer(v, v.conj())) for v in vectors)
        conj = tuple(s.conj() for s in states)
        return StateFamily(mu=mu, phase_randomized=False, mint_dim=4,
                           states=states, conjugate_states=conj,
                           vectors=tuple(vectors))
    p0, p1, pm = poisson_weights(mu)
    states = []
    for k in range(4):
        rho = np.zeros((7, 7), dtype=complex)
        rho[0, 0] = p0
        q = _QUBIT_STATES[k]
        rho[1:3, 1:3] = p1 * np.outer(q, q.conj())
        rho[3 + k, 3 + k] = pm
        states.append(hermitize(rho))
    states = tuple(states)
    conj = tuple(s.conj() for s in states)
    return StateFamily(mu=mu, phase_randomized=True, mint_dim=7,
                       states=states, conjugate_states=conj)


def conjugate_family(family: StateFamily) -> tuple[np.ndarray, ...]:
    """Entrywise conjugates of the family's states in the fixed basis.

    For the pure family conjugation fixes states 0 and 2 and swaps states
    1 and 3; for the randomized family it conjugates the qubit block while
    keeping each state's multiphoton flag.
    """
    return tuple(s.conj() for s in family.states)


def squashed_basis() -> SquashedBasis:
    """Squashed qubits and the no-click flag in the 3-dim clone space."""
    beta = np.zeros((4, 3), dtype=complex)
    beta[:, :2] = _QUBIT_STATES
    # The orthogonal qubit partner of state k is state k+2 (mod 4).
    beta_perp = np.roll(beta, -2, axis=0)
    vacuum = np.array([0, 0, 1], dtype=complex)
    return SquashedBasis(beta=beta, beta_perp=beta_perp, vacuum=vacuum)


def qubit_states() -> np.ndarray:
    """The bare 2-dimensional signal qubits (|+>, |+i>, |->, |-i>) as rows."""
    return _QUBIT_STATES.copy()
