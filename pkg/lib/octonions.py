"""Octonion structure constants and the derivation algebra of the imaginary octonions."""
from functools import lru_cache
from itertools import permutations

import numpy as np
import scipy.linalg

# oriented lines of the Fano plane, 1-based; psi = +1 on each, extended by antisymmetry
PSI_TRIPLES = ((1, 2, 3), (1, 4, 7), (1, 6, 5), (2, 4, 6), (2, 5, 7), (3, 5, 4), (3, 6, 7))
G2_DIM = 14


def _parity(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@lru_cache
def psi_symbol():
    psi = np.zeros((7, 7, 7))
    for triple in PSI_TRIPLES:
        base = [t - 1 for t in triple]
        for perm in permutations(range(3)):
            psi[tuple(base[p] for p in perm)] = _parity(perm)
    psi.flags.writeable = False
    return psi


@lru_cache
def multiplication_table():
    """M[a, b, c]: coefficient of e_c in e_a e_b, index 0 the real unit."""
    psi = psi_symbol()
    m = np.zeros((8, 8, 8))
    m[0, 0, 0] = 1.0
    for i in range(1, 8):
        m[0, i, i] = 1.0
        m[i, 0, i] = 1.0
        m[i, i, 0] = -1.0
    m[1:, 1:, 1:] += psi
    m.flags.writeable = False
    return m


def multiply(x, y):
    return np.einsum("a,b,abc->c", x, y, multiplication_table())


def _derivation_equations():
    psi = psi_symbol()
    eye = np.eye(7)
    # imaginary components of D(e_i e_j) - D(e_i) e_j - e_i D(e_j), unknowns D[p, q]
    imag = (np.einsum("qi,pjk->ijkpq", eye, psi)
            + np.einsum("qj,ipk->ijkpq", eye, psi)
            - np.einsum("ijq,kp->ijkpq", psi, eye))
    real = -np.einsum("pj,qi->ijpq", eye, eye) - np.einsum("pi,qj->ijpq", eye, eye)
    return np.vstack([imag.reshape(-1, 49), real.reshape(-1, 49)])


@lru_cache
def derivation_basis():
    """Real 7x7 derivations of the octonion product, orthonormal in the trace form."""
    null = scipy.linalg.null_space(_derivation_equations())
    if null.shape[1] != G2_DIM:
        raise RuntimeError(
            f"derivation algebra has dimension {null.shape[1]}, expected {G2_DIM}; "
            "the psi triples do not define an octonion algebra")
    basis = np.stack([null[:, a].reshape(7, 7) for a in range(G2_DIM)])
    basis.flags.writeable = False
    return basis


def automorphism_residual(g):
    """max over unit pairs of |g(e_i e_j) - g(e_i) g(e_j)| for g acting on Im(O)."""
    g8 = np.zeros((8, 8), dtype=np.complex128)
    g8[0, 0] = 1.0
    g8[1:, 1:] = g
    m = multiplication_table()
    lhs = np.einsum("cd,abd->abc", g8, m)
    rhs = np.einsum("xa,yb,xyc->abc", g8, g8, m)
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))
