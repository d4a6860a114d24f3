"""Orthonormal Lie-algebra bases, split Casimir tensors and Casimir eigenvalues.

Generators are skew-Hermitian d x d matrices, orthonormal under the family's
form kappa(X, Y) = -s tr(XY). The scale s is 1/2 for SO(N) and Sp(N) and 1
for U(N), SU(N) and G2; with these scales the completeness relations

    SO(N)  K = d_ik d_jl - d_il d_jk                      lambda = 1 - N
    Sp(N)  K = J_ik J_jl - d_il d_jk                      lambda = -(1 + 2N)
    U(N)   K = -d_il d_jk                                 lambda = -N
    SU(N)  K = -d_il d_jk + d_ij d_kl / N                 lambda = -N + 1/N
    G2     K = (d_ik d_jl - d_il d_jk)/2 - psi_rij psi_rkl / 6   lambda = -2

hold exactly for K_ijkl = sum_a xi^a_ij xi^a_kl.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import logging

import numpy as np

from lib.error_handling import GroupSpecError
from lib.octonions import automorphism_residual, derivation_basis, psi_symbol
from lib.tensor_core import Tensor

logger = logging.getLogger(__name__)

FAMILIES = ("so", "sp", "u", "su", "g2", "u1")
FAMILY_ALIASES = {"u1power": "u1", "usp": "sp"}
FAMILY_LABELS = {"so": "SO", "sp": "Sp", "u": "U", "su": "SU", "g2": "G2", "u1": "U1power"}
KAPPA_SCALE = {"so": 0.5, "sp": 0.5, "u": 1.0, "su": 1.0, "g2": 1.0}
MIN_N = {"so": 2, "sp": 1, "u": 1, "su": 2}
ORTHONORMAL_TOL = 1e-12


@dataclass(frozen=True)
class GroupSpec:
    family: str
    n: int = 1

    def __post_init__(self):
        family = str(self.family).lower()
        family = FAMILY_ALIASES.get(family, family)
        if family not in FAMILIES:
            raise GroupSpecError(f"unsupported family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        n = int(self.n)
        if family in MIN_N and n < MIN_N[family]:
            raise GroupSpecError(
                f"{FAMILY_LABELS[family]}(N) requires N >= {MIN_N[family]}, got N={n}")
        if family == "g2":
            n = 7
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "n", n)

    @property
    def group_key(self):
        # all character powers of U(1) share one group
        if self.family == "u1":
            return ("u1",)
        return (self.family, self.n)

    @property
    def label(self):
        if self.family == "g2":
            return "G2"
        if self.family == "u1":
            return f"U(1) character {self.n}"
        return f"{FAMILY_LABELS[self.family]}({self.n})"

    def to_json(self):
        return {"family": self.family, "n": self.n}


@dataclass(frozen=True, eq=False)
class RepData:
    spec: GroupSpec
    dim: int
    generators: np.ndarray
    casimir: np.ndarray
    lam: float
    kappa_scale: float
    constants: dict = field(default_factory=dict)
    # S with g^T = S g^{-1} S^{-1} on the group; None when transposes are not expressible
    transpose_twist: np.ndarray = None
    # Lie-algebra basis in the group's defining realization (differs only for U1power)
    group_generators: np.ndarray = None

    @property
    def lie_dim(self):
        return len(self.generators)

    def kappa(self, x, y):
        return float(np.real(-self.kappa_scale * np.trace(np.asarray(x) @ np.asarray(y))))

    def represent(self, g):
        """rho(g) for g given in the group's defining realization."""
        g = np.asarray(g, dtype=np.complex128)
        if self.spec.family != "u1":
            return g
        z = g.reshape(-1)[0]
        k = self.spec.n
        return np.array([[z ** k if k >= 0 else np.conj(z) ** (-k)]], dtype=np.complex128)

    @property
    def group_dim(self):
        return self.group_generators.shape[-1]


@dataclass(frozen=True)
class SplitCasimir:
    k: Tensor

    @property
    def dim(self):
        return self.k.shape[0]

    def contraction(self):
        """K_ikkj, which equals lambda times the identity."""
        return np.einsum("ikkj->ij", self.k.data)


@dataclass(frozen=True)
class Completeness:
    """K as a sum of index structures.

    transpose: (coef, M) terms coef * M_ik M_jl
    exchange:  coef * d_il d_jk
    trace:     coef * d_ij d_kl
    rank_one:  (coef, A, B) terms coef * A_ij B_kl
    """

    dim: int
    transpose: tuple = ()
    exchange: complex = 0.0
    trace: complex = 0.0
    rank_one: tuple = ()

    def to_tensor(self):
        d = self.dim
        eye = np.eye(d)
        k = np.zeros((d, d, d, d), dtype=np.complex128)
        for coef, m in self.transpose:
            k += coef * np.einsum("ik,jl->ijkl", m, m)
        if self.exchange:
            k += self.exchange * np.einsum("il,jk->ijkl", eye, eye)
        if self.trace:
            k += self.trace * np.einsum("ij,kl->ijkl", eye, eye)
        for coef, a, b in self.rank_one:
            k += coef * np.einsum("ij,kl->ijkl", a, b)
        return k


def unit(d, i, j):
    e = np.zeros((d, d), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def symplectic_form(n):
    j = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def gram_schmidt(mats, kappa_scale):
    """Modified Gram-Schmidt under kappa(X, Y) = -s Re tr(XY)."""
    def kappa(x, y):
        return np.real(-kappa_scale * np.trace(x @ y))

    basis = []
    for m in mats:
        v = np.array(m, dtype=np.complex128)
        for b in basis:
            v = v - kappa(b, v) * b
        norm2 = kappa(v, v)
        if norm2 <= ORTHONORMAL_TOL:
            continue
        basis.append(v / np.sqrt(norm2))
    return basis


def _so_raw(n):
    return [unit(n, i, j) - unit(n, j, i) for i in range(n) for j in range(i + 1, n)]


def _u_offdiagonal(n):
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            mats.append(1j * (unit(n, i, j) + unit(n, j, i)))
            mats.append(unit(n, i, j) - unit(n, j, i))
    return mats


def _sp_raw(n):
    def iota(a, b):
        return np.block([[a, b], [-b.conj(), a.conj()]])

    zero = np.zeros((n, n), dtype=np.complex128)
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            mats.append(iota(unit(n, i, j) - unit(n, j, i), zero))
            mats.append(iota(1j * (unit(n, i, j) + unit(n, j, i)), zero))
            mats.append(iota(zero, unit(n, i, j) + unit(n, j, i)))
            mats.append(iota(zero, 1j * (unit(n, i, j) + unit(n, j, i))))
    for i in range(n):
        mats.append(iota(1j * unit(n, i, i), zero))
        mats.append(iota(zero, unit(n, i, i)))
        mats.append(iota(zero, 1j * unit(n, i, i)))
    return mats


def _su_cartan(n):
    mats = []
    for l in range(1, n):
        h = np.zeros((n, n), dtype=np.complex128)
        h[:l, :l] = np.eye(l)
        h[l, l] = -l
        mats.append(1j * h)
    return mats


def _generators(spec):
    n = spec.n
    family = spec.family
    if family == "so":
        return _so_raw(n)
    if family == "sp":
        return _sp_raw(n)
    if family == "u":
        return _u_offdiagonal(n) + [1j * unit(n, i, i) for i in range(n)]
    if family == "su":
        return _u_offdiagonal(n) + _su_cartan(n)
    if family == "g2":
        return list(derivation_basis())
    raise GroupSpecError(f"no generator construction for {spec.label}")


@lru_cache
def build_representation(spec: GroupSpec) -> RepData:
    if spec.family == "u1":
        generators = np.array([[[1j * spec.n]]], dtype=np.complex128)
        group_generators = np.array([[[1j]]], dtype=np.complex128)
        kappa_scale = 1.0 / spec.n ** 2 if spec.n else 1.0
    else:
        kappa_scale = KAPPA_SCALE[spec.family]
        generators = np.stack(gram_schmidt(_generators(spec), kappa_scale))
        group_generators = generators

    expected = lie_algebra_dim(spec)
    if len(generators) != expected:
        raise RuntimeError(
            f"{spec.label}: built {len(generators)} generators, expected {expected}")

    d = generators.shape[-1]
    casimir = np.einsum("aij,ajk->ik", generators, generators)
    lam = float(np.real(np.trace(casimir)) / d)
    residual = np.linalg.norm(casimir - lam * np.eye(d))
    if residual > 1e-10:
        raise RuntimeError(f"{spec.label}: Casimir is not scalar (residual {residual:.2e})")

    constants = {}
    twist = None
    if spec.family == "sp":
        constants["J"] = symplectic_form(spec.n)
        twist = constants["J"]
    elif spec.family == "g2":
        constants["psi"] = psi_symbol()
        twist = np.eye(7, dtype=np.complex128)
    elif spec.family == "so":
        twist = np.eye(spec.n, dtype=np.complex128)

    for arr in (generators, casimir, group_generators, *constants.values()):
        arr.flags.writeable = False
    logger.debug("built %s: d=%d, %d generators, lambda=%s", spec.label, d, len(generators), lam)
    return RepData(spec=spec, dim=d, generators=generators, casimir=casimir, lam=lam,
                   kappa_scale=kappa_scale, constants=constants, transpose_twist=twist,
                   group_generators=group_generators)


def lie_algebra_dim(spec):
    n = spec.n
    return {
        "so": n * (n - 1) // 2,
        "sp": n * (2 * n + 1),
        "u": n * n,
        "su": n * n - 1,
        "g2": 14,
        "u1": 1,
    }[spec.family]


def representation_dim(spec):
    return {"sp": 2 * spec.n, "g2": 7, "u1": 1}.get(spec.family, spec.n)


def split_casimir(rep: RepData) -> SplitCasimir:
    return SplitCasimir(Tensor(np.einsum("aij,akl->ijkl", rep.generators, rep.generators)))


def generic_channels(rep: RepData) -> Completeness:
    return Completeness(dim=rep.dim, rank_one=tuple((1.0, x, x) for x in rep.generators))


def completeness_channels(spec: GroupSpec) -> Completeness:
    d = representation_dim(spec)
    eye = np.eye(d, dtype=np.complex128)
    family = spec.family
    if family == "so":
        return Completeness(dim=d, transpose=((1.0, eye),), exchange=-1.0)
    if family == "sp":
        return Completeness(dim=d, transpose=((1.0, symplectic_form(spec.n)),), exchange=-1.0)
    if family == "u":
        return Completeness(dim=d, exchange=-1.0)
    if family == "su":
        return Completeness(dim=d, exchange=-1.0, trace=1.0 / spec.n)
    if family == "g2":
        psi = psi_symbol()
        return Completeness(dim=d, transpose=((0.5, eye),), exchange=-0.5,
                            rank_one=tuple((-1.0 / 6, psi[r], psi[r]) for r in range(7)))
    return Completeness(dim=1, exchange=-float(spec.n ** 2))


def closed_form_completeness(spec: GroupSpec) -> SplitCasimir:
    return SplitCasimir(Tensor(completeness_channels(spec).to_tensor()))


def casimir_eigenvalue(spec: GroupSpec) -> float:
    n = spec.n
    family = spec.family
    if family == "so":
        return 1.0 - n
    if family == "sp":
        return -(1.0 + 2 * n)
    if family == "u":
        return -float(n)
    if family == "su":
        return -n + 1.0 / n
    if family == "u1":
        return -float(n ** 2)
    return float(np.real(closed_form_completeness(spec).contraction()[0, 0]))


def random_algebra_element(rep, rng, scale=1.0):
    z = rng.standard_normal(len(rep.group_generators))
    return scale * np.einsum("a,aij->ij", z, rep.group_generators)


def group_residual(rep: RepData, g) -> float:
    """Largest violation of the defining constraints of the group at g."""
    g = np.asarray(g, dtype=np.complex128)
    d = g.shape[0]
    residual = np.linalg.norm(g.conj().T @ g - np.eye(d))
    family = rep.spec.family
    if family in ("so", "g2"):
        residual = max(residual, np.linalg.norm(g.imag), abs(np.linalg.det(g) - 1))
    if family == "su":
        residual = max(residual, abs(np.linalg.det(g) - 1))
    if family == "sp":
        j = rep.constants["J"]
        residual = max(residual, np.linalg.norm(g.T @ j @ g - j))
    if family == "g2":
        residual = max(residual, automorphism_residual(g))
    return float(residual)
