"""Moment operators T(nu) on V^(x)n (x) V*^(x)n' and Weingarten maps.

A multi-index is (i_1..i_n; i'_1..i'_n') with the V slots first. The group
acts on a V slot by rho(g) and on a dual slot by rho(g^-1)^T = conj(rho(g)),
so an entry of the tensor representation is

    rho(g)_{i_1 j_1} ... rho(g)_{i_n j_n} rho(g^-1)_{j'_1 i'_1} ... rho(g^-1)_{j'_n' i'_n'}.

The tensor Casimir C of this representation is non-positive; its kernel is the
space of invariants, so the Haar moment is the spectral projector onto ker C
and the Brownian moment at time t is exp(t C / 2).
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product
import logging

import numpy as np
from sympy.combinatorics import Permutation

from config import load_defaults
from lib.error_handling import SamplingError, SpectralGapError, UsageError, check_budget
from lib.lie_catalog import GroupSpec, build_representation, split_casimir
from lib.tensor_core import Tensor, contract, eig_hermitian, pseudoinverse
from lib.wilson_loops import (CLOSED, LoopSum, LoopTerm, fourier_coefficients, lift_term,
                              loops_to_tensor, merge_at, u1_loop)

logger = logging.getLogger(__name__)

HAAR = "haar"
BROWNIAN = "brownian"
WILSON = "wilson"
MEASURE_KINDS = (HAAR, BROWNIAN, WILSON)

PERMUTATIONS = "permutations"
PAIRINGS = "pairings"
G2U = "g2u"
NULLSPACE = "nullspace"
SPANNING_SOURCES = (PERMUTATIONS, PAIRINGS, G2U, NULLSPACE)


@dataclass(frozen=True)
class MeasureSpec:
    kind: str = HAAR
    t: float = None
    beta: float = None
    plaquettes: tuple = ()

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise UsageError(f"unknown measure {self.kind!r}; expected one of {', '.join(MEASURE_KINDS)}")
        if self.kind == BROWNIAN and not (self.t is not None and self.t > 0):
            raise UsageError(f"Brownian measure needs t > 0, got {self.t}")
        if self.kind == WILSON:
            if self.beta is None:
                raise UsageError("Wilson measure needs beta")
            if not self.plaquettes:
                raise UsageError("Wilson measure needs an explicit plaquette list")
            rep = self.plaquettes[0].rep
            for p in self.plaquettes:
                if p.degree != 1 or p.rep is not rep:
                    raise UsageError("plaquettes must be linear loops of one representation")
        object.__setattr__(self, "plaquettes", tuple(self.plaquettes))

    @classmethod
    def haar(cls):
        return cls(HAAR)

    @classmethod
    def brownian(cls, t):
        return cls(BROWNIAN, t=float(t))

    @classmethod
    def wilson(cls, beta, plaquettes):
        return cls(WILSON, beta=float(beta), plaquettes=tuple(plaquettes))

    @classmethod
    def parse(cls, text, plaquettes=()):
        """'haar', 'brownian:t=1.5' or 'wilson:beta=0.1'."""
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, _, value = item.partition("=")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise UsageError(f"bad measure parameter {item!r} in {text!r}")
        kind = kind.strip().lower()
        if kind == BROWNIAN:
            return cls.brownian(params.get("t", 0.0))
        if kind == WILSON:
            return cls.wilson(params.get("beta"), plaquettes)
        return cls(kind)

    def describe(self):
        if self.kind == BROWNIAN:
            return f"brownian:t={self.t!r}"
        if self.kind == WILSON:
            return f"wilson:beta={self.beta!r}"
        return self.kind


@dataclass(frozen=True, eq=False)
class MomentOperator:
    rep: object
    n: int
    n_dual: int
    matrix: Tensor
    measure: MeasureSpec
    spectrum: tuple = ()
    rank: int = None

    def as_tensor(self):
        d = self.rep.dim
        return self.matrix.data.reshape((d,) * (2 * (self.n + self.n_dual)))


@dataclass(frozen=True, eq=False)
class SpanningSet:
    rep: object
    n: int
    n_dual: int
    source: str
    labels: tuple
    vectors: np.ndarray  # one flattened invariant tensor per row


@dataclass(frozen=True, eq=False)
class WeingartenMap:
    spanning: SpanningSet
    gram: np.ndarray
    wg: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def tau(self):
        return self.spanning.vectors.T

    def moment(self):
        """tau o Wg o tau*, the Haar moment when the spanning set is complete."""
        tau = self.tau
        return tau @ self.wg @ tau.conj().T


def _defaults():
    return load_defaults()


def _budget(budget):
    return budget if budget is not None else _defaults().budget.max_dim


def _slots(n, n_dual):
    if n < 0 or n_dual < 0 or n + n_dual < 1:
        raise UsageError(f"tensor order (n, n') = ({n}, {n_dual}) needs n, n' >= 0 and n + n' >= 1")
    return n + n_dual


def _embed_pair(op, a, b, m, d):
    """Operator on slots a < b (as a d^2 x d^2 matrix) lifted to all m slots."""
    rest = [s for s in range(m) if s not in (a, b)]
    full = np.kron(op, np.eye(d ** (m - 2)))
    order = [a, b] + rest
    inv = list(np.argsort(order))
    axes = inv + [m + i for i in inv]
    return full.reshape((d,) * (2 * m)).transpose(axes).reshape(d ** m, d ** m)


def _embed_one(op, slot, m, d):
    return np.kron(np.kron(np.eye(d ** slot), op), np.eye(d ** (m - slot - 1)))


def tensor_casimir(rep, n, n_dual, budget=None):
    """C = (n+n') lambda + 2 sum K(V,V) + 2 sum K(V*,V*) - 2 sum K(V,V*) over slot pairs."""
    m = _slots(n, n_dual)
    d = rep.dim
    check_budget(d ** m, _budget(budget))
    k = split_casimir(rep).k.data
    c = m * rep.lam * np.eye(d ** m, dtype=np.complex128)
    for a in range(m):
        for b in range(a + 1, m):
            if b < n:
                op, coef = k.transpose(0, 2, 1, 3), 2.0
            elif a >= n:
                op, coef = k.transpose(1, 3, 0, 2), 2.0
            else:
                op, coef = k.transpose(0, 3, 1, 2), -2.0
            c += coef * _embed_pair(op.reshape(d * d, d * d), a, b, m, d)
    return Tensor(c)


def tensor_casimir_from_generators(rep, n, n_dual, budget=None):
    """sum_a (xi^a acting on every slot)^2; dual slots carry -xi^T."""
    m = _slots(n, n_dual)
    d = rep.dim
    check_budget(d ** m, _budget(budget))
    c = np.zeros((d ** m, d ** m), dtype=np.complex128)
    for xi in rep.generators:
        action = sum(_embed_one(xi if s < n else -xi.T, s, m, d) for s in range(m))
        c += action @ action
    return Tensor(c)


def tensor_rep_matrix(rep, g, n, n_dual):
    rho = rep.represent(g)
    out = np.eye(1, dtype=np.complex128)
    for s in range(n + n_dual):
        out = np.kron(out, rho if s < n else rho.conj())
    return out


@lru_cache(maxsize=64)
def _casimir_eig(spec: GroupSpec, n, n_dual):
    rep = build_representation(spec)
    eig = eig_hermitian(tensor_casimir(rep, n, n_dual, budget=np.inf))
    logger.debug("tensor Casimir of %s on (%d,%d): %d eigenvalues", spec.label, n, n_dual,
                 len(eig.eigenvalues))
    return eig


def _null_cutoff(rep, m, rel_cutoff):
    rel_cutoff = rel_cutoff if rel_cutoff is not None else _defaults().linalg.null_cutoff
    return rel_cutoff * max(1.0, abs(rep.lam) * m)


def _clusters(values, tol):
    groups = []
    for w in values:
        if groups and abs(w - groups[-1][-1]) <= tol:
            groups[-1].append(w)
        else:
            groups.append([w])
    return groups


def casimir_spectrum(rep, n, n_dual, rel_cutoff=None, budget=None):
    """Distinct tensor-Casimir eigenvalues with multiplicities, ascending."""
    m = _slots(n, n_dual)
    check_budget(rep.dim ** m, _budget(budget))
    eig = _casimir_eig(rep.spec, n, n_dual)
    tol = _null_cutoff(rep, m, rel_cutoff)
    return tuple((float(np.mean(g)), len(g)) for g in _clusters(eig.eigenvalues, tol))


def isotypic_decomposition(rep, n, n_dual, rel_cutoff=None, budget=None):
    """[(eigenvalue, spectral projector)] of the tensor Casimir."""
    m = _slots(n, n_dual)
    check_budget(rep.dim ** m, _budget(budget))
    eig = _casimir_eig(rep.spec, n, n_dual)
    tol = _null_cutoff(rep, m, rel_cutoff)
    out, start = [], 0
    for group in _clusters(eig.eigenvalues, tol):
        u = eig.eigenvectors[:, start:start + len(group)]
        out.append((float(np.mean(group)), u @ u.conj().T))
        start += len(group)
    return out


def haar_moment(rep, n, n_dual, rel_cutoff=None, budget=None):
    m = _slots(n, n_dual)
    check_budget(rep.dim ** m, _budget(budget))
    eig = _casimir_eig(rep.spec, n, n_dual)
    w = eig.eigenvalues
    cutoff = _null_cutoff(rep, m, rel_cutoff)
    null = np.abs(w) < cutoff
    if (~null).any():
        gap = float(np.min(np.abs(w[~null])))
        factor = _defaults().linalg.gap_factor
        if gap < factor * cutoff:
            raise SpectralGapError(gap, cutoff, factor)
    u = eig.eigenvectors[:, null]
    rank = int(null.sum())
    logger.info("Haar moment of %s on (%d,%d): dimension %d, rank %d",
                rep.spec.label, n, n_dual, rep.dim ** m, rank)
    return MomentOperator(rep=rep, n=n, n_dual=n_dual, matrix=Tensor(u @ u.conj().T),
                          measure=MeasureSpec.haar(),
                          spectrum=casimir_spectrum(rep, n, n_dual, rel_cutoff, budget), rank=rank)


def heat_operator(rep, n, n_dual, t, order=0, budget=None):
    """d^order/dt^order of exp(t C / 2) for t >= 0."""
    if t < 0:
        raise UsageError(f"Brownian time must be non-negative, got {t}")
    m = _slots(n, n_dual)
    check_budget(rep.dim ** m, _budget(budget))
    eig = _casimir_eig(rep.spec, n, n_dual)
    w = eig.eigenvalues
    u = eig.eigenvectors
    return (u * ((0.5 * w) ** order * np.exp(0.5 * t * w))) @ u.conj().T


def brownian_moment(rep, n, n_dual, t, budget=None):
    """expm(t C / 2), evaluated on the cached eigendecomposition of C."""
    if not t > 0:
        raise UsageError(f"Brownian time must be positive, got {t}")
    matrix = heat_operator(rep, n, n_dual, t, budget=budget)
    return MomentOperator(rep=rep, n=n, n_dual=n_dual, matrix=Tensor(matrix),
                          measure=MeasureSpec.brownian(t),
                          spectrum=casimir_spectrum(rep, n, n_dual, budget=budget))


def moment(rep, n, n_dual, measure, rel_cutoff=None, budget=None):
    if measure.kind == HAAR:
        return haar_moment(rep, n, n_dual, rel_cutoff, budget)
    if measure.kind == BROWNIAN:
        return brownian_moment(rep, n, n_dual, measure.t, budget)
    raise UsageError("the Wilson measure has no exact moment operator; use Monte-Carlo")


# ---- spanning sets ----

def perfect_matchings(slots):
    slots = list(slots)
    if not slots:
        yield ()
        return
    first = slots[0]
    for k in range(1, len(slots)):
        rest = slots[1:k] + slots[k + 1:]
        for matching in perfect_matchings(rest):
            yield ((first, slots[k]),) + matching


def _pairing_form(rep, a, b, n):
    if rep.spec.family == "sp" and (a < n) == (b < n):
        return rep.constants["J"]
    return np.eye(rep.dim)


def _delta_tensor(pairs, forms, m):
    operands = []
    for (a, b), form in zip(pairs, forms):
        operands.extend([form, [a, b]])
    return np.einsum(*operands, list(range(m))).reshape(-1)


def spanning_set(rep, n, n_dual, source=NULLSPACE, rel_cutoff=None, budget=None):
    m = _slots(n, n_dual)
    d = rep.dim
    check_budget(d ** m, _budget(budget))
    family = rep.spec.family
    if source == PERMUTATIONS:
        if family != "u" or n != n_dual:
            raise UsageError("permutation spanning sets need U(N) and n = n'")
        labels, vectors = [], []
        for image in permutations(range(n)):
            sigma = Permutation(list(image))
            pairs = [(r, n + sigma(r)) for r in range(n)]
            labels.append(sigma)
            vectors.append(_delta_tensor(pairs, [np.eye(d)] * n, m))
    elif source == PAIRINGS:
        if family not in ("so", "sp") or m % 2:
            raise UsageError("pairing spanning sets need SO(N) or Sp(N) and an even number of slots")
        labels, vectors = [], []
        for matching in perfect_matchings(range(m)):
            labels.append(matching)
            forms = [_pairing_form(rep, a, b, n) for a, b in matching]
            vectors.append(_delta_tensor(matching, forms, m))
    elif source == G2U:
        if family != "g2" or (n, n_dual) != (2, 0):
            raise UsageError("the u spanning set needs G2 and (n, n') = (2, 0)")
        labels, vectors = ["u"], [np.eye(7).reshape(-1)]
    elif source == NULLSPACE:
        eig = _casimir_eig(rep.spec, n, n_dual)
        null = np.abs(eig.eigenvalues) < _null_cutoff(rep, m, rel_cutoff)
        vectors = list(eig.eigenvectors[:, null].T)
        labels = [f"v{k}" for k in range(len(vectors))]
    else:
        raise UsageError(f"unknown spanning source {source!r}; expected one of {', '.join(SPANNING_SOURCES)}")

    vectors = np.array(vectors, dtype=np.complex128).reshape(len(labels), d ** m)
    if len(labels):
        c = tensor_casimir(rep, n, n_dual, budget=budget).data
        residual = np.linalg.norm(vectors @ c.T, axis=1) / np.maximum(np.linalg.norm(vectors, axis=1), 1e-300)
        if residual.max() > 1e-9:
            raise RuntimeError(f"spanning vector is not invariant (residual {residual.max():.2e})")
    vectors.flags.writeable = False
    return SpanningSet(rep=rep, n=n, n_dual=n_dual, source=source, labels=tuple(labels), vectors=vectors)


def weingarten(ss, rel_cutoff=None):
    """Gram matrix tau* tau and its Moore-Penrose inverse Wg."""
    if not len(ss.labels):
        raise UsageError("empty spanning set")
    rel_cutoff = rel_cutoff if rel_cutoff is not None else _defaults().linalg.rel_cutoff
    if ss.source == PERMUTATIONS:
        # <tau(s), tau(t)> = N^#cycles(s^-1 t), exact in integers
        n = ss.rep.dim
        gram = np.array([[n ** cycle_count(~s * t) for t in ss.labels] for s in ss.labels], dtype=np.complex128)
    else:
        tau = ss.vectors.T
        gram = tau.conj().T @ tau
    wg = pseudoinverse(gram, rel_cutoff).data
    logger.info("Weingarten map on %d labels (%s), Gram rank %d", len(ss.labels), ss.source,
                int(np.sum(np.abs(np.linalg.eigvalsh((gram + gram.conj().T) / 2)) > rel_cutoff * np.abs(gram).max())))
    return WeingartenMap(spanning=ss, gram=gram, wg=wg)


def cycle_count(sigma):
    return Permutation(sigma).cycles


# ---- expectations ----

def _expand(items):
    sums = [LoopSum.of(item) for item in items]
    for combo in product(*(s.terms for s in sums)):
        coef = 1.0 + 0j
        loops = ()
        for term in combo:
            coef *= term.coef
            loops += term.loops
        yield coef, loops


def _contract_term(coef, loops, operator, cache):
    coef, loops = lift_term(coef, loops)
    if not loops:
        return complex(coef)
    a, pattern = loops_to_tensor(loops)
    rep = loops[0].rep
    key = (rep.spec, pattern.n, pattern.n_dual)
    if key not in cache:
        d = rep.dim
        cache[key] = np.asarray(operator(rep, pattern.n, pattern.n_dual)).reshape((d,) * a.ndim)
    value = contract(a, cache[key], [(k, k) for k in range(a.ndim)]).data
    return complex(coef * value)


def _expect(items, operator):
    cache = {}
    return sum((_contract_term(coef, loops, operator, cache) for coef, loops in _expand(items)), 0j)


def expect_term(coef, loops, measure, rel_cutoff=None, budget=None):
    return _contract_term(coef, loops, lambda rep, n, nd: moment(rep, n, nd, measure, rel_cutoff, budget).matrix, {})


def expect_product(items, measure, rel_cutoff=None, budget=None, samples=None, rng=None):
    """E[prod of items] for loops, LoopTerms or LoopSums.

    Exact for Haar and Brownian measures; Wilson returns an MCEstimate.
    """
    items = list(items)
    if measure.kind == WILSON:
        from lib.sampling import mc_expect

        samples = samples if samples is not None else _defaults().sampling.samples
        if not samples:
            raise SamplingError("Wilson expectation with zero samples")
        return mc_expect(items, measure, samples, rng)
    return _expect(items, lambda rep, n, nd: moment(rep, n, nd, measure, rel_cutoff, budget).matrix)


def brownian_expect(items, t, order=0, budget=None):
    """d^order/dt^order of E_t[prod of items] under Brownian motion from the identity; t = 0 allowed."""
    return _expect(list(items), lambda rep, n, nd: heat_operator(rep, n, nd, t, order, budget))


def expect_u1_recursive(c1, c2):
    """E_Haar[W1 W2] for two U(1) Fourier series by the merging recursion.

    For characters n, m not both 0 the Haar identity gives
    -(n^2 + m^2) E[W_n W_m] = -2 E[M(W_n, W_m)], and M(W_n, W_m) is a single
    character loop whose expectation is its constant part.
    """
    total = 0j
    for n, c in c1.items():
        for m, d in c2.items():
            if n == 0 and m == 0:
                total += c * d
                continue
            if n == 0 or m == 0:
                # W_0 is a constant, W_k (k != 0) integrates to 0
                continue
            merged = merge_at(u1_loop(n, c), 1, u1_loop(m, d), 1, form=CLOSED)
            total += 2.0 / (n * n + m * m) * fourier_coefficients(merged).get(0, 0j)
    return total
