"""Generalized Wilson loops W(g) = scale * tr(c_1 g^s_1 c_2 g^s_2 ... c_r g^s_r).

Slot j (1-based) is the factor g^s_j that follows c_j. Merging and twisting
insert a Lie-algebra generator next to a slot: after g for s = +1, before
g^-1 for s = -1. Results are LoopSums, i.e. formal sums of products of loops,
so splittings tr(.)tr(.) stay products and re-evaluate at every g.

Two equivalent forms are produced:
  generic: sum over the orthonormal basis with the generator folded into the
           neighbouring coefficient matrix;
  closed:  the family's completeness relation applied to the words around the
           slots, which can merge two traces into one or split one into two.
"""
from dataclasses import dataclass
import logging

import numpy as np

from lib.error_handling import LgmError, ShapeError, UsageError
from lib.lie_catalog import GroupSpec, RepData, build_representation, completeness_channels
from lib.tensor_core import Tensor

logger = logging.getLogger(__name__)

GENERIC = "generic"
CLOSED = "closed"


@dataclass(frozen=True, eq=False)
class GeneralizedWilsonLoop:
    rep: RepData
    factors: tuple
    scale: complex = 1.0

    def __post_init__(self):
        if len(self.factors) == 0:
            raise UsageError("a Wilson loop needs at least one factor")
        d = self.rep.dim
        factors = []
        for coeff, sign in self.factors:
            c = np.array(coeff, dtype=np.complex128)
            if c.shape != (d, d):
                raise ShapeError(f"coefficient of shape {c.shape} on a {d}-dimensional representation")
            if sign not in (1, -1):
                raise UsageError(f"slot sign must be +1 or -1, got {sign}")
            c.flags.writeable = False
            factors.append((c, int(sign)))
        object.__setattr__(self, "factors", tuple(factors))
        object.__setattr__(self, "scale", complex(self.scale))

    @property
    def degree(self):
        return len(self.factors)

    @property
    def signs(self):
        return tuple(s for _, s in self.factors)

    @property
    def coeffs(self):
        return tuple(c for c, _ in self.factors)

    def rotated(self, k):
        """Same loop read from slot k onwards (trace cyclicity)."""
        k = (k - 1) % self.degree
        return GeneralizedWilsonLoop(self.rep, self.factors[k:] + self.factors[:k], self.scale)

    def with_coeffs(self, coeffs, scale=None):
        return GeneralizedWilsonLoop(
            self.rep, tuple(zip(coeffs, self.signs)), self.scale if scale is None else scale)

    def __call__(self, g):
        return evaluate(self, g)


@dataclass(frozen=True)
class LoopTerm:
    coef: complex
    loops: tuple = ()

    def evaluate(self, g):
        value = complex(self.coef)
        for loop in self.loops:
            value *= evaluate(loop, g)
        return value

    @property
    def degree(self):
        return sum(loop.degree for loop in self.loops)


@dataclass(frozen=True)
class LoopSum:
    terms: tuple = ()

    @classmethod
    def of(cls, *items):
        terms = []
        for item in items:
            if isinstance(item, GeneralizedWilsonLoop):
                terms.append(LoopTerm(1.0, (item,)))
            elif isinstance(item, LoopTerm):
                terms.append(item)
            elif isinstance(item, LoopSum):
                terms.extend(item.terms)
            else:
                terms.append(LoopTerm(complex(item)))
        return cls(tuple(terms))

    def __add__(self, other):
        return LoopSum.of(self, other)

    def __len__(self):
        return len(self.terms)

    def scaled(self, factor):
        return LoopSum(tuple(LoopTerm(t.coef * factor, t.loops) for t in self.terms))

    def times(self, loops):
        """Multiply every term by a fixed product of loops."""
        loops = tuple(loops)
        return LoopSum(tuple(LoopTerm(t.coef, t.loops + loops) for t in self.terms))

    def evaluate(self, g):
        return sum((t.evaluate(g) for t in self.terms), 0j)


def linear_loop(rep, coeff=None, sign=1, scale=1.0):
    coeff = np.eye(rep.dim) if coeff is None else coeff
    return GeneralizedWilsonLoop(rep, ((coeff, sign),), scale)


def trace_loop(rep, signs, coeffs=None, scale=1.0):
    if coeffs is None:
        coeffs = [np.eye(rep.dim)] * len(signs)
    return GeneralizedWilsonLoop(rep, tuple(zip(coeffs, signs)), scale)


def u1_loop(n, c=1.0):
    """W_{n,c}(z) = c z^n as a linear loop on the character rho_n."""
    return linear_loop(build_representation(GroupSpec("u1", n)), np.array([[c]]))


def evaluate(w, g):
    if isinstance(w, (LoopSum, LoopTerm)):
        return w.evaluate(g)
    rho = w.rep.represent(g)
    if rho.shape != (w.rep.dim, w.rep.dim):
        raise ShapeError(f"group element of shape {np.shape(g)} for {w.rep.spec.label}")
    rho_inv = rho.conj().T
    product = np.eye(w.rep.dim, dtype=np.complex128)
    for c, s in w.factors:
        product = product @ c @ (rho if s > 0 else rho_inv)
    return w.scale * np.trace(product)


def _check_slot(w, j):
    if not 1 <= j <= w.degree:
        raise UsageError(f"slot {j} out of range for a loop with {w.degree} factors")


def _check_same_group(w1, w2):
    if w1.rep.spec.group_key != w2.rep.spec.group_key:
        raise UsageError(f"cannot merge loops of {w1.rep.spec.label} and {w2.rep.spec.label}")


def _insert(coeffs, signs, j, xi):
    """Fold xi next to slot j: after g for +1, before g^-1 for -1."""
    coeffs = list(coeffs)
    if signs[j - 1] > 0:
        nxt = j % len(coeffs)
        coeffs[nxt] = xi @ coeffs[nxt]
    else:
        coeffs[j - 1] = coeffs[j - 1] @ xi
    return coeffs


# ---- words: ("m", matrix) and ("g", sign) tokens of a cyclic trace ----

def _word(w):
    tokens = []
    for c, s in w.factors:
        tokens.append(("m", c))
        tokens.append(("g", s))
    return tokens


def _segment(w, a, b):
    """Tokens strictly after g_a and strictly before g_b, cyclically."""
    tokens = _word(w)
    size = len(tokens)
    start = 2 * a
    length = (2 * (b - 1) - start) % size + 1
    return [tokens[(start + t) % size] for t in range(length)]


def _transpose_word(word, rep):
    s = rep.transpose_twist
    if s is None:
        raise UsageError(f"no transpose rule for {rep.spec.label}")
    s_inv = np.linalg.inv(s)
    out = []
    for kind, value in reversed(word):
        if kind == "m":
            out.append(("m", value.T))
        else:
            out.extend([("m", s), ("g", -value), ("m", s_inv)])
    return out


def _is_identity(m):
    return m is None or (m.shape[0] == m.shape[1] and np.array_equal(m, np.eye(m.shape[0])))


def _word_term(words, coef, rep):
    """LoopTerm for coef * prod_k tr(words[k])."""
    d = rep.dim
    loops = []
    for word in words:
        pairs, pending = [], None
        for kind, value in word:
            if kind == "m":
                pending = value if pending is None else pending @ value
            else:
                pairs.append([pending, value])
                pending = None
        if pairs and pending is not None:
            pairs[0][0] = pending if pairs[0][0] is None else pending @ pairs[0][0]
        constant = pending
        # cancel g^s g^-s with nothing in between, cyclically
        changed = True
        while changed and pairs:
            changed = False
            r = len(pairs)
            for t in range(r):
                u = (t + 1) % r
                if r > 1 and pairs[u][1] == -pairs[t][1] and _is_identity(pairs[u][0]):
                    carry = pairs[t][0]
                    if r == 2:
                        constant = carry if carry is not None else np.eye(d)
                        pairs = []
                    else:
                        w_idx = (t + 2) % r
                        target = pairs[w_idx][0]
                        if carry is not None:
                            pairs[w_idx][0] = carry if target is None else carry @ target
                        pairs = [p for k, p in enumerate(pairs) if k not in (t, u)]
                    changed = True
                    break
        if not pairs:
            coef = coef * np.trace(constant if constant is not None else np.eye(d))
            continue
        coeffs = [np.eye(d) if m is None else m for m, _ in pairs]
        loops.append(GeneralizedWilsonLoop(rep, tuple(zip(coeffs, [s for _, s in pairs]))))
    return LoopTerm(coef, tuple(loops))


def _mat(m):
    return [("m", m)]


def _merge_words(w1, j, w2, j2):
    s1, s2 = w1.signs[j - 1], w2.signs[j2 - 1]
    p, q = _segment(w1, j, j), _segment(w2, j2, j2)
    a = p + [("g", 1)] if s1 > 0 else [("g", -1)] + p
    b = q + [("g", 1)] if s2 > 0 else [("g", -1)] + q
    return a, b, s1 * s2


def _twist_words(w, j, j2):
    s1, s2 = w.signs[j - 1], w.signs[j2 - 1]
    p, q = _segment(w, j2, j), _segment(w, j, j2)
    a = ([("g", -1)] if s2 < 0 else []) + p + ([("g", 1)] if s1 > 0 else [])
    b = ([("g", -1)] if s1 < 0 else []) + q + ([("g", 1)] if s2 > 0 else [])
    return a, b, s1 * s2


def _scale_of(*loops):
    value = 1.0
    for loop in loops:
        value *= loop.scale
    return value


def _u1_collapse(loops, coef):
    """Product of U(1) loops as one character loop (or a constant)."""
    k, value = 0, coef
    for loop in loops:
        k += loop.rep.spec.n * sum(loop.signs)
        value *= loop.scale * np.prod([c[0, 0] for c in loop.coeffs])
    if k == 0:
        return LoopTerm(value)
    return LoopTerm(1.0, (u1_loop(k, value),))


def merge_at(w1, j, w2, j2, form=GENERIC):
    _check_same_group(w1, w2)
    _check_slot(w1, j)
    _check_slot(w2, j2)
    sign = w1.signs[j - 1] * w2.signs[j2 - 1]
    if form == GENERIC:
        terms = []
        for x1, x2 in zip(w1.rep.generators, w2.rep.generators):
            l1 = w1.with_coeffs(_insert(w1.coeffs, w1.signs, j, x1))
            l2 = w2.with_coeffs(_insert(w2.coeffs, w2.signs, j2, x2))
            terms.append(LoopTerm(sign, (l1, l2)))
        return LoopSum(tuple(terms))
    if w1.rep.spec.family == "u1":
        coef = -sign * w1.rep.spec.n * w2.rep.spec.n
        return LoopSum((_u1_collapse((w1, w2), coef),))

    rep = w1.rep
    a, b, sign = _merge_words(w1, j, w2, j2)
    coef = sign * _scale_of(w1, w2)
    channels = completeness_channels(rep.spec)
    terms = []
    for c, m in channels.transpose:
        terms.append(_word_term([_transpose_word(a, rep) + _mat(m) + b + _mat(m.T)], coef * c, rep))
    if channels.exchange:
        terms.append(_word_term([a + b], coef * channels.exchange, rep))
    if channels.trace:
        terms.append(_word_term([a, b], coef * channels.trace, rep))
    for c, x, y in channels.rank_one:
        terms.append(_word_term([a + _mat(x), b + _mat(y)], coef * c, rep))
    return LoopSum(tuple(terms))


def total_merge(w1, w2, form=GENERIC):
    total = LoopSum()
    for j in range(1, w1.degree + 1):
        for j2 in range(1, w2.degree + 1):
            total = total + merge_at(w1, j, w2, j2, form)
    return total


def twist_at(w, j, j2, form=GENERIC):
    _check_slot(w, j)
    _check_slot(w, j2)
    if j == j2:
        raise UsageError("twisting needs two different slots")
    sign = w.signs[j - 1] * w.signs[j2 - 1]
    if form == GENERIC:
        terms = []
        for x in w.rep.generators:
            coeffs = _insert(_insert(w.coeffs, w.signs, j, x), w.signs, j2, x)
            terms.append(LoopTerm(sign, (w.with_coeffs(coeffs),)))
        return LoopSum(tuple(terms))
    if w.rep.spec.family == "u1":
        return LoopSum((_u1_collapse((w,), -sign * w.rep.spec.n ** 2),))

    rep = w.rep
    a, b, sign = _twist_words(w, j, j2)
    coef = sign * w.scale
    channels = completeness_channels(rep.spec)
    terms = []
    for c, m in channels.transpose:
        terms.append(_word_term([_mat(m.T) + _transpose_word(a, rep) + _mat(m.T) + b], coef * c, rep))
    if channels.exchange:
        terms.append(_word_term([a, b], coef * channels.exchange, rep))
    if channels.trace:
        terms.append(_word_term([a + b], coef * channels.trace, rep))
    for c, x, y in channels.rank_one:
        terms.append(_word_term([a + _mat(x) + b + _mat(y)], coef * c, rep))
    return LoopSum(tuple(terms))


def total_twist(w, form=GENERIC):
    total = LoopSum()
    for j in range(1, w.degree + 1):
        for j2 in range(1, w.degree + 1):
            if j != j2:
                total = total + twist_at(w, j, j2, form)
    return total


def laplacian(w, form=GENERIC):
    return LoopSum.of(w).scaled(w.rep.lam * w.degree) + total_twist(w, form)


# ---- U(1) ----

def lift_u1(loop):
    """Rewrite a loop on rho_n as a loop on rho_1 with |n| slots per factor; 0 gives a constant."""
    n = loop.rep.spec.n
    if loop.rep.spec.family != "u1" or n == 1:
        return loop
    if n == 0:
        return complex(loop.scale * np.prod([c[0, 0] for c in loop.coeffs]))
    rep1 = build_representation(GroupSpec("u1", 1))
    one = np.ones((1, 1))
    factors = []
    for c, s in loop.factors:
        factors.append((c, s * int(np.sign(n))))
        factors.extend([(one, s * int(np.sign(n)))] * (abs(n) - 1))
    return GeneralizedWilsonLoop(rep1, tuple(factors), loop.scale)


def fourier_loop_sum(coefficients):
    """sum_n c_n z^n as a LoopSum on the defining character of U(1)."""
    rep1 = build_representation(GroupSpec("u1", 1))
    terms = []
    for n, c in sorted(coefficients.items()):
        if n == 0:
            terms.append(LoopTerm(complex(c)))
        else:
            signs = [int(np.sign(n))] * abs(n)
            terms.append(LoopTerm(1.0, (trace_loop(rep1, signs, scale=c),)))
    return LoopSum(tuple(terms))


def fourier_coefficients(loop_sum):
    coefficients = {}
    for term in LoopSum.of(loop_sum).terms:
        k, value = 0, complex(term.coef)
        for loop in term.loops:
            if loop.rep.spec.family != "u1":
                raise UsageError("Fourier expansion is only available on U(1)")
            k += loop.rep.spec.n * sum(loop.signs)
            value *= loop.scale * np.prod([c[0, 0] for c in loop.coeffs])
        coefficients[k] = coefficients.get(k, 0j) + value
    return coefficients


# ---- bridge to moments ----

@dataclass(frozen=True)
class SlotPattern:
    signs: tuple

    @property
    def n(self):
        return sum(1 for s in self.signs if s > 0)

    @property
    def n_dual(self):
        return sum(1 for s in self.signs if s < 0)


def lift_term(coef, loops):
    """Lift U(1) factors to rho_1 and fold constants into the coefficient."""
    lifted = []
    for loop in loops:
        loop = lift_u1(loop)
        if isinstance(loop, complex):
            coef = coef * loop
        else:
            lifted.append(loop)
    return coef, tuple(lifted)


def loops_to_tensor(loops):
    """Coefficient tensor A with prod_r W_r(g) = sum A[rows, cols] * rho^{n,n'}(g)[rows, cols].

    Rows are (i_1..i_n; i'_1..i'_n') and columns (j_1..j_n; j'_1..j'_n'), V
    slots first. A + slot carries rho(g)_{ij}, a - slot carries
    rho(g^-1)_{j'i'}, i.e. the dual acts by the transposed inverse.
    """
    coef, loops = lift_term(1.0, loops)
    if not loops:
        return Tensor(np.array(coef)), SlotPattern(())
    rep = loops[0].rep
    if any(loop.rep is not rep for loop in loops):
        raise UsageError("loops_to_tensor needs loops on a single representation")

    full = np.array(coef, dtype=np.complex128)
    signs = []
    for loop in loops:
        r = loop.degree
        operands = []
        for s in range(r):
            q_prev = 2 * ((s - 1) % r) + 1
            operands.extend([loop.coeffs[s], [q_prev, 2 * s]])
        block = np.einsum(*operands, list(range(2 * r))) * loop.scale
        full = np.multiply.outer(full, block)
        signs.extend(loop.signs)

    plus = [t for t, s in enumerate(signs) if s > 0]
    minus = [t for t, s in enumerate(signs) if s < 0]
    rows = [2 * t for t in plus] + [2 * t + 1 for t in minus]
    cols = [2 * t + 1 for t in plus] + [2 * t for t in minus]
    return Tensor(full.transpose(rows + cols)), SlotPattern(tuple(signs))


# ---- JSON ----

def _complex_pair(z):
    return [float(np.real(z)), float(np.imag(z))]


def loop_to_json(loop):
    return {
        "rep": loop.rep.spec.to_json(),
        "scale": _complex_pair(loop.scale),
        "factors": [
            {"coeff": [[_complex_pair(z) for z in row] for row in c], "sign": s}
            for c, s in loop.factors
        ],
    }


def loop_from_json(document):
    try:
        rep = build_representation(GroupSpec(document["rep"]["family"], document["rep"].get("n", 1)))
        factors = []
        for factor in document["factors"]:
            coeff = factor.get("coeff")
            if coeff is None:
                c = np.eye(rep.dim)
            else:
                c = np.array([[complex(re, im) for re, im in row] for row in coeff])
            factors.append((c, int(factor.get("sign", 1))))
        scale = complex(*document.get("scale", [1.0, 0.0]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, LgmError):
            raise
        raise UsageError(f"malformed loop record: {e}") from e
    return GeneralizedWilsonLoop(rep, tuple(factors), scale)


def loop_sum_to_json(loop_sum):
    records = []
    for term in LoopSum.of(loop_sum).terms:
        if len(term.loops) == 0:
            records.append({"constant": _complex_pair(term.coef)})
        elif len(term.loops) == 1:
            loop = term.loops[0]
            records.append(loop_to_json(GeneralizedWilsonLoop(loop.rep, loop.factors, loop.scale * term.coef)))
        elif len(term.loops) == 2:
            records.append({"pair": [loop_to_json(l) for l in term.loops], "coef": _complex_pair(term.coef)})
        else:
            records.append({"product": [loop_to_json(l) for l in term.loops], "coef": _complex_pair(term.coef)})
    return records


def loop_sum_from_json(records):
    if isinstance(records, dict):
        records = [records]
    terms = []
    for record in records:
        if "constant" in record:
            terms.append(LoopTerm(complex(*record["constant"])))
        elif "pair" in record or "product" in record:
            loops = tuple(loop_from_json(r) for r in record.get("pair", record.get("product")))
            terms.append(LoopTerm(complex(*record.get("coef", [1.0, 0.0])), loops))
        else:
            terms.append(LoopTerm(1.0, (loop_from_json(record),)))
    return LoopSum(tuple(terms))
