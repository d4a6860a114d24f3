"""Monte-Carlo oracle: Haar and Brownian samplers, loop expectations with error
bars, and the numerical check of the Laplacian integration-by-parts identity.
"""
from dataclasses import dataclass, field
import logging

from joblib import Parallel, delayed
import numpy as np
from scipy.integrate import quad_vec
from tqdm import tqdm

from config import load_defaults
from lib.error_handling import SamplingError, UsageError
from lib.moments import BROWNIAN, HAAR, WILSON, MeasureSpec, brownian_expect, expect_product
from lib.tensor_core import expm_skew_batch
from lib.wilson_loops import (CLOSED, GeneralizedWilsonLoop, LoopSum, LoopTerm, total_merge,
                              total_twist)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RngSpec:
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if self.stream < 0:
            raise UsageError(f"stream must be non-negative, got {self.stream}")

    def generator(self, chunk=0):
        """PCG64 stream for (seed, stream, chunk); chunks never overlap across streams."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream, chunk))
        return np.random.Generator(np.random.PCG64(sequence))


@dataclass(frozen=True)
class MCEstimate:
    value: complex
    stderr: float
    samples: int
    ess: float = None
    imag_discarded: float = None

    def z_score(self, target=0.0):
        if self.stderr == 0:
            return 0.0 if self.value == target else np.inf
        return float(abs(self.value - target) / self.stderr)

    def to_json(self):
        out = {"value": [self.value.real, self.value.imag], "stderr": self.stderr, "samples": self.samples}
        if self.ess is not None:
            out["ess"] = self.ess
            out["imag_discarded"] = self.imag_discarded
        return out


@dataclass(frozen=True)
class BrownianPathSpec:
    t: float
    steps: int
    rng: RngSpec = field(default_factory=RngSpec)

    def __post_init__(self):
        if not self.t > 0 or self.steps < 1:
            raise UsageError(f"Brownian path needs t > 0 and steps >= 1, got t={self.t}, steps={self.steps}")

    @property
    def h(self):
        return self.t / self.steps


@dataclass(frozen=True)
class TheoremAReport:
    measure: str
    lhs: complex
    rhs: complex
    residual: float
    tolerance: float
    passed: bool
    z_score: float = None
    estimate: MCEstimate = None
    extra: dict = field(default_factory=dict)

    def to_json(self):
        out = {
            "measure": self.measure,
            "lhs": [self.lhs.real, self.lhs.imag],
            "rhs": [self.rhs.real, self.rhs.imag],
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }
        if self.z_score is not None:
            out["z_score"] = self.z_score
            out["estimate"] = self.estimate.to_json()
        out.update(self.extra)
        return out


def _generator(rng):
    if rng is None:
        return RngSpec().generator()
    if isinstance(rng, RngSpec):
        return rng.generator()
    return rng


def _sampling():
    return load_defaults().sampling


# ---- samplers ----

def _complex_ginibre(gen, shape):
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2)


def _haar_unitary(gen, count, n):
    q, r = np.linalg.qr(_complex_ginibre(gen, (count, n, n)))
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def _haar_orthogonal(gen, count, n):
    q, r = np.linalg.qr(gen.standard_normal((count, n, n)))
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
    # O(N)^- -> SO(N) by negating the first column
    q[np.linalg.det(q) < 0, :, 0] *= -1
    return q.astype(np.complex128)


def _haar_symplectic(gen, count, n):
    a = _complex_ginibre(gen, (count, n, n))
    b = _complex_ginibre(gen, (count, n, n))
    z = np.block([[a, b], [-b.conj(), a.conj()]])
    # unitary polar factor z (z* z)^(-1/2) keeps the quaternionic structure
    w, v = np.linalg.eigh(np.swapaxes(z.conj(), -1, -2) @ z)
    inv_sqrt = (v * (1.0 / np.sqrt(w))[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)
    q = z @ inv_sqrt
    # back onto the [[a, b], [-conj(b), conj(a)]] form, then one Newton-Schulz step
    a = (q[..., :n, :n] + q[..., n:, n:].conj()) / 2
    b = (q[..., :n, n:] - q[..., n:, :n].conj()) / 2
    q = np.block([[a, b], [-b.conj(), a.conj()]])
    return q @ (1.5 * np.eye(2 * n) - 0.5 * np.swapaxes(q.conj(), -1, -2) @ q)


def haar_samples(rep, count, rng=None):
    """count Haar-distributed elements in the defining realization, shape (count, N, N)."""
    gen = _generator(rng)
    family, n = rep.spec.family, rep.spec.n
    if family == "u":
        return _haar_unitary(gen, count, n)
    if family == "su":
        u = _haar_unitary(gen, count, n)
        det = np.linalg.det(u)
        return u * np.exp(-1j * np.angle(det) / n)[:, None, None]
    if family == "so":
        return _haar_orthogonal(gen, count, n)
    if family == "sp":
        return _haar_symplectic(gen, count, n)
    if family == "u1":
        theta = gen.uniform(0.0, 2 * np.pi, count)
        return np.exp(1j * theta).reshape(count, 1, 1)
    # G2: no direct sampler, mix Brownian motion instead
    cfg = _sampling()
    return brownian_paths(rep, cfg.g2_mixing_time, cfg.g2_steps, count, gen)


def haar_sample(rep, rng=None):
    return haar_samples(rep, 1, rng)[0]


def brownian_paths(rep, t, steps, count, rng=None):
    """Endpoints of count geodesic random walks g <- g expm(sqrt(h) sum_a z_a xi^a) from I."""
    spec = BrownianPathSpec(t, steps)
    gen = _generator(rng)
    basis = rep.group_generators
    dim = basis.shape[-1]
    g = np.broadcast_to(np.eye(dim, dtype=np.complex128), (count, dim, dim)).copy()
    scale = np.sqrt(spec.h)
    for _ in range(steps):
        z = gen.standard_normal((count, len(basis)))
        g = g @ expm_skew_batch(scale * np.einsum("ka,aij->kij", z, basis))
    if rep.spec.family in ("so", "g2"):
        g = g.real.astype(np.complex128)
    return g


def brownian_path(rep, spec):
    return brownian_paths(rep, spec.t, spec.steps, 1, spec.rng.generator())[0]


# ---- batched loop evaluation ----

def _represent_batch(rep, gs):
    if rep.spec.family != "u1":
        return gs
    z = gs[:, 0, 0]
    k = rep.spec.n
    return (z ** k if k >= 0 else np.conj(z) ** (-k)).reshape(-1, 1, 1)


def evaluate_batch(item, gs):
    """Values of a loop, LoopTerm or LoopSum at a stack of group elements."""
    if isinstance(item, GeneralizedWilsonLoop):
        rho = _represent_batch(item.rep, gs)
        rho_inv = np.swapaxes(rho.conj(), -1, -2)
        product = np.broadcast_to(np.eye(item.rep.dim, dtype=np.complex128), rho.shape)
        for c, s in item.factors:
            product = product @ c @ (rho if s > 0 else rho_inv)
        return item.scale * np.trace(product, axis1=-2, axis2=-1)
    if isinstance(item, LoopTerm):
        value = np.full(len(gs), complex(item.coef))
        for loop in item.loops:
            value = value * evaluate_batch(loop, gs)
        return value
    total = np.zeros(len(gs), dtype=np.complex128)
    for term in LoopSum.of(item).terms:
        total += evaluate_batch(term, gs)
    return total


def hermitize_plaquettes(plaquettes):
    """1/2 W_p and 1/2 W_p^dagger with W_p^dagger(g) = tr(c^* g^-1), so sum = Re sum W_p."""
    out = []
    for p in plaquettes:
        if p.degree != 1:
            raise UsageError("plaquettes must be linear loops")
        (c, s), = p.factors
        out.append(GeneralizedWilsonLoop(p.rep, ((c, s),), 0.5 * p.scale))
        out.append(GeneralizedWilsonLoop(p.rep, ((c.conj().T, -s),), 0.5 * np.conj(p.scale)))
    return tuple(out)


def _sampling_rep(items, measure):
    for item in items:
        for term in LoopSum.of(item).terms:
            if term.loops:
                return term.loops[0].rep
    if measure.plaquettes:
        return measure.plaquettes[0].rep
    return None


def _chunk(rep, items, measure, count, rng, chunk, steps):
    gen = rng.generator(chunk)
    if measure.kind == BROWNIAN:
        gs = brownian_paths(rep, measure.t, steps, count, gen)
    else:
        gs = haar_samples(rep, count, gen)
    values = np.ones(count, dtype=np.complex128)
    for item in items:
        values = values * evaluate_batch(item, gs)
    action = None
    if measure.kind == WILSON:
        action = sum(evaluate_batch(p, gs) for p in hermitize_plaquettes(measure.plaquettes))
    return values, action


def _weighted(values, action, beta):
    exponent = beta * action
    imag_discarded = float(np.max(np.abs(exponent.imag))) if len(exponent) else 0.0
    log_w = exponent.real
    w = np.exp(log_w - np.max(log_w))
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        raise SamplingError("all importance weights vanished", beta=beta)
    ess = float(total ** 2 / np.sum(w ** 2))
    value = np.sum(w * values) / total
    stderr = float(np.sqrt(np.sum(w ** 2 * np.abs(values - value) ** 2)) / total)
    return complex(value), stderr, ess, imag_discarded


def mc_expect(items, measure, samples, rng=None, chunk_size=None, n_jobs=None, steps=None, progress=False):
    """MC estimate of E_measure[prod of items].

    Draws come in fixed chunks, chunk k from RngSpec.generator(k), so the result
    is the same for any number of workers.
    """
    cfg = _sampling()
    if samples < cfg.min_samples:
        raise UsageError(f"Monte-Carlo needs at least {cfg.min_samples} samples, got {samples}")
    rng = rng if isinstance(rng, RngSpec) else RngSpec()
    items = list(items)
    rep = _sampling_rep(items, measure)
    if rep is None:
        value = complex(np.prod([LoopSum.of(i).evaluate(np.eye(1)) for i in items]))
        return MCEstimate(value=value, stderr=0.0, samples=samples)

    chunk_size = chunk_size or cfg.chunk_size
    n_jobs = n_jobs or cfg.n_jobs
    steps = steps or cfg.brownian_steps
    sizes = [min(chunk_size, samples - start) for start in range(0, samples, chunk_size)]
    logger.info("MC %s on %s: %d samples in %d chunks", measure.describe(), rep.spec.label, samples, len(sizes))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_chunk)(rep, items, measure, size, rng, k, steps)
        for k, size in enumerate(tqdm(sizes, desc="Sampling", disable=not progress)))
    values = np.concatenate([v for v, _ in results])
    if not np.all(np.isfinite(values)):
        raise SamplingError("non-finite loop values in the sample")

    if measure.kind == WILSON:
        action = np.concatenate([a for _, a in results])
        value, stderr, ess, imag = _weighted(values, action, measure.beta)
        if imag > 0:
            logger.debug("discarded imaginary action part up to %.3e", imag)
        return MCEstimate(value=value, stderr=stderr, samples=samples, ess=ess, imag_discarded=imag)
    value = complex(values.mean())
    stderr = float(np.std(values, ddof=1) / np.sqrt(samples))
    return MCEstimate(value=value, stderr=stderr, samples=samples)


# ---- Laplacian identity ----

def _check_loops(loops):
    loops = tuple(loops)
    if not loops or not all(isinstance(w, GeneralizedWilsonLoop) for w in loops):
        raise UsageError("verification needs a non-empty list of loops")
    key = loops[0].rep.spec.group_key
    if any(w.rep.spec.group_key != key for w in loops):
        raise UsageError("all loops must live on one group")
    return loops


def laplacian_terms(loops, form=CLOSED):
    """(c, R) with Delta(prod W) = c prod W + R.

    c = sum_r lambda_r n_r and R = 2 sum_{r<s} M(W_r, W_s) rest + sum_r T(W_r) rest.
    """
    loops = _check_loops(loops)
    c = sum(w.rep.lam * w.degree for w in loops)
    rest_sum = LoopSum()
    for r, w in enumerate(loops):
        others = loops[:r] + loops[r + 1:]
        if w.degree > 1:
            rest_sum = rest_sum + total_twist(w, form).times(others)
        for s in range(r + 1, len(loops)):
            rest = loops[:r] + loops[r + 1:s] + loops[s + 1:]
            rest_sum = rest_sum + total_merge(w, loops[s], form).times(rest).scaled(2.0)
    return c, rest_sum


def wilson_terms(loops, plaquettes, beta, form=CLOSED):
    """beta sum_p lambda_p W_p prod W + beta^2 sum_{p,p'} M(W_p, W_p') prod W over hermitized plaquettes."""
    herm = hermitize_plaquettes(plaquettes)
    out = LoopSum()
    for p in herm:
        out = out + LoopSum.of(p).times(loops).scaled(beta * p.rep.lam)
        for q in herm:
            out = out + total_merge(p, q, form).times(loops).scaled(beta ** 2)
    return out


def _tolerance(lhs):
    return load_defaults().verify.exact_tol * (1 + abs(lhs))


def _verify_haar(loops, form, budget):
    c, rest_sum = laplacian_terms(loops, form)
    haar = MeasureSpec.haar()
    f = expect_product(loops, haar, budget=budget)
    lhs = c * f
    rhs = -expect_product([rest_sum], haar, budget=budget)
    residual = float(abs(lhs - rhs))
    tol = _tolerance(lhs)
    return TheoremAReport(measure=haar.describe(), lhs=lhs, rhs=rhs, residual=residual, tolerance=tol,
                          passed=residual <= tol, extra={"expectation": [f.real, f.imag]})


def _verify_brownian(loops, t, form, budget):
    c, rest_sum = laplacian_terms(loops, form)
    f = brownian_expect(loops, t, budget=budget)
    lhs = brownian_expect(loops, t, order=1, budget=budget)
    rhs = 0.5 * (c * f + brownian_expect([rest_sum], t, budget=budget))
    residual = float(abs(lhs - rhs))
    tol = _tolerance(lhs)

    h = min(load_defaults().verify.fd_step, t / 2)
    fd = (brownian_expect(loops, t + h, budget=budget) - brownian_expect(loops, t - h, budget=budget)) / (2 * h)

    # f(t) = e^{ct/2} (f(0) + 1/2 int_0^t e^{-cs/2} R(s) ds)
    f0 = brownian_expect(loops, 0.0, budget=budget)

    def integrand(s):
        value = np.exp(-0.5 * c * s) * brownian_expect([rest_sum], s, budget=budget)
        return np.array([value.real, value.imag])

    integral, _ = quad_vec(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-11)
    duhamel = np.exp(0.5 * c * t) * (f0 + 0.5 * complex(integral[0], integral[1]))
    duhamel_residual = float(abs(duhamel - f))
    extra = {
        "expectation": [f.real, f.imag],
        "finite_difference": [fd.real, fd.imag],
        "finite_difference_residual": float(abs(fd - rhs)),
        "duhamel": [duhamel.real, duhamel.imag],
        "duhamel_residual": duhamel_residual,
    }
    passed = residual <= tol and duhamel_residual <= _tolerance(f)
    return TheoremAReport(measure=MeasureSpec.brownian(t).describe(), lhs=lhs, rhs=rhs, residual=residual,
                          tolerance=tol, passed=passed, extra=extra)


def _verify_wilson(loops, measure, form, samples, rng, n_jobs, progress):
    c, rest_sum = laplacian_terms(loops, form)
    extras = wilson_terms(loops, measure.plaquettes, measure.beta, form)
    lhs_sum = LoopSum((LoopTerm(c, loops),))
    rhs_sum = rest_sum.scaled(-1.0) + extras
    # one stream for both sides: E[lhs - rhs] should vanish
    difference = lhs_sum + rhs_sum.scaled(-1.0)
    kw = dict(rng=rng, n_jobs=n_jobs, progress=progress)
    estimate = mc_expect([difference], measure, samples, **kw)
    lhs = mc_expect([lhs_sum], measure, samples, **kw).value
    rhs = mc_expect([rhs_sum], measure, samples, **kw).value
    z = estimate.z_score()
    return TheoremAReport(measure=measure.describe(), lhs=lhs, rhs=rhs, residual=float(abs(estimate.value)),
                          tolerance=3.0, passed=z <= 3.0, z_score=z, estimate=estimate)


def verify_theorem_a(loops, measure, form=CLOSED, budget=None, samples=None, rng=None, n_jobs=None, progress=False):
    """Both sides of the Laplacian integration-by-parts identity for prod W under measure.

    Haar and Brownian are exact; Wilson is an MC z-score (beta = 0 falls back to Haar).
    """
    loops = _check_loops(loops)
    if measure.kind == HAAR or (measure.kind == WILSON and measure.beta == 0):
        report = _verify_haar(loops, form, budget)
    elif measure.kind == BROWNIAN:
        report = _verify_brownian(loops, measure.t, form, budget)
    else:
        samples = samples if samples is not None else _sampling().samples
        report = _verify_wilson(loops, measure, form, samples, rng, n_jobs, progress)
    log = logger.info if report.passed else logger.warning
    log("identity check %s: residual %.3e (tolerance %.3e)", report.measure, report.residual, report.tolerance)
    return report
