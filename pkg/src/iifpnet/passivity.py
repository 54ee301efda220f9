"""Passivity certificates for Leaky-ReLU cascades.

A layer ``y = f(W u + b)`` is incrementally input feed-forward passive
(IIFP) with index ``nu`` for constant-entry input increments whenever its
weight sum exceeds ``n_in * nu / a``.  A cascade of N such layers is output
feedback passive with index ``-rho`` for any ``rho`` above
``cos(pi/(N+1))**(N+1) / prod(nu)``, which yields the perturbation bound

    ||dy_N||^2 / ||du||^2  <=  beta / (2 * (eps - rho - 1/(2*beta)))

for design parameters ``eps, beta > 0`` keeping the denominator positive.

The stability step rests on the secant criterion for cyclic matrices; a
numerical search for a diagonal Lyapunov matrix is provided as an
independent check of that criterion.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateUnavailable, ContractError, InvalidBoundParameters, UnsupportedDepth
from .linalg import as_matrix, max_sym_eigenvalue
from .model import check_slope

RHO_MARGIN = 1e-9
ORACLE_STARTS = 64
ORACLE_MAX_ITER = 2000
ORACLE_TOL = 1e-9


@dataclass
class LayerCertificate:
    layer_index: int
    weight_sum: float
    constant_term: float
    nu_extracted: float
    satisfied: bool

    def as_dict(self):
        return {
            "layer": self.layer_index,
            "nu": self.nu_extracted,
            "weight_sum": self.weight_sum,
            "constant_term": self.constant_term,
            "satisfied": self.satisfied,
        }


@dataclass
class CascadeCertificate:
    """Everything needed to state (or refuse) the perturbation bound."""

    layers: list
    nus: list
    certified: bool
    rho: float = float("nan")
    epsilon_design: float = float("nan")
    beta: float = float("nan")
    denominator: float = float("nan")
    bound_ratio: float = float("nan")
    policy: str = "default"
    status: str = ""
    uncertified_layers: list = field(default_factory=list)

    @property
    def depth(self):
        return len(self.layers)

    def as_dict(self):
        def num(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else x

        return {
            "certified": self.certified,
            "status": self.status,
            "depth": self.depth,
            "depth_note": "N counts every hidden layer plus the output layer",
            "per_layer": [c.as_dict() for c in self.layers],
            "nus": list(self.nus),
            "rho": num(self.rho),
            "epsilon": num(self.epsilon_design),
            "beta": num(self.beta),
            "denominator": num(self.denominator),
            "bound_ratio": num(self.bound_ratio),
            "policy": self.policy,
            "uncertified_layers": list(self.uncertified_layers),
        }

    @classmethod
    def from_dict(cls, doc):
        layers = [
            LayerCertificate(
                int(d["layer"]),
                float(d["weight_sum"]),
                float(d.get("constant_term", float("nan"))),
                float(d["nu"]),
                bool(d["satisfied"]),
            )
            for d in doc["per_layer"]
        ]

        def num(key):
            v = doc.get(key)
            return float("nan") if v is None else float(v)

        return cls(
            layers=layers,
            nus=[float(v) for v in doc.get("nus", [])],
            certified=bool(doc["certified"]),
            rho=num("rho"),
            epsilon_design=num("epsilon"),
            beta=num("beta"),
            denominator=num("denominator"),
            bound_ratio=num("bound_ratio"),
            policy=doc.get("policy", "default"),
            status=doc.get("status", ""),
            uncertified_layers=list(doc.get("uncertified_layers", [])),
        )


def extract_nu(layer, a):
    """Largest ``nu`` for which the layer meets its weight-sum condition.

    Returns ``a * sum(W) / n_in``.  A non-positive result means the layer
    carries no IIFP certificate.
    """
    a = check_slope(a)
    w = layer.weights if hasattr(layer, "weights") else as_matrix(layer)
    return a * float(np.sum(w)) / w.shape[1]


def layer_certificate(layer, a, nu_target, index):
    w = layer.weights
    weight_sum = float(np.sum(w))
    constant = w.shape[1] * nu_target / a
    return LayerCertificate(
        layer_index=index,
        weight_sum=weight_sum,
        constant_term=constant,
        nu_extracted=extract_nu(layer, a),
        satisfied=weight_sum > constant,
    )


def rho_min(nus, n_layers=None):
    """Infimum of admissible output passivity indices, ``cos(pi/(N+1))**(N+1)/prod(nu)``."""
    nus = [float(v) for v in nus]
    n = len(nus) if n_layers is None else int(n_layers)
    if n != len(nus):
        raise ContractError(f"got {len(nus)} indices for a cascade of {n} layers")
    if n <= 2:
        raise UnsupportedDepth(f"the cascade argument needs N > 2 layers, got N = {n}")
    bad = [i + 1 for i, v in enumerate(nus) if not v > 0.0]
    if bad:
        raise CertificateUnavailable(f"non-positive passivity index in layer(s) {bad}", bad)
    return math.cos(math.pi / (n + 1)) ** (n + 1) / math.prod(nus)


def bound_denominator(epsilon_design, beta, rho):
    return epsilon_design - rho - 1.0 / (2.0 * beta)


def bound_ratio(epsilon_design, beta, rho):
    """Certified ceiling on ``||dy_N||^2 / ||du||^2``."""
    if not beta > 0.0:
        raise InvalidBoundParameters(f"beta must be positive, got {beta}")
    den = bound_denominator(epsilon_design, beta, rho)
    if not den > 0.0:
        raise InvalidBoundParameters(
            f"need epsilon > rho + 1/(2*beta), i.e. {epsilon_design} > {rho + 1.0 / (2.0 * beta)}"
        )
    return beta / (2.0 * den)


def default_epsilon(rho, beta):
    return 2.0 * (rho + 1.0 / (2.0 * beta))


def certify(model, nu_target=1.0, beta=None, epsilon_design=None):
    """Build the cascade certificate of a trained model.

    Per-layer indices are ``min(nu_target, extracted nu)``.  If any layer's
    extracted index is non-positive the certificate is returned with
    ``certified=False`` rather than raising.  ``beta`` defaults to 1 and
    ``epsilon_design`` to ``2*(rho + 1/(2*beta))``.
    """
    a = model.slope_a
    n = model.depth
    targets = np.broadcast_to(np.asarray(nu_target, dtype=np.float64), (n,))
    layers = [layer_certificate(p, a, float(targets[l]), l + 1) for l, p in enumerate(model.layers)]
    nus = [min(float(targets[l]), c.nu_extracted) for l, c in enumerate(layers)]
    policy = "default" if beta is None and epsilon_design is None else "override"
    beta = 1.0 if beta is None else float(beta)

    if n <= 2:
        return CascadeCertificate(
            layers, nus, False, status=f"unsupported depth: N = {n} (need N > 2)", policy=policy
        )
    bad = [c.layer_index for c in layers if not c.nu_extracted > 0.0]
    if bad:
        return CascadeCertificate(
            layers,
            nus,
            False,
            status=f"uncertified: non-positive passivity index in layer(s) {bad}",
            policy=policy,
            uncertified_layers=bad,
        )
    rho = rho_min(nus) * (1.0 + RHO_MARGIN)
    eps = default_epsilon(rho, beta) if epsilon_design is None else float(epsilon_design)
    ratio = bound_ratio(eps, beta, rho)
    return CascadeCertificate(
        layers,
        nus,
        True,
        rho=rho,
        epsilon_design=eps,
        beta=beta,
        denominator=bound_denominator(eps, beta, rho),
        bound_ratio=ratio,
        policy=policy,
        status="certified",
    )


@dataclass
class TightBoundDiagnostic:
    lhs: float
    rhs: float
    satisfied: bool
    input_dev_sq: float
    layer_dev_sq: list


def tight_bound_check(trace1, trace2, cert, rtol=1e-12):
    """Evaluate the all-layer inequality on two forward traces.

    ``eps * sum_{i=2}^{N-1} ||dy_i||^2 + den * ||dy_N||^2 <= beta * ||du||^2 / 2``
    where ``du`` is the input difference and ``dy_i`` the difference of the
    i-th layer activations.  ``rtol`` absorbs floating-point noise in the
    comparison.
    """
    if len(trace1.activations) != len(trace2.activations):
        raise ContractError("traces come from models of different depth")
    if np.shape(trace1.inputs) != np.shape(trace2.inputs):
        raise ContractError("traces have different input shapes")
    for y1, y2 in zip(trace1.activations, trace2.activations):
        if np.shape(y1) != np.shape(y2):
            raise ContractError("traces have mismatched layer shapes")
    if not cert.certified:
        raise ContractError("tight bound needs a certified cascade")
    du = np.sum((np.asarray(trace2.inputs) - np.asarray(trace1.inputs)) ** 2)
    devs = [float(np.sum((y2 - y1) ** 2)) for y1, y2 in zip(trace1.activations, trace2.activations)]
    n = len(devs)
    lhs = cert.epsilon_design * sum(devs[1 : n - 1]) + cert.denominator * devs[-1]
    rhs = cert.beta * float(du) / 2.0
    return TightBoundDiagnostic(lhs, rhs, lhs <= rhs + rtol * max(abs(rhs), 1e-300), float(du), devs)


def build_cascade_matrix(nus, rho):
    """The (N+1)x(N+1) cyclic matrix of the cascade stability argument.

    Diagonal ``(-nu_1, ..., -nu_N, -1)``, unit subdiagonal and ``-1/rho`` in
    the top-right corner.
    """
    nus = [float(v) for v in nus]
    n = len(nus)
    if n <= 2:
        raise UnsupportedDepth(f"need N > 2 layers, got {n}")
    if any(not v > 0.0 for v in nus):
        raise CertificateUnavailable("all passivity indices must be positive")
    if not rho > 0.0:
        raise ContractError(f"rho must be positive, got {rho}")
    a = np.zeros((n + 1, n + 1))
    a[np.arange(n), np.arange(n)] = -np.asarray(nus)
    a[n, n] = -1.0
    a[np.arange(1, n + 1), np.arange(n)] = 1.0
    a[0, n] = -1.0 / rho if math.isfinite(rho) else 0.0
    return a


def cyclic_matrix(alphas, betas):
    """Cyclic matrix with diagonal ``-alpha``, subdiagonal ``beta[:-1]`` and corner ``-beta[-1]``."""
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    _check_secant_args(alphas, betas)
    n = alphas.size
    a = np.diag(-alphas)
    a[np.arange(1, n), np.arange(n - 1)] = betas[:-1]
    a[0, n - 1] = -betas[-1]
    return a


def _check_secant_args(alphas, betas):
    if alphas.shape != betas.shape or alphas.ndim != 1:
        raise ContractError("alphas and betas must be equal-length vectors")
    if alphas.size <= 2:
        raise UnsupportedDepth(f"secant criterion needs N > 2, got {alphas.size}")
    if np.any(alphas <= 0) or np.any(betas <= 0):
        raise ContractError("alphas and betas must be positive")


def secant_ratio(alphas, betas):
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    _check_secant_args(alphas, betas)
    return float(np.prod(betas) / np.prod(alphas))


def secant_threshold(n):
    return 1.0 / math.cos(math.pi / n) ** n


def secant_check(alphas, betas):
    """True iff ``prod(beta)/prod(alpha) < sec(pi/N)**N`` (strict)."""
    return secant_ratio(alphas, betas) < secant_threshold(len(alphas))


def _normalised_max_eig(a, logd):
    # max eigenvalue of sym(DA) per start, scaled by max(D) so the objective
    # cannot improve by merely shrinking D
    d = np.exp(logd - logd.max(axis=-1, keepdims=True))
    da = d[..., :, None] * a
    s = 0.5 * (da + np.swapaxes(da, -1, -2))
    return np.linalg.eigvalsh(s)[..., -1]


@dataclass
class OracleResult:
    found: bool
    diagonal: np.ndarray = None
    max_eigenvalue: float = float("inf")
    start_index: int = -1


def diagonal_stability_oracle(a, starts=ORACLE_STARTS, max_iter=ORACLE_MAX_ITER, seed=0):
    """Search for a positive diagonal D with ``D A + A^T D`` negative definite.

    Coordinate descent (axes plus pairwise directions) on ``log D`` minimising the largest eigenvalue of the
    symmetric part of ``D A``, run from ``starts`` seeded random points at
    once.  The search is one-sided: ``found=False`` is evidence of absence,
    not a proof.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ContractError("matrix must be square")
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    logd = rng.uniform(-2.0, 2.0, size=(starts, n))
    logd[0] = 0.0
    step = np.full(starts, 0.5)
    best = _normalised_max_eig(a, logd)

    # coordinate axes first, then pairwise moves that follow ridges where
    # two eigenvalues coincide (pure coordinate steps stall there)
    eye = np.eye(n)
    directions = [eye[k] for k in range(n)]
    directions += [eye[i] - eye[j] for i in range(n) for j in range(i + 1, n)]
    for _ in range(max_iter):
        if np.min(best) < -ORACLE_TOL or np.all(step < 1e-10):
            break
        active = step >= 1e-10
        improved = np.zeros(starts, dtype=bool)
        for direction in directions:
            for sign in (1.0, -1.0):
                trial = logd + np.where(active, sign * step, 0.0)[:, None] * direction
                val = _normalised_max_eig(a, trial)
                better = active & (val < best - 1e-15)
                logd[better] = trial[better]
                best[better] = val[better]
                improved |= better
        step[active & ~improved] *= 0.5
        step[improved] = np.minimum(step[improved] * 1.5, 1.0)

    i = int(np.argmin(best))  # argmin returns the lowest index on ties
    d = np.exp(logd[i] - logd[i].max())
    if best[i] < -ORACLE_TOL:
        return OracleResult(True, d, float(best[i]), i)
    return OracleResult(False, None, float(best[i]), i)


def check_diagonal(a, d):
    """Largest eigenvalue of ``sym(diag(d) A)``; negative means D certifies A."""
    return max_sym_eigenvalue(np.diag(d) @ as_matrix(a))


def supply_rate(layer, a, nu, u, delta):
    """Incremental supply rate of one layer for a constant-entry increment.

    ``u`` is the layer input and ``delta`` the common value of the
    increment's entries.  With ``dy = f(W(u+delta*1)+b) - f(Wu+b)`` this is
    ``delta * sum(dy) - n_in * nu * delta**2``: the pairing of the increment
    with the output change, minus the passivity term, with the squared
    increment counted per entry.
    """
    a = check_slope(a)
    w = layer.weights
    b = layer.bias
    u = np.asarray(u, dtype=np.float64)
    z1 = w @ u + b
    z2 = w @ (u + delta) + b
    dy = np.maximum(z2, a * z2) - np.maximum(z1, a * z1)
    return float(delta * np.sum(dy) - w.shape[1] * nu * delta * delta)
