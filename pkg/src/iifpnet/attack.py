"""Constant-entry adversary and dataset-level bound evaluation.

The attacker adds the same value ``delta`` to every input coordinate,
subject to ``||delta * 1||_2 <= epsilon``.  The single degree of freedom is
searched with a coarse grid followed by golden-section refinement.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, ParseError
from .passivity import tight_bound_check

BALL_TOL = 1e-12
# relative margin below which two ratios count as tied; small |delta| values
# divide rounding noise by delta**2, so ties go to the larger |delta|
TIE_RTOL = 1e-9
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class AttackConfig:
    epsilon_attack: float = 0.5
    coarse_grid_points: int = 201
    refine_iterations: int = 60

    def __post_init__(self):
        if not self.epsilon_attack > 0:
            raise ConfigError(f"epsilon_attack must be positive, got {self.epsilon_attack}")
        if self.coarse_grid_points < 3:
            raise ConfigError("coarse grid needs at least 3 points")
        if self.refine_iterations < 0:
            raise ConfigError("refine_iterations must be non-negative")

    def delta_max(self, n):
        return self.epsilon_attack / math.sqrt(n)


@dataclass
class AttackResult:
    delta_star: float
    input_dev_sq: float
    output_dev_sq: float
    ratio: float
    per_layer_dev_sq: list = field(default_factory=list)


def perturbation_vector(delta, n):
    if n < 1:
        raise ContractError("perturbation length must be at least 1")
    return np.full(n, float(delta))


def _check_ball(delta, n, cfg):
    if abs(delta) * math.sqrt(n) > cfg.epsilon_attack + BALL_TOL:
        raise ContractError(
            f"|delta|*sqrt(n) = {abs(delta) * math.sqrt(n)} exceeds the attack radius {cfg.epsilon_attack}"
        )


def attack_point(model, x, delta, cfg=None, base=None):
    """Forward both inputs and record every layer's squared deviation."""
    cfg = cfg or AttackConfig()
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if delta == 0.0:
        raise ContractError("delta = 0 leaves the ratio undefined")
    _check_ball(delta, n, cfg)
    base = base if base is not None else model.forward(x)
    pert = model.forward(x + delta)
    devs = [float(np.sum((p - b) ** 2)) for b, p in zip(base.activations, pert.activations)]
    in_dev = n * float(delta) ** 2
    return AttackResult(float(delta), in_dev, devs[-1], devs[-1] / in_dev, devs)


def ratio_objective(model, x, delta, cfg=None):
    """``||f(x + delta*1) - f(x)||^2 / ||delta*1||^2``."""
    return attack_point(model, x, delta, cfg).ratio


def _ratios(model, x, base_out, deltas):
    out = model.forward(x[None, :] + deltas[:, None]).output
    return np.sum((out - base_out) ** 2, axis=1) / (x.shape[0] * deltas**2)


def coarse_grid(n, cfg):
    r = cfg.delta_max(n)
    grid = np.linspace(-r, r, cfg.coarse_grid_points)
    zero = grid == 0.0
    if np.any(zero):
        # skip the origin: move it half a cell to the right
        grid[zero] = 0.5 * (grid[1] - grid[0])
    return grid


def _golden_max(f, lo, hi, iterations):
    x1 = hi - INVPHI * (hi - lo)
    x2 = lo + INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    for _ in range(iterations):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INVPHI * (hi - lo)
            f1 = f(x1)
            if f1 > best_f:
                best_x, best_f = x1, f1
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INVPHI * (hi - lo)
            f2 = f(x2)
            if f2 > best_f:
                best_x, best_f = x2, f2
    return best_x, best_f


def hill_climb(model, x, cfg=None):
    """Maximise the deviation ratio over admissible constant perturbations.

    A coarse symmetric grid (origin excluded) locates the best cell; golden
    section then refines inside the bracket formed by its neighbours.  The
    refined point replaces the grid winner only if it scores higher.
    """
    cfg = cfg or AttackConfig()
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n != model.n_inputs:
        raise ContractError(f"input has {n} entries, model expects {model.n_inputs}")
    base = model.forward(x)
    base_out = base.output
    grid = coarse_grid(n, cfg)
    ratios = _ratios(model, x, base_out, grid)
    top = float(np.max(ratios))
    tied = np.flatnonzero(ratios >= top - TIE_RTOL * abs(top))
    i = int(tied[np.argmax(np.abs(grid[tied]))])
    best_d, best_r = float(grid[i]), float(ratios[i])

    if cfg.refine_iterations > 0:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]

        def f(d):
            if d == 0.0:
                return -math.inf
            return float(_ratios(model, x, base_out, np.array([d]))[0])

        d, r = _golden_max(f, lo, hi, cfg.refine_iterations)
        if r > best_r + TIE_RTOL * abs(best_r):
            best_d, best_r = d, r

    return attack_point(model, x, best_d, cfg, base=base)


@dataclass
class EvaluationTable:
    results: list
    bound_ratio: float
    certified: bool
    status: str
    depth: int
    tight: list = field(default_factory=list)

    @property
    def ratios(self):
        return np.array([r.ratio for r in self.results])

    @property
    def violated(self):
        if not self.certified:
            return np.zeros(len(self.results), dtype=bool)
        return self.ratios > self.bound_ratio

    @property
    def violation_count(self):
        return int(np.sum(self.violated))

    @property
    def tight_violation_count(self):
        return sum(1 for t in self.tight if not t.satisfied)

    def summary(self):
        ratios = self.ratios
        if ratios.size:
            q1, med, q3 = (float(v) for v in np.quantile(ratios, [0.25, 0.5, 0.75]))
            lo, hi = float(ratios.min()), float(ratios.max())
        else:
            q1 = med = q3 = lo = hi = None
        return {
            "status": self.status,
            "certified": self.certified,
            "points": int(ratios.size),
            "depth": self.depth,
            "bound_ratio": self.bound_ratio if self.certified else None,
            "max_ratio": hi,
            "min_ratio": lo,
            "q1": q1,
            "median": med,
            "q3": q3,
            "violations": self.violation_count if self.certified else None,
            "tight_bound_violations": self.tight_violation_count if self.certified else None,
        }

    def csv_header(self):
        return ["point_index", "delta_star", "ratio", "bound_ratio", "violated"] + [
            f"dev_sq_{i + 1}" for i in range(self.depth)
        ]

    def to_csv(self, path):
        viol = self.violated
        bound = repr(float(self.bound_ratio)) if self.certified else "nan"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.csv_header())
            for i, r in enumerate(self.results):
                w.writerow(
                    [i, repr(r.delta_star), repr(r.ratio), bound, int(viol[i])]
                    + [repr(v) for v in r.per_layer_dev_sq]
                )


def evaluate_dataset(model, cert, points, cfg=None):
    """Attack every test point and compare with the certified bound.

    For an uncertified model the ratios are still computed, but no bound
    comparison is made and ``status`` says why.
    """
    cfg = cfg or AttackConfig()
    points = np.asarray(points, dtype=np.float64).reshape(-1, model.n_inputs)
    results, tight = [], []
    for x in points:
        res = hill_climb(model, x, cfg)
        results.append(res)
        if cert.certified:
            t1 = model.forward(x)
            t2 = model.forward(x + res.delta_star)
            tight.append(tight_bound_check(t1, t2, cert))
    status = "certified" if cert.certified else (cert.status or "uncertified")
    bound = cert.bound_ratio if cert.certified else float("nan")
    return EvaluationTable(results, bound, cert.certified, status, model.depth, tight)


def read_evaluation_csv(path):
    """Parse an evaluation CSV back into column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("evaluation file is empty", str(path))
    header = rows[0]
    required = ["point_index", "delta_star", "ratio", "bound_ratio", "violated"]
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"missing columns {missing}", str(path))
    cols = {h: [] for h in header}
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(r)}", f"{path}: row {i}")
        for h, v in zip(header, r):
            try:
                cols[h].append(float(v))
            except ValueError as exc:
                raise ParseError(f"non-numeric value {v!r} in column {h!r}", f"{path}: row {i}") from exc
    return {h: np.array(v) for h, v in cols.items()}
