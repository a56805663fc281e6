"""Degree-distribution algebra and bit-wise puncturing distributions.

Degree distributions are edge-perspective: coefficient at degree d is the
fraction of edges touching degree-d nodes.  A puncturing distribution
stores, for every symbol degree d of the ensemble, the fractions of
degree-d symbols having exactly k of their p bits punctured.
"""

import json
import math
from dataclasses import dataclass

from .gf import Field, field_new

SIMPLEX_TOL = 1e-9


class EnsembleError(ValueError):
    pass


class OverPuncturedError(EnsembleError):
    pass


class InfeasibleDistributionError(EnsembleError):
    pass


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective polynomial sum_d c_d x^(d-1), stored as {d: c_d}."""

    coeffs: dict

    def __post_init__(self):
        c = {int(d): float(v) for d, v in self.coeffs.items() if v != 0.0}
        if not c:
            raise EnsembleError("empty degree distribution")
        if any(d < 1 for d in c):
            raise EnsembleError("degrees must be >= 1")
        if any(v < -SIMPLEX_TOL for v in c.values()):
            raise EnsembleError("negative coefficient")
        s = sum(c.values())
        if abs(s - 1.0) > SIMPLEX_TOL:
            raise EnsembleError(f"coefficients sum to {s}, not 1")
        object.__setattr__(self, "coeffs", c)

    @property
    def degrees(self):
        return sorted(self.coeffs)

    @property
    def max_degree(self):
        return max(self.coeffs)

    def inv_moment(self):
        """integral_0^1 of the polynomial = sum_d c_d / d."""
        return sum(v / d for d, v in self.coeffs.items())

    @classmethod
    def from_node_perspective(cls, node_coeffs):
        """Convert {d: node fraction} to edge perspective."""
        tot = sum(d * v for d, v in node_coeffs.items())
        return cls({d: d * v / tot for d, v in node_coeffs.items()})


@dataclass(frozen=True)
class Ensemble:
    field: Field
    lam: DegreeDistribution
    rho: DegreeDistribution

    def __post_init__(self):
        if min(self.rho.degrees) < 2:
            raise EnsembleError("constraint degrees must be >= 2")
        r = design_rate(self)
        if not 0 < r < 1:
            raise EnsembleError(f"design rate {r} outside (0,1)")

    @property
    def p(self):
        return self.field.p


def regular_ensemble(field, ds, dc):
    return Ensemble(field, DegreeDistribution({ds: 1.0}),
                    DegreeDistribution({dc: 1.0}))


def design_rate(e: Ensemble) -> float:
    r = 1.0 - e.rho.inv_moment() / e.lam.inv_moment()
    if r <= 0:
        raise EnsembleError(f"nonpositive design rate {r}")
    return r


def node_fraction(e: Ensemble, d: int) -> float:
    """Fraction L_d of symbol-nodes having degree d."""
    if d not in e.lam.coeffs:
        raise KeyError(f"degree {d} not in symbol distribution")
    return e.lam.coeffs[d] / (d * e.lam.inv_moment())


@dataclass(frozen=True)
class PunctDistribution:
    """{d: {k: fraction}} with each degree row on the simplex over k=0..p."""

    f: dict
    p: int

    def __post_init__(self):
        clean = {}
        for d, row in self.f.items():
            row = {int(k): float(v) for k, v in row.items()}
            if any(not 0 <= k <= self.p for k in row):
                raise EnsembleError(f"bit count outside 0..{self.p}")
            if any(v < -SIMPLEX_TOL for v in row.values()):
                raise EnsembleError("negative puncturing fraction")
            s = sum(row.values())
            if abs(s - 1.0) > SIMPLEX_TOL:
                raise EnsembleError(f"degree-{d} row sums to {s}, not 1")
            clean[int(d)] = {k: v for k, v in row.items() if v != 0.0}
        object.__setattr__(self, "f", clean)

    def row(self, d):
        if d not in self.f:
            raise KeyError(f"no puncturing row for degree {d}")
        return self.f[d]

    def mean_bits(self, d):
        """Average punctured bits per degree-d symbol (k-bar)."""
        return sum(k * v for k, v in self.row(d).items())

    def k_marginal(self, e: Ensemble):
        """f_k: fraction of symbols with k punctured bits, over all degrees."""
        out = [0.0] * (self.p + 1)
        for d in e.lam.degrees:
            ld = node_fraction(e, d)
            for k, v in self.row(d).items():
                out[k] += ld * v
        return out


def no_puncturing(e: Ensemble) -> PunctDistribution:
    return PunctDistribution({d: {0: 1.0} for d in e.lam.degrees}, e.p)


def overall_fraction(e: Ensemble, pd: PunctDistribution) -> float:
    """Fraction f of coded bits punctured."""
    return sum(node_fraction(e, d) * pd.mean_bits(d)
               for d in e.lam.degrees) / e.p


def punctured_rate(e: Ensemble, pd: PunctDistribution) -> float:
    f = overall_fraction(e, pd)
    r = design_rate(e)
    if f >= 1.0 - r:
        raise OverPuncturedError(
            f"punctured fraction {f:.4f} drives the rate to "
            f"{r / (1 - f) if f < 1 else math.inf:.4f} >= 1")
    return r / (1.0 - f)


def _spread_row(p, f):
    """Spreading rule for one degree class at bit fraction f."""
    if not 0 <= f <= 1:
        raise EnsembleError(f"bit fraction {f} outside [0,1]")
    if f < 1.0 / p:
        return {0: 1.0 - p * f, 1: p * f} if f > 0 else {0: 1.0}
    m = p * f
    lo = math.floor(m)
    if lo == m:
        return {lo: 1.0}
    return {lo: 1.0 - (m - lo), lo + 1: m - lo}


def spreading_distribution(e: Ensemble, f: float) -> PunctDistribution:
    """One punctured bit on a fraction p*f of symbols; above f = 1/p every
    symbol carries floor(pf) or ceil(pf) punctured bits."""
    row = _spread_row(e.p, f)
    return PunctDistribution({d: dict(row) for d in e.lam.degrees}, e.p)


def clustering_distribution(e: Ensemble, f: float) -> PunctDistribution:
    """All p bits punctured on a fraction f of symbols."""
    if not 0 <= f <= 1:
        raise EnsembleError(f"fraction {f} outside [0,1]")
    row = {0: 1.0 - f, e.p: f} if f > 0 else {0: 1.0}
    return PunctDistribution({d: dict(row) for d in e.lam.degrees}, e.p)


def mixed_distribution(e: Ensemble, per_degree) -> PunctDistribution:
    """Compose per-degree puncturing modes into one distribution.

    per_degree maps symbol degree d to (mode, f_d), where f_d is that
    class's contribution to the overall punctured-bit fraction and mode is
    "spread", "cluster", or ("fixed", k) for k punctured bits per
    punctured symbol.  Degrees not listed stay unpunctured.
    """
    rows = {}
    for d in e.lam.degrees:
        if d not in per_degree:
            rows[d] = {0: 1.0}
            continue
        mode, fd = per_degree[d]
        g = fd / node_fraction(e, d)  # fraction of this class's bits
        if g > 1.0 + SIMPLEX_TOL:
            raise InfeasibleDistributionError(
                f"degree-{d} class holds too few bits for f_{d}={fd}")
        g = min(g, 1.0)
        if mode == "spread":
            rows[d] = _spread_row(e.p, g)
        elif mode == "cluster":
            if g > 0:
                rows[d] = {0: 1.0 - g, e.p: g}
            else:
                rows[d] = {0: 1.0}
        elif isinstance(mode, tuple) and mode[0] == "fixed":
            k = int(mode[1])
            if not 1 <= k <= e.p:
                raise EnsembleError(f"fixed bit count {k} outside 1..{e.p}")
            frac = g * e.p / k
            if frac > 1.0 + SIMPLEX_TOL:
                raise InfeasibleDistributionError(
                    f"degree-{d}: fixed-{k} puncturing needs symbol "
                    f"fraction {frac:.4f} > 1")
            frac = min(frac, 1.0)
            rows[d] = {0: 1.0 - frac, k: frac} if frac > 0 else {0: 1.0}
        else:
            raise EnsembleError(f"unknown puncturing mode {mode!r}")
    return PunctDistribution(rows, e.p)


# ------------------------------------------------------------ serialization

def ensemble_to_dict(e: Ensemble):
    return {"p": e.p,
            "lambda": {str(d): v for d, v in e.lam.coeffs.items()},
            "rho": {str(d): v for d, v in e.rho.coeffs.items()}}


def ensemble_from_dict(doc):
    f = field_new(int(doc["p"]))
    lam = DegreeDistribution({int(d): v for d, v in doc["lambda"].items()})
    rho = DegreeDistribution({int(d): v for d, v in doc["rho"].items()})
    return Ensemble(f, lam, rho)


def punct_to_dict(pd: PunctDistribution):
    return {"p": pd.p,
            "f": {str(d): {str(k): v for k, v in row.items()}
                  for d, row in pd.f.items()}}


def punct_from_dict(doc):
    return PunctDistribution(
        {int(d): {int(k): v for k, v in row.items()}
         for d, row in doc["f"].items()},
        int(doc["p"]))


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
