"""Finite-length validation: PEG Tanner-graph construction, puncturing
patterns drawn from a distribution, flooding sum-product decoding, and a
frame-error-rate harness.

The all-zero codeword is transmitted in every frame (channel and decoder
are symmetric under the uniform edge labels), so no encoder exists here.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .channel import ChannelParams, priors_from_observations
from .ensemble import Ensemble, PunctDistribution, design_rate, node_fraction
from .kernels import CLAMP
from .messages import wht


class ConstructionError(RuntimeError):
    pass


@dataclass
class TannerGraph:
    n_symbols: int
    n_checks: int
    q: int
    # flat edge arrays, grouped contiguously by check node
    edge_symbol: np.ndarray
    edge_check: np.ndarray
    edge_label: np.ndarray

    @property
    def n_edges(self):
        return len(self.edge_symbol)

    def check_rows(self):
        """Iterate (check index, symbol indices, labels)."""
        for c in range(self.n_checks):
            rows = np.nonzero(self.edge_check == c)[0]
            yield c, self.edge_symbol[rows], self.edge_label[rows]

    def symbol_degrees(self):
        return np.bincount(self.edge_symbol, minlength=self.n_symbols)

    def check_degrees(self):
        return np.bincount(self.edge_check, minlength=self.n_checks)


def _quota(weights, total):
    """Largest-remainder apportionment of `total` items to `weights`."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    exact = w * total
    base = np.floor(exact).astype(int)
    rem = total - base.sum()
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:rem]] += 1
    return base


def peg_construct(e: Ensemble, n_symbols: int, seed: int) -> TannerGraph:
    """Greedy progressive edge growth.

    Symbols are processed in ascending degree; each edge goes to a check
    at maximal BFS distance in the graph built so far, ties broken by
    lowest current check degree then lowest index.  Checks are capped at
    their target degrees so the final degree sequences match the ensemble.
    Labels are uniform over the nonzero field elements.
    """
    r = design_rate(e)
    sym_deg_counts = _quota([node_fraction(e, d) for d in e.lam.degrees],
                            n_symbols)
    sym_degrees = np.repeat(e.lam.degrees, sym_deg_counts)
    n_edges = int(sym_degrees.sum())
    n_checks = int(round(n_symbols * (1 - r)))
    # node-perspective check degrees
    rho_node = {d: e.rho.coeffs[d] / d for d in e.rho.degrees}
    chk_counts = _quota([rho_node[d] for d in e.rho.degrees], n_checks)
    chk_targets = np.repeat(e.rho.degrees, chk_counts)
    # absorb rounding mismatch in the largest checks
    diff = n_edges - int(chk_targets.sum())
    i = len(chk_targets) - 1
    while diff != 0 and len(chk_targets):
        step = 1 if diff > 0 else -1
        chk_targets[i] += step
        diff -= step
        i = i - 1 if i > 0 else len(chk_targets) - 1
    if (chk_targets < 2).any():
        raise ConstructionError("degree sequence infeasible at this length")

    rng = Generator(Philox(SeedSequence(entropy=seed, spawn_key=(11,))))
    chk_deg = np.zeros(n_checks, dtype=int)
    sym_adj = [[] for _ in range(n_symbols)]  # checks per symbol
    chk_adj = [[] for _ in range(n_checks)]   # symbols per check
    edges = []

    order = np.argsort(sym_degrees, kind="stable")
    for s in order:
        for _ in range(sym_degrees[s]):
            cap = chk_deg < chk_targets
            dist = _bfs_check_distance(s, sym_adj, chk_adj, n_checks)
            dist[~cap] = -1
            far = dist == -2  # unreachable with remaining capacity
            far &= cap
            cand = np.nonzero(far)[0]
            if len(cand) == 0:
                best = dist.max()
                if best < 0:
                    raise ConstructionError("no check with free capacity")
                cand = np.nonzero(dist == best)[0]
            # avoid duplicate edges
            cand = np.array([c for c in cand if c not in sym_adj[s]])
            if len(cand) == 0:
                raise ConstructionError("duplicate edge forced; "
                                        "degree sequence too dense")
            cand = cand[chk_deg[cand] == chk_deg[cand].min()]
            c = int(cand.min())
            chk_deg[c] += 1
            sym_adj[s].append(c)
            chk_adj[c].append(s)
            edges.append((c, s))

    edges.sort()
    edge_check = np.array([c for c, _ in edges], dtype=np.int64)
    edge_symbol = np.array([s for _, s in edges], dtype=np.int64)
    edge_label = rng.integers(1, e.field.q, size=n_edges)
    return TannerGraph(n_symbols, n_checks, e.field.q,
                       edge_symbol, edge_check, edge_label)


def _bfs_check_distance(s, sym_adj, chk_adj, n_checks):
    """Distance from symbol s to every check; -2 marks unreachable."""
    dist = np.full(n_checks, -2, dtype=int)
    seen_sym = {s}
    frontier = list(sym_adj[s])
    depth = 1
    for c in frontier:
        dist[c] = depth
    while frontier:
        nxt_syms = set()
        for c in frontier:
            for t in chk_adj[c]:
                if t not in seen_sym:
                    seen_sym.add(t)
                    nxt_syms.add(t)
        frontier = []
        depth += 2
        for t in nxt_syms:
            for c in sym_adj[t]:
                if dist[c] == -2:
                    dist[c] = depth
                    frontier.append(c)
    return dist


def girth(g: TannerGraph, max_starts=None):
    """Shortest cycle length (0 when acyclic).  BFS with parent-edge
    exclusion from every symbol node; every cycle in a bipartite graph
    passes through a symbol, so scanning symbol starts is exact.  With
    max_starts set, only a prefix of symbols is scanned (upper bound,
    used for reporting on large graphs)."""
    adj = [[] for _ in range(g.n_symbols + g.n_checks)]
    for eid in range(g.n_edges):
        u = int(g.edge_symbol[eid])
        v = g.n_symbols + int(g.edge_check[eid])
        adj[u].append((v, eid))
        adj[v].append((u, eid))
    best = math.inf
    starts = range(g.n_symbols if max_starts is None
                   else min(max_starts, g.n_symbols))
    for start in starts:
        dist = {start: 0}
        par = {start: -1}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            if dist[u] * 2 >= best:
                continue
            for v, eid in adj[u]:
                if eid == par[u]:
                    continue
                if v not in dist:
                    dist[v] = dist[u] + 1
                    par[v] = eid
                    queue.append(v)
                else:
                    best = min(best, dist[u] + dist[v] + 1)
    return int(best) if math.isfinite(best) else 0


def sample_pattern(g: TannerGraph, pd: PunctDistribution, seed: int):
    """Per-symbol punctured-bit masks (n_symbols, p) drawn from pd: within
    every degree class, exact largest-remainder quotas of symbols per bit
    count, uniformly random positions."""
    p = pd.p
    rng = Generator(Philox(SeedSequence(entropy=seed, spawn_key=(13,))))
    degs = g.symbol_degrees()
    mask = np.zeros((g.n_symbols, p), dtype=bool)
    for d in np.unique(degs):
        members = np.nonzero(degs == d)[0]
        row = pd.row(int(d))
        ks = sorted(row)
        quota = _quota([row[k] for k in ks], len(members))
        members = rng.permutation(members)
        pos = 0
        for k, cnt in zip(ks, quota):
            for s in members[pos:pos + cnt]:
                bits = rng.choice(p, size=k, replace=False)
                mask[s, bits] = True
            pos += cnt
    return mask


# ---------------------------------------------------------------- decoding

class _DecoderPlan:
    """Precomputed index structure for vectorized flooding."""

    def __init__(self, g: TannerGraph, field):
        self.g = g
        self.field = field
        self.sym_groups = _group_edges(g.edge_symbol, g.n_symbols)
        self.chk_groups = _group_edges(g.edge_check, g.n_checks)
        q = g.q
        self.perm_fwd = field.perm_gather[g.edge_label]   # (E, q) gather idx
        self.perm_back = field.mul_table[g.edge_label]    # (E, q) gather idx


def _group_edges(owner, n_nodes):
    """Group edge indices by owner degree: list of (degree, (m, degree)
    index arrays)."""
    groups = []
    order = np.argsort(owner, kind="stable")
    degs = np.bincount(owner, minlength=n_nodes)
    for d in np.unique(degs[degs > 0]):
        nodes = np.nonzero(degs == d)[0]
        idx = np.empty((len(nodes), d), dtype=np.int64)
        starts = np.searchsorted(owner[order], nodes)
        for j in range(d):
            idx[:, j] = order[starts + j]
        groups.append((int(d), nodes, idx))
    return groups


def _leave_one_out(prod_terms):
    """(m, d, q) -> (m, d, q) products excluding each slot."""
    m, d, q = prod_terms.shape
    pref = np.ones((m, d + 1, q))
    suf = np.ones((m, d + 1, q))
    for j in range(d):
        pref[:, j + 1] = pref[:, j] * prod_terms[:, j]
        suf[:, d - 1 - j] = suf[:, d - j] * prod_terms[:, d - 1 - j]
    return pref[:, :d] * suf[:, 1:]


def decode(g: TannerGraph, priors, field, max_iter=100):
    """Flooding sum-product decoding.

    priors: (n_symbols, q).  Returns (hard decisions, success flag,
    iterations used); success means all checks are satisfied.
    """
    plan = _DecoderPlan(g, field)
    q = g.q
    hard = np.argmax(priors, axis=1)
    if _syndrome_ok(g, hard, field):
        return hard, True, 0
    c2v = np.full((g.n_edges, q), 1.0 / q)
    for it in range(1, max_iter + 1):
        # symbol side: leave-one-out products of prior and c2v
        v2c = np.empty((g.n_edges, q))
        for d, nodes, idx in plan.sym_groups:
            terms = c2v[idx]                                  # (m, d, q)
            out = _leave_one_out(terms) * priors[nodes][:, None, :]
            out = np.maximum(out, CLAMP)
            out /= out.sum(axis=2, keepdims=True)
            v2c[idx.ravel()] = out.reshape(-1, q)
        # check side: WHT-domain leave-one-out
        t = np.take_along_axis(v2c, plan.perm_fwd, axis=1)
        t = wht(t)
        for d, nodes, idx in plan.chk_groups:
            terms = t[idx]
            out = _leave_one_out(terms).reshape(-1, q)
            out = wht(out) / q
            out = np.take_along_axis(out, plan.perm_back[idx.ravel()], axis=1)
            out = np.maximum(out, CLAMP)
            out /= out.sum(axis=1, keepdims=True)
            c2v[idx.ravel()] = out
        post = priors.copy()
        for d, nodes, idx in plan.sym_groups:
            post[nodes] *= c2v[idx].prod(axis=1)
        hard = np.argmax(post, axis=1)
        if _syndrome_ok(g, hard, field):
            return hard, True, it
    return hard, False, max_iter


def _syndrome_ok(g: TannerGraph, hard, field):
    prods = field.mul_table[g.edge_label, hard[g.edge_symbol]]
    synd = np.zeros(g.n_checks, dtype=np.int64)
    np.bitwise_xor.at(synd, g.edge_check, prods)
    return not synd.any()


def fer_sim(g: TannerGraph, pattern, ch: ChannelParams, field, frames: int,
            max_iter=100, seed=0, max_errors=100):
    """Monte-Carlo frame error rate with the all-zero codeword.

    Returns (fer, wilson 95% half-width, frames run, errors seen).
    Stops early once max_errors frame errors accumulate.
    """
    if frames < 1:
        raise ValueError("need at least one frame")
    errors = 0
    run = 0
    for fr in range(frames):
        rng = Generator(Philox(SeedSequence(entropy=seed, spawn_key=(17, fr))))
        y = 1.0 + ch.sigma * rng.standard_normal((g.n_symbols, ch.p))
        priors = priors_from_observations(y, pattern, ch.sigma, field)
        hard, ok, _ = decode(g, priors, field, max_iter=max_iter)
        run += 1
        if not ok or hard.any():
            errors += 1
        if errors >= max_errors:
            break
    fer = errors / run
    ci = _wilson_halfwidth(errors, run)
    return fer, ci, run, errors


def _wilson_halfwidth(k, n, z=1.96):
    if n == 0:
        return 1.0
    ph = k / n
    denom = 1 + z * z / n
    half = (z / denom) * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n))
    return half


# ------------------------------------------------------------ serialization

def graph_to_text(g: TannerGraph):
    """One check per line, \"symbol:label\" pairs with hex labels."""
    lines = [f"{g.n_symbols} {g.n_checks} {g.q}"]
    for _, syms, labs in g.check_rows():
        lines.append(" ".join(f"{s}:{l:x}" for s, l in zip(syms, labs)))
    return "\n".join(lines) + "\n"


def graph_from_text(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n, m, q = (int(x) for x in lines[0].split())
    ec, es, el = [], [], []
    for c, ln in enumerate(lines[1:]):
        for pair in ln.split():
            s, l = pair.split(":")
            ec.append(c)
            es.append(int(s))
            el.append(int(l, 16))
    return TannerGraph(n, m, q, np.array(es), np.array(ec), np.array(el))


def pattern_to_text(mask):
    return "\n".join(f"{int(''.join('1' if b else '0' for b in row[::-1]), 2):x}"
                     for row in mask) + "\n"


def pattern_from_text(text, p):
    rows = [int(ln, 16) for ln in text.splitlines() if ln.strip()]
    return np.array([[(v >> i) & 1 for i in range(p)] for v in rows],
                    dtype=bool)
