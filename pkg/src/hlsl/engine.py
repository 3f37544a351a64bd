"""Vectorized per-variable conditional scoring core.

Pseudolikelihood objectives reduce to one-dimensional integrals of
exp(-energy) over [0, 1], where the energy seen by a single variable is a
nonnegative weighted sum of hinges w * max(a + b*y, 0). The hinge roots
-a/b do not depend on the weights, so for a fixed grounding and observed
assignment the segment structure is static and every weight update only
re-accumulates per-segment affine coefficients. This module builds that
static structure once and evaluates partition functions, observed energies
and expectation gradients as flat array passes.

Grouping decides the objective: grouping by variable gives the
pseudolikelihood factors; grouping by (clause, variable) gives the piecewise
factorization whose per-clause terms decouple.

All accumulations run in log space with per-group max subtraction, and all
reductions follow a fixed array order, so results do not depend on worker
count.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .grounding import Grounding

BETA_FLAT = 1e-12  # below this slope a segment integrates as a constant
_J1_SERIES_CUT = 1e-6


@lru_cache(maxsize=4)
def gauss_legendre_01(n: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights rescaled to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def exp_moment0(v: np.ndarray) -> np.ndarray:
    """integral_0^1 exp(-v s) ds, stable for v >= 0."""
    v = np.asarray(v, dtype=np.float64)
    small = v <= BETA_FLAT
    safe = np.where(small, 1.0, v)
    return np.where(small, 1.0 - v / 2.0, -np.expm1(-safe) / safe)


def exp_moment1(v: np.ndarray) -> np.ndarray:
    """integral_0^1 s exp(-v s) ds, stable for v >= 0."""
    v = np.asarray(v, dtype=np.float64)
    small = v <= _J1_SERIES_CUT
    safe = np.where(small, 1.0, v)
    series = 0.5 - v / 3.0 + v * v / 8.0
    exact = (-np.expm1(-safe) - safe * np.exp(-safe)) / (safe * safe)
    return np.where(small, series, exact)


def segment_log_partition(
    alpha: np.ndarray, beta: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """log integral_lo^hi exp(-(alpha + beta*y)) dy per segment.

    The exponential is factored at the segment end where it peaks, so the
    result stays finite for arbitrarily large energies.
    """
    length = hi - lo
    anchor = np.where(beta >= 0.0, lo, hi)
    peak = -(alpha + beta * anchor)
    u = np.abs(beta) * length
    flat = np.abs(beta) <= BETA_FLAT
    safe_u = np.where(flat, 1.0, u)
    ratio = np.where(flat, 1.0, -np.expm1(-safe_u) / safe_u)
    return peak + np.log(length * ratio)


def segment_log_moment(
    alpha: np.ndarray,
    beta: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
) -> np.ndarray:
    """log integral_lo^hi (a + b*y) exp(-(alpha + beta*y)) dy.

    Callers guarantee a + b*y >= 0 on the segment; the tiny negative
    brackets that cancellation can produce are clamped to zero, giving -inf.
    """
    length = hi - lo
    pos = beta >= 0.0
    anchor = np.where(pos, lo, hi)
    v = np.abs(beta) * length
    j0 = exp_moment0(v)
    j1 = exp_moment1(v)
    bracket = (a + b * anchor) * j0 + np.where(pos, 1.0, -1.0) * b * length * j1
    bracket = np.maximum(bracket, 0.0)
    with np.errstate(divide="ignore"):
        return -(alpha + beta * anchor) + np.log(length * bracket)


def group_logsumexp(values: np.ndarray, starts: np.ndarray, group_ids: np.ndarray, n_groups: int) -> np.ndarray:
    """Log-sum-exp of `values` within contiguous groups.

    `starts` are the group start offsets into `values`; `group_ids` maps each
    element back to its group. Groups whose every element is -inf yield -inf.
    """
    if len(values) == 0:
        return np.full(n_groups, -np.inf)
    gmax = np.maximum.reduceat(values, starts)
    shift = np.where(np.isfinite(gmax), gmax, 0.0)
    total = np.bincount(group_ids, weights=np.exp(values - shift[group_ids]), minlength=n_groups)
    with np.errstate(divide="ignore"):
        return shift + np.log(total)


class Workspace:
    """Static integration structure for one grounding + observed assignment.

    mode='pll' groups hinges by variable; mode='ppll' groups them by
    (clause, variable). All arrays are flat and index-aligned:

      pairs  - one entry per (ground clause, variable) occurrence, holding
               the hinge coefficients (a, b) with every other atom folded at
               its observed value, the owning clause, and the penalty of the
               whole ground clause at the observed assignment;
      segs   - the [0,1] tiling of each group at the pairs' hinge roots;
      combos - the (pair, segment) incidences, pair-major, with a static
               activity flag (whether the hinge is positive on the segment).
    """

    def __init__(self, grounding: Grounding, values: np.ndarray, mode: str = "pll", p: int = 1):
        if mode not in ("pll", "ppll"):
            raise ValueError(f"unknown mode {mode!r}")
        if p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        self.mode = mode
        self.p = p
        self.n_clauses = grounding.n_clauses
        db = grounding.db
        n_atoms = len(db.atoms)

        inner_obs = grounding.inner_values(values)
        obs_phi = np.maximum(inner_obs, 0.0) ** p

        tmask = db.target_mask()[grounding.term_atom]
        t_ground = grounding.term_ground[tmask]
        t_atom = grounding.term_atom[tmask]
        t_coef = grounding.term_coef[tmask]

        key = t_ground * np.int64(n_atoms) + t_atom
        ukey, inv = np.unique(key, return_inverse=True)
        K = len(ukey)
        self.pair_ground = (ukey // n_atoms).astype(np.int64)
        self.pair_atom = (ukey % n_atoms).astype(np.int64)
        self.pair_b = np.bincount(inv, weights=t_coef, minlength=K)
        self.pair_a = inner_obs[self.pair_ground] - self.pair_b * values[self.pair_atom]
        self.pair_clause = grounding.g_clause[self.pair_ground]
        self.pair_obs_phi = obs_phi[self.pair_ground]
        self.n_pairs = K

        if mode == "pll":
            gkey = self.pair_atom
        else:
            gkey = self.pair_clause * np.int64(n_atoms) + self.pair_atom
        guniq, self.pair_group = np.unique(gkey, return_inverse=True)
        self.n_groups = len(guniq)
        if mode == "pll":
            self.group_atom = guniq.astype(np.int64)
            self.group_clause = None
        else:
            self.group_atom = (guniq % n_atoms).astype(np.int64)
            self.group_clause = (guniq // n_atoms).astype(np.int64)

        self.pairs_per_clause = np.bincount(self.pair_clause, minlength=self.n_clauses).astype(np.int64)
        self._build_segments()
        self._build_combos()

    # -- static structure --------------------------------------------------

    def _build_segments(self) -> None:
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = np.where(self.pair_b != 0.0, -self.pair_a / self.pair_b, np.nan)
        keep = np.isfinite(roots) & (roots > 0.0) & (roots < 1.0)
        rg = self.pair_group[keep]
        rr = roots[keep]
        order = np.lexsort((rr, rg))
        rg, rr = rg[order], rr[order]
        if len(rg):
            fresh = np.ones(len(rg), dtype=bool)
            fresh[1:] = (rg[1:] != rg[:-1]) | (rr[1:] != rr[:-1])
            rg, rr = rg[fresh], rr[fresh]
        n_roots = np.bincount(rg, minlength=self.n_groups).astype(np.int64)

        self.seg_count = n_roots + 1
        total = int(self.seg_count.sum())
        self.seg_group = np.repeat(np.arange(self.n_groups, dtype=np.int64), self.seg_count)
        self.group_seg_start = (np.cumsum(self.seg_count) - self.seg_count).astype(np.int64)
        self.seg_lo = np.zeros(total)
        self.seg_hi = np.ones(total)
        if len(rg):
            root_start = np.cumsum(n_roots) - n_roots
            rank = np.arange(len(rg)) - np.repeat(root_start, n_roots)
            base = self.group_seg_start[rg] + rank
            self.seg_lo[base + 1] = rr
            self.seg_hi[base] = rr
        self.seg_len = self.seg_hi - self.seg_lo
        self.seg_mid = 0.5 * (self.seg_lo + self.seg_hi)

    def _build_combos(self) -> None:
        per_pair = self.seg_count[self.pair_group]
        M = int(per_pair.sum())
        self.combo_pair = np.repeat(np.arange(self.n_pairs, dtype=np.int64), per_pair)
        self.pair_combo_start = (np.cumsum(per_pair) - per_pair).astype(np.int64)
        within = np.arange(M, dtype=np.int64) - np.repeat(self.pair_combo_start, per_pair)
        self.combo_seg = self.group_seg_start[self.pair_group[self.combo_pair]] + within
        a = self.pair_a[self.combo_pair]
        b = self.pair_b[self.combo_pair]
        self.combo_active = a + b * self.seg_mid[self.combo_seg] > 0.0
        # pre-masked coefficient gathers: inactive combos contribute nothing
        self._combo_a = np.where(self.combo_active, a, 0.0)
        self._combo_b = np.where(self.combo_active, b, 0.0)

    # -- weight-dependent evaluations ---------------------------------------

    def _segment_coeffs(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-segment slope/intercept of the summed active hinges (p=1)."""
        cw = w[self.pair_clause][self.combo_pair]
        alpha = np.bincount(self.combo_seg, weights=cw * self._combo_a, minlength=len(self.seg_lo))
        beta = np.bincount(self.combo_seg, weights=cw * self._combo_b, minlength=len(self.seg_lo))
        return alpha, beta

    def _segment_quad_coeffs(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-segment quadratic coefficients of the summed squared hinges (p=2)."""
        cw = w[self.pair_clause][self.combo_pair]
        a, b = self._combo_a, self._combo_b
        S = len(self.seg_lo)
        c0 = np.bincount(self.combo_seg, weights=cw * a * a, minlength=S)
        c1 = np.bincount(self.combo_seg, weights=cw * 2.0 * a * b, minlength=S)
        c2 = np.bincount(self.combo_seg, weights=cw * b * b, minlength=S)
        return c0, c1, c2

    def _seg_log_partition(self, w: np.ndarray) -> np.ndarray:
        if self.p == 1:
            alpha, beta = self._segment_coeffs(w)
            return segment_log_partition(alpha, beta, self.seg_lo, self.seg_hi)
        c0, c1, c2 = self._segment_quad_coeffs(w)
        nodes, weights = gauss_legendre_01()
        y = self.seg_lo[:, None] + self.seg_len[:, None] * nodes[None, :]
        f = c0[:, None] + c1[:, None] * y + c2[:, None] * y * y
        peak = f.min(axis=1)
        mass = np.einsum("sn,n->s", np.exp(peak[:, None] - f), weights)
        return -peak + np.log(self.seg_len * mass)

    def log_partitions(self, w: np.ndarray) -> np.ndarray:
        """log Z per group."""
        seg_logz = self._seg_log_partition(w)
        return group_logsumexp(seg_logz, self.group_seg_start, self.seg_group, self.n_groups)

    def observed_energies(self, w: np.ndarray) -> np.ndarray:
        """Energy of the observed assignment per group."""
        return np.bincount(
            self.pair_group, weights=w[self.pair_clause] * self.pair_obs_phi, minlength=self.n_groups
        )

    def group_terms(self, w: np.ndarray) -> np.ndarray:
        """-log Z - energy(observed) per group; zero-variable groups absent."""
        if self.n_groups == 0:
            return np.zeros(0)
        return -self.log_partitions(w) - self.observed_energies(w)

    def total(self, w: np.ndarray) -> float:
        return float(self.group_terms(w).sum())

    def per_clause_totals(self, w: np.ndarray) -> np.ndarray:
        """Per-clause objective terms; meaningful in ppll mode where groups
        belong to a single clause."""
        if self.mode != "ppll":
            raise ValueError("per-clause totals require ppll grouping")
        if self.n_groups == 0:
            return np.zeros(self.n_clauses)
        return np.bincount(self.group_clause, weights=self.group_terms(w), minlength=self.n_clauses)

    def expected_penalties(self, w: np.ndarray, logz: np.ndarray | None = None) -> np.ndarray:
        """E[hinge penalty] per pair under its group's conditional density."""
        if self.n_pairs == 0:
            return np.zeros(0)
        if logz is None:
            logz = self.log_partitions(w)
        if self.p == 1:
            alpha, beta = self._segment_coeffs(w)
            logj = segment_log_moment(
                alpha[self.combo_seg],
                beta[self.combo_seg],
                self.pair_a[self.combo_pair],
                self.pair_b[self.combo_pair],
                self.seg_lo[self.combo_seg],
                self.seg_hi[self.combo_seg],
            )
        else:
            c0, c1, c2 = self._segment_quad_coeffs(w)
            nodes, weights = gauss_legendre_01()
            cs = self.combo_seg
            y = self.seg_lo[cs][:, None] + self.seg_len[cs][:, None] * nodes[None, :]
            f = c0[cs][:, None] + c1[cs][:, None] * y + c2[cs][:, None] * y * y
            hinge = self.pair_a[self.combo_pair][:, None] + self.pair_b[self.combo_pair][:, None] * y
            hinge = np.maximum(hinge, 0.0) ** 2
            peak = f.min(axis=1)
            mass = np.einsum("cn,n->c", hinge * np.exp(peak[:, None] - f), weights)
            with np.errstate(divide="ignore"):
                logj = -peak + np.log(self.seg_len[cs] * mass)
        logj = np.where(self.combo_active, logj, -np.inf)
        lognum = group_logsumexp(logj, self.pair_combo_start, self.combo_pair, self.n_pairs)
        return np.exp(lognum - logz[self.pair_group])

    def gradient(self, w: np.ndarray) -> np.ndarray:
        """Ascent gradient of the grouped objective: per clause, the summed
        expected-minus-observed penalties of its hinge occurrences."""
        if self.n_pairs == 0:
            return np.zeros(self.n_clauses)
        expected = self.expected_penalties(w)
        return np.bincount(
            self.pair_clause, weights=expected - self.pair_obs_phi, minlength=self.n_clauses
        )

    def per_variable(self, w: np.ndarray) -> dict[int, tuple[float, float]]:
        """Per-variable (log Z, observed energy), aggregated over groups."""
        if self.n_groups == 0:
            return {}
        logz = self.log_partitions(w)
        energy = self.observed_energies(w)
        out: dict[int, tuple[float, float]] = {}
        for g in range(self.n_groups):
            atom = int(self.group_atom[g])
            z, e = out.get(atom, (0.0, 0.0))
            out[atom] = (z + float(logz[g]), e + float(energy[g]))
        return out
