"""Expected absorption times and absorption probabilities via ``(I - B)``."""

from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from .chain import AbsorbingChain, ChainTemplate, LazinessPolicy, StartSpec, StateKey

RCOND_MIN = 1e-14
RCOND_WARN = 1e-10


class NonAbsorbingError(RuntimeError):
    """Some transient states never (or not surely) reach an absorbing state.

    ``states`` lists the transient states from which absorption is impossible.
    """

    def __init__(self, message: str, states: list[StateKey] | None = None):
        super().__init__(message)
        self.states = states or []


def _reachability(chain: AbsorbingChain) -> tuple[np.ndarray, np.ndarray]:
    """(stuck, unsure) masks over transient states.

    ``stuck``: no absorbing state reachable. ``unsure``: can reach a stuck
    state, so absorption is not certain and the expected time is infinite.
    """
    edge = chain.B > 0
    exits = (chain.R > 0).any(axis=1)
    key = (edge.shape[0], np.packbits(edge).tobytes(), np.packbits(exits).tobytes())
    hit = _REACH_CACHE.get(key)
    if hit is None:
        hit = _REACH_CACHE[key] = _reach_masks(edge, exits)
        if len(_REACH_CACHE) > 256:
            _REACH_CACHE.pop(next(iter(_REACH_CACHE)))
    return hit[0].copy(), hit[1].copy()


_REACH_CACHE: dict = {}


def _reach_masks(edge: np.ndarray, can_absorb: np.ndarray):
    while True:
        grown = can_absorb | (edge & can_absorb[None, :]).any(axis=1)
        if (grown == can_absorb).all():
            break
        can_absorb = grown
    stuck = ~can_absorb
    unsure = stuck.copy()
    while True:
        grown = unsure | (edge & unsure[None, :]).any(axis=1)
        if (grown == unsure).all():
            break
        unsure = grown
    return stuck, unsure


def _raise_stuck(chain: AbsorbingChain, stuck: np.ndarray, what: str):
    states = [chain.transient[i] for i in np.flatnonzero(stuck)]
    shown = ", ".join(str(list(map(list, s))) for s in states[:5])
    more = f" (+{len(states) - 5} more)" if len(states) > 5 else ""
    raise NonAbsorbingError(f"{what}: no absorbing state reachable from {shown}{more}", states)


def _factor(chain: AbsorbingChain, keep: np.ndarray):
    sub = chain.B if keep.all() else chain.B[np.ix_(keep, keep)]
    M = np.eye(len(sub)) - sub
    if M.size == 0:
        return None, M
    try:
        lu = lu_factor(M, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NonAbsorbingError(f"I - B is singular: {exc}") from exc
    rcond, info = dgecon(lu[0], np.abs(M).sum(axis=0).max(), norm="1")
    if info != 0 or not rcond >= RCOND_MIN:
        raise NonAbsorbingError(f"I - B is numerically singular (rcond {rcond:.2e})")
    if rcond < RCOND_WARN:
        warnings.warn(f"I - B is ill-conditioned (rcond {rcond:.2e}); expect lost digits", RuntimeWarning)
    return lu, M


def _solve_times(chain: AbsorbingChain, keep: np.ndarray) -> np.ndarray:
    t = np.full(len(chain.transient), np.inf)
    lu, M = _factor(chain, keep)
    if lu is None:
        return t
    ones = np.ones(M.shape[0])
    sol = lu_solve(lu, ones)
    resid = np.abs(M @ sol - ones).max()
    if resid > 1e-9 * (1.0 + np.abs(sol).max()):
        raise NonAbsorbingError(f"absorption-time residual {resid:.3e} too large")
    t[keep] = sol
    return t


def _solve_probs(chain: AbsorbingChain, keep: np.ndarray) -> np.ndarray:
    A = np.full(chain.R.shape, np.nan)
    lu, M = _factor(chain, keep)
    if lu is None:
        return A
    rhs = chain.R[keep]
    sol = lu_solve(lu, rhs)
    resid = np.abs(M @ sol - rhs).max() if sol.size else 0.0
    if resid > 1e-9 * (1.0 + np.abs(sol).max(initial=0.0)):
        raise NonAbsorbingError(f"absorption-probability residual {resid:.3e} too large")
    A[keep] = sol
    return A


def absorption_times(chain: AbsorbingChain) -> np.ndarray:
    """Expected periods to absorption from every transient state.

    Solves ``(I - B) t = 1`` by LU with partial pivoting. Raises
    :class:`NonAbsorbingError` if any transient state can fail to absorb.
    """
    stuck, unsure = _reachability(chain)
    if unsure.any():
        _raise_stuck(chain, stuck, "absorption not certain")
    return _solve_times(chain, ~unsure)


def expected_time(chain: AbsorbingChain, start: np.ndarray | None = None) -> float:
    """Mean absorption time from the start law only; the cheap path for optimisers.

    Raises :class:`NonAbsorbingError` if the start can fail to absorb.
    """
    start = chain.start if start is None else np.asarray(start, dtype=float)
    if start is None:
        raise ValueError("chain has no start distribution")
    stuck, unsure = _reachability(chain)
    st = start[: len(chain.transient)]
    if ((st > 0) & unsure).any():
        _raise_stuck(chain, stuck, "start can fail to absorb")
    return expected_from_start(chain, start, _solve_times(chain, ~unsure))


def batch_expected_time(
    template: ChainTemplate, thetas: np.ndarray, start: StartSpec, chunk: int = 2048
) -> np.ndarray:
    """:func:`expected_time` for many flat parameter vectors at once.

    Rows whose start can fail to absorb give ``inf``. Rows sharing a sparsity
    pattern share one reachability pass; each stacked solve is residual
    checked and any row that fails falls back to the scalar path.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    vec = template.start_vector(start)
    nt = len(template.transient)
    st = vec[:nt]
    out = np.full(len(thetas), np.inf)
    for lo in range(0, len(thetas), chunk):
        th = thetas[lo:lo + chunk]
        B, R = template.batch_matrices(th)
        pattern = np.concatenate([(B > 0).reshape(len(th), -1), (R > 0).any(axis=2)], axis=1)
        _, group = np.unique(pattern, axis=0, return_inverse=True)
        for g in np.unique(group):
            rows = np.flatnonzero(group.ravel() == g)
            ref = AbsorbingChain(template.transient, template.absorbing, B[rows[0]], R[rows[0]])
            _, unsure = _reachability(ref)
            if ((st > 0) & unsure).any():
                continue
            keep = ~unsure
            live = (st > 0) & keep
            sub = B[np.ix_(rows, keep, keep)]
            M = np.eye(int(keep.sum()))[None] - sub
            ones = np.ones(M.shape[:2])
            try:
                t = np.linalg.solve(M, ones[..., None])[..., 0]
            except np.linalg.LinAlgError:
                t = np.full(ones.shape, np.nan)
            resid = np.abs(np.einsum("nij,nj->ni", M, t) - 1.0).max(axis=1) if t.size else np.zeros(len(rows))
            ok = np.isfinite(t).all(axis=1) & (resid <= 1e-9 * (1.0 + np.abs(t).max(axis=1, initial=0.0)))
            ok &= (t >= 1.0 - 1e-9).all(axis=1)
            out[lo + rows[ok]] = t[ok][:, live[keep]] @ st[live]
            for r in rows[~ok]:
                pol = _policy_from_flat(template, th[r])
                try:
                    out[lo + r] = expected_time(template.chain(pol, start))
                except NonAbsorbingError:
                    out[lo + r] = np.inf
    return out


def _policy_from_flat(template: ChainTemplate, theta: np.ndarray) -> LazinessPolicy:
    vals, i = [], 0
    for width in template.shape:
        vals.append(tuple(float(x) for x in theta[i:i + width]))
        i += width
    return LazinessPolicy(tuple(vals))


def absorption_probabilities(chain: AbsorbingChain) -> np.ndarray:
    """``A[i, j]``: probability of ending in absorbing state ``j`` from transient ``i``."""
    stuck, unsure = _reachability(chain)
    if unsure.any():
        _raise_stuck(chain, stuck, "absorption not certain")
    return _solve_probs(chain, ~unsure)


def expected_from_start(chain: AbsorbingChain, start: np.ndarray, t: np.ndarray) -> float:
    """Mean absorption time for a start law over ``transient + absorbing``.

    Mass on absorbing states contributes zero time.
    """
    start = np.asarray(start, dtype=float)
    if abs(start.sum() - 1.0) > 1e-12:
        raise ValueError(f"start distribution sums to {start.sum()}")
    st = start[: len(chain.transient)]
    live = st > 0
    return float(st[live] @ t[live])


@dataclass
class SolveReport:
    transient: tuple[StateKey, ...]
    absorbing: tuple[StateKey, ...]
    t: np.ndarray
    A: np.ndarray
    start_time: float | None = None
    start_absorption: np.ndarray | None = None

    def time_of(self, key: StateKey) -> float:
        return float(self.t[self.transient.index(key)])

    def to_dict(self) -> dict:
        def clean(x):
            return None if not np.isfinite(x) else float(x)

        out = {
            "transient_states": [list(map(list, s)) for s in self.transient],
            "absorbing_states": [list(map(list, s)) for s in self.absorbing],
            "t": [clean(x) for x in self.t],
            "A": [[clean(x) for x in row] for row in self.A],
        }
        if self.start_time is not None:
            out["start_time"] = self.start_time
            out["start_absorption"] = [float(x) for x in self.start_absorption]
        return out


def solve(chain: AbsorbingChain, start: np.ndarray | None = None) -> SolveReport:
    """Full report; unlike :func:`absorption_times` this tolerates states that
    never absorb as long as the start law puts no mass on them (their ``t`` is
    ``inf`` and their ``A`` row ``nan``).
    """
    if start is None:
        start = chain.start
    stuck, unsure = _reachability(chain)
    keep = ~unsure
    t = _solve_times(chain, keep)
    A = _solve_probs(chain, keep)
    report = SolveReport(chain.transient, chain.absorbing, t, A)
    if start is not None:
        st = np.asarray(start, dtype=float)[: len(chain.transient)]
        bad = (st > 0) & unsure
        if bad.any():
            _raise_stuck(chain, stuck, "start can fail to absorb")
        report.start_time = expected_from_start(chain, start, t)
        live = st > 0
        report.start_absorption = st[live] @ A[live] + np.asarray(start)[len(chain.transient):]
    return report
