"""User-selection algorithms and their round-robin wrappers.

Six schedulers share one successive-selection skeleton: pick the best user,
prune the pool by an orthogonality predicate against the newest selection, and
repeat until the pool empties or the spatial-multiplexing cap is reached.
They differ in the information each candidate exposes:

  nus       sublink channel norms only
  localnus  full local sublink plus cross-channel norms
  lus       large-scale gains only (quasi-static)
  sus       full CSI, semi-orthogonal pruning on an orthogonalized basis
  gus       full CSI, greedy sum-rate with an external rate oracle
  rus       no CSI, uniform random grouping

Schedulers are pure functions of (views, threshold, rng); ties in every argmax
break toward the lowest user index.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SCHEDULER_NAMES = ("rus", "lus", "nus", "localnus", "sus", "gus")

_REL_TOL = 1e-9


@dataclass(frozen=True)
class UserView:
    """Per-user information as made available to a scheduler.

    Fields outside a scheduler's declared feedback class stay None, so a
    scheduler physically cannot peek beyond its contract.
    """
    user: int
    cell: int
    sigma2: float
    sublink_norms: np.ndarray | None = None   # (M,)
    local_channel: np.ndarray | None = None   # (N_t,) sublink at the home cell
    alpha: np.ndarray | None = None           # (M,)
    channel: np.ndarray | None = None         # (M*N_t,)

    def energy(self) -> float:
        if self.channel is not None:
            return float(np.sum(np.abs(self.channel) ** 2))
        if self.sublink_norms is not None:
            return float(np.sum(self.sublink_norms ** 2))
        if self.alpha is not None:
            return float(np.sum(self.alpha))
        raise ValueError("view carries no channel information")


def norm_views(norms, sigma2, cells) -> list[UserView]:
    return [UserView(user=i, cell=int(cells[i]), sigma2=float(sigma2[i]),
                     sublink_norms=np.asarray(norms[i], dtype=float))
            for i in range(len(sigma2))]


def local_views(norms, local_channels, sigma2, cells) -> list[UserView]:
    return [UserView(user=i, cell=int(cells[i]), sigma2=float(sigma2[i]),
                     sublink_norms=np.asarray(norms[i], dtype=float),
                     local_channel=np.asarray(local_channels[i], dtype=complex))
            for i in range(len(sigma2))]


def gain_views(alpha, sigma2, cells) -> list[UserView]:
    return [UserView(user=i, cell=int(cells[i]), sigma2=float(sigma2[i]),
                     alpha=np.asarray(alpha[i], dtype=float))
            for i in range(len(sigma2))]


def full_views(channels, sigma2, cells) -> list[UserView]:
    return [UserView(user=i, cell=int(cells[i]), sigma2=float(sigma2[i]),
                     channel=np.asarray(channels[i], dtype=complex))
            for i in range(len(sigma2))]


@dataclass(frozen=True)
class StepDiag:
    pool: list[int]                 # candidate pool the winner was drawn from
    winner: int
    winner_metric: float
    survivors: list[tuple[int, float, float]]  # (user, mu to last pick, nu bound)

    def to_dict(self) -> dict:
        return {
            "pool": list(self.pool),
            "winner": self.winner,
            "winner_metric": self.winner_metric,
            "survivors": [list(s) for s in self.survivors],
        }


@dataclass(frozen=True)
class ScheduleResult:
    selected: list[int]
    steps: list[StepDiag] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"selected": list(self.selected),
                "steps": [s.to_dict() for s in self.steps]}


@dataclass(frozen=True)
class RrPeriod:
    groups: list[list[int]]
    results: list[ScheduleResult]

    @property
    def num_slots(self) -> int:
        return len(self.groups)


# --- bound arithmetic ---------------------------------------------------------

def projected_norm(h: np.ndarray, h_selected: np.ndarray) -> float:
    """Squared norm of h projected onto the orthogonal complement of the
    selected users' row space.  Empty selection returns ||h||^2."""
    h = np.asarray(h, dtype=complex)
    total = float(np.sum(np.abs(h) ** 2))
    h_selected = np.asarray(h_selected, dtype=complex)
    if h_selected.size == 0:
        return total
    h_selected = np.atleast_2d(h_selected)
    _, sv, vh = np.linalg.svd(h_selected, full_matrices=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise ValueError("selected channel matrix is rank deficient")
    inside = np.sum(np.abs(vh.conj() @ h) ** 2)
    return float(max(total - inside, 0.0))


def mu_upper(norms_i, norms_j) -> float:
    """Norm-product upper bound on the cosine of the inter-user angle."""
    ni = np.asarray(norms_i, dtype=float)
    nj = np.asarray(norms_j, dtype=float)
    denom = np.linalg.norm(ni) * np.linalg.norm(nj)
    if denom <= 0.0:
        raise ValueError("user with an all-zero norm vector")
    return float(min(np.dot(ni, nj) / denom, 1.0))


def nu_lower(norm2_i: float, mus) -> float:
    """||h||^2 * (1 - sum mu^2); deliberately not clamped at zero."""
    mus = np.asarray(mus, dtype=float)
    return float(norm2_i * (1.0 - np.sum(mus ** 2)))


def mu_bar(norms_i, cell_i: int, local_i, norms_j, cell_j: int, local_j) -> float:
    """Tightened cosine bound using the candidate's full local channel.

    The home-cell norm product is replaced by the exact local inner product
    when the already-selected user lives in the same cell; the cross terms
    stay norm products because only their norms are on record.
    """
    ni = np.asarray(norms_i, dtype=float)
    nj = np.asarray(norms_j, dtype=float)
    denom = np.linalg.norm(ni) * np.linalg.norm(nj)
    if denom <= 0.0:
        raise ValueError("user with an all-zero norm vector")
    num = float(np.dot(ni, nj))
    if cell_j == cell_i:
        t_exact = abs(np.vdot(np.asarray(local_j), np.asarray(local_i)))
        num = num - ni[cell_i] * nj[cell_i] + t_exact
    return float(min(num / denom, 1.0))


def mu_lus(alpha_i, alpha_j) -> float:
    """Large-scale-only analogue of the norm-product bound."""
    ai = np.asarray(alpha_i, dtype=float)
    aj = np.asarray(alpha_j, dtype=float)
    if np.any(ai < 0.0) or np.any(aj < 0.0):
        raise ValueError("gains must be nonnegative")
    denom = np.sqrt(np.sum(ai)) * np.sqrt(np.sum(aj))
    if denom <= 0.0:
        raise ValueError("user with an all-zero gain vector")
    return float(min(np.sum(np.sqrt(ai * aj)) / denom, 1.0))


def nu_lus(alpha_i, mus) -> float:
    """sum(alpha) * (1 - sum mu^2), the gain-based projected-norm surrogate."""
    mus = np.asarray(mus, dtype=float)
    return float(np.sum(np.asarray(alpha_i, dtype=float)) * (1.0 - np.sum(mus ** 2)))


# --- successive norm-based schedulers ------------------------------------------

def _capacity(views: list[UserView], max_streams: int | None) -> int:
    if max_streams is None:
        return len(views)
    return min(max_streams, len(views))


def _norm_family_schedule(views: list[UserView], eps: float, max_streams: int | None,
                          energy_fn, mu_fn) -> ScheduleResult:
    if not views:
        raise ValueError("empty user set")
    if not 0.0 < eps <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    cap = _capacity(views, max_streams)
    views = sorted(views, key=lambda v: v.user)
    energy = np.array([energy_fn(v) for v in views])
    snr0 = energy / np.array([v.sigma2 for v in views])

    first = int(np.argmax(snr0))
    selected = [first]
    steps = [StepDiag(pool=[v.user for v in views], winner=views[first].user,
                      winner_metric=float(snr0[first]),
                      survivors=[(v.user, 0.0, float(energy[i]))
                                 for i, v in enumerate(views)])]
    mu2_sum = np.zeros(len(views))
    pool = [i for i in range(len(views)) if i != first]

    while len(selected) < cap and pool:
        last = selected[-1]
        mus = {i: mu_fn(views[i], views[last]) for i in pool}
        pool = [i for i in pool if mus[i] <= eps]
        if not pool:
            break
        for i in pool:
            mu2_sum[i] += mus[i] ** 2
        bounds = np.array([energy[i] * (1.0 - mu2_sum[i]) for i in pool])
        metric = bounds / np.array([views[i].sigma2 for i in pool])
        win = int(np.argmax(metric))
        steps.append(StepDiag(
            pool=[views[i].user for i in pool],
            winner=views[pool[win]].user,
            winner_metric=float(metric[win]),
            survivors=[(views[i].user, float(mus[i]), float(bounds[k]))
                       for k, i in enumerate(pool)],
        ))
        selected.append(pool[win])
        pool = [i for i in pool if i != pool[win]]
    return ScheduleResult(selected=[views[i].user for i in selected], steps=steps)


def nus_schedule(views: list[UserView], eps: float,
                 max_streams: int | None = None) -> ScheduleResult:
    """Channel-norm user scheduler: norms-only views, norm-product bound."""
    for v in views:
        if v.sublink_norms is None:
            raise ValueError("nus requires sublink norms")

    def energy(v: UserView) -> float:
        return float(np.sum(v.sublink_norms ** 2))

    def mu(vi: UserView, vj: UserView) -> float:
        return mu_upper(vi.sublink_norms, vj.sublink_norms)

    return _norm_family_schedule(views, eps, max_streams, energy, mu)


def localnus_schedule(views: list[UserView], eps: float,
                      max_streams: int | None = None) -> ScheduleResult:
    """NUS with the home-cell norm product replaced by the exact local inner
    product whenever both users share the cell."""
    for v in views:
        if v.sublink_norms is None or v.local_channel is None:
            raise ValueError("localnus requires sublink norms and the local channel")

    def energy(v: UserView) -> float:
        return float(np.sum(v.sublink_norms ** 2))

    def mu(vi: UserView, vj: UserView) -> float:
        return mu_bar(vi.sublink_norms, vi.cell, vi.local_channel,
                      vj.sublink_norms, vj.cell, vj.local_channel)

    return _norm_family_schedule(views, eps, max_streams, energy, mu)


def lus_schedule(views: list[UserView], eps: float,
                 max_streams: int | None = None) -> ScheduleResult:
    """Large-scale-gain scheduler; depends on alpha and sigma^2 only."""
    for v in views:
        if v.alpha is None:
            raise ValueError("lus requires large-scale gains")

    def energy(v: UserView) -> float:
        return float(np.sum(v.alpha))

    def mu(vi: UserView, vj: UserView) -> float:
        return mu_lus(vi.alpha, vj.alpha)

    return _norm_family_schedule(views, eps, max_streams, energy, mu)


# --- full-CSI baselines ---------------------------------------------------------

def sus_schedule(views: list[UserView], eps: float,
                 max_streams: int | None = None) -> ScheduleResult:
    """Semi-orthogonal user selection with heterogeneous noise.

    Candidates are pruned against the newest selected user's orthogonalized
    component; selection maximizes the orthogonally projected norm over
    sigma^2.  The running orthogonal basis makes the projected norms cheap.
    """
    if not views:
        raise ValueError("empty user set")
    if not 0.0 < eps <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    for v in views:
        if v.channel is None:
            raise ValueError("sus requires full CSI")
    cap = _capacity(views, max_streams)
    views = sorted(views, key=lambda v: v.user)
    chans = np.array([v.channel for v in views])
    sigma2 = np.array([v.sigma2 for v in views])
    norm2 = np.sum(np.abs(chans) ** 2, axis=1)

    first = int(np.argmax(norm2 / sigma2))
    selected = [first]
    steps = [StepDiag(pool=[v.user for v in views], winner=views[first].user,
                      winner_metric=float(norm2[first] / sigma2[first]),
                      survivors=[(v.user, 0.0, float(norm2[i]))
                                 for i, v in enumerate(views)])]
    proj = norm2.copy()          # running projected norms
    basis: list[np.ndarray] = []
    pool = [i for i in range(len(views)) if i != first]

    while len(selected) < cap and pool:
        g = chans[selected[-1]].copy()
        for u in basis:
            g -= (g @ u.conj()) * u
        gn = np.linalg.norm(g)
        if gn <= 1e-12 * np.linalg.norm(chans[selected[-1]]):
            break  # newest pick added no new direction; pool cannot be pruned sanely
        g /= gn
        basis.append(g)
        coef = np.abs(chans[pool] @ g.conj())
        cosdir = coef / np.sqrt(norm2[pool])
        keep = cosdir <= eps
        proj[pool] = proj[pool] - coef ** 2
        survivors = [(views[i].user, float(cosdir[k]), float(proj[i]))
                     for k, i in enumerate(pool) if keep[k]]
        pool = [i for k, i in enumerate(pool) if keep[k]]
        if not pool:
            break
        metric = proj[pool] / sigma2[pool]
        win = int(np.argmax(metric))
        steps.append(StepDiag(pool=[views[i].user for i in pool],
                              winner=views[pool[win]].user,
                              winner_metric=float(metric[win]),
                              survivors=survivors))
        selected.append(pool[win])
        pool = [i for i in pool if i != pool[win]]
    return ScheduleResult(selected=[views[i].user for i in selected], steps=steps)


def gus_schedule(views: list[UserView], rate_oracle,
                 max_streams: int | None = None) -> ScheduleResult:
    """Greedy sum-rate scheduler.

    rate_oracle(channel_sets, sigma2_sets) takes a (C, L, N) stack of
    candidate user sets and returns their achievable sum rates (the ZF plus
    per-BS power allocation evaluation), -inf for sets that cannot be served;
    additions are kept only on a strict rate increase (relative slack 1e-9).
    """
    if not views:
        raise ValueError("empty user set")
    for v in views:
        if v.channel is None:
            raise ValueError("gus requires full CSI")
    cap = _capacity(views, max_streams)
    views = sorted(views, key=lambda v: v.user)
    chans = np.array([v.channel for v in views])
    sigma2 = np.array([v.sigma2 for v in views])

    rates0 = np.asarray(rate_oracle(chans[:, None, :], sigma2[:, None]))
    first = int(np.argmax(rates0))
    selected = [first]
    best_rate = float(rates0[first])
    steps = [StepDiag(pool=[v.user for v in views], winner=views[first].user,
                      winner_metric=best_rate,
                      survivors=[(v.user, 0.0, float(rates0[i]))
                                 for i, v in enumerate(views)])]
    pool = [i for i in range(len(views)) if i != first]

    while len(selected) < cap and pool:
        cand = np.stack([chans[selected + [i]] for i in pool])
        cand_s2 = np.stack([sigma2[selected + [i]] for i in pool])
        trial_rates = np.asarray(rate_oracle(cand, cand_s2))
        win = int(np.argmax(trial_rates))
        if trial_rates[win] <= best_rate * (1.0 + _REL_TOL):
            break
        steps.append(StepDiag(pool=[views[i].user for i in pool],
                              winner=views[pool[win]].user,
                              winner_metric=float(trial_rates[win]),
                              survivors=[(views[i].user, 0.0, float(trial_rates[k]))
                                         for k, i in enumerate(pool)]))
        best_rate = float(trial_rates[win])
        selected.append(pool[win])
        pool = [i for i in pool if i != pool[win]]
    return ScheduleResult(selected=[views[i].user for i in selected], steps=steps)


def rus_schedule(views: list[UserView], rng: np.random.Generator,
                 max_streams: int | None = None) -> ScheduleResult:
    """Uniformly random grouping, as large as the stream cap allows."""
    if not views:
        raise ValueError("empty user set")
    views = sorted(views, key=lambda v: v.user)
    cap = _capacity(views, max_streams)
    pick = rng.choice(len(views), size=cap, replace=False)
    users = [views[i].user for i in sorted(pick)]
    return ScheduleResult(selected=users,
                          steps=[StepDiag(pool=[v.user for v in views],
                                          winner=users[0], winner_metric=float("nan"),
                                          survivors=[])])


# --- round robin -----------------------------------------------------------------

def rr_wrap(base_scheduler, views: list[UserView]) -> RrPeriod:
    """Partition the full pool into per-slot groups by reapplying the base
    scheduler to the shrinking pool.  A base returning an empty group on a
    nonempty pool is overridden with that pool's best single user so the
    period always terminates."""
    remaining = sorted(views, key=lambda v: v.user)
    groups: list[list[int]] = []
    results: list[ScheduleResult] = []
    while remaining:
        res = base_scheduler(remaining)
        chosen = list(res.selected)
        if not chosen:
            best = max(remaining, key=lambda v: (v.energy() / v.sigma2, -v.user))
            chosen = [best.user]
            res = ScheduleResult(selected=chosen, steps=res.steps)
        groups.append(chosen)
        results.append(res)
        chosen_set = set(chosen)
        remaining = [v for v in remaining if v.user not in chosen_set]
    return RrPeriod(groups=groups, results=results)
