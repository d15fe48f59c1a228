"""Independent reference implementations used to pin expected values.

Everything here is deliberately written without the package's autodiff
or model code: plain numpy, brute force, finite differences.
"""

from __future__ import annotations

import numpy as np


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of scalar f at x, coordinate by coordinate."""
    x = x.astype(np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        fp = f(x)
        flat[i] = saved - h
        fm = f(x)
        flat[i] = saved
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def gaussian_kl_monte_carlo(mu_q, sd_q, mu_p, sd_p, n_samples: int, seed: int) -> float:
    """MC estimate of KL(q||p) for diagonal Gaussians via log-density ratio."""
    rng = np.random.default_rng(seed)
    x = mu_q + sd_q * rng.standard_normal((n_samples, len(mu_q)))

    def logpdf(x, mu, sd):
        return (-0.5 * ((x - mu) / sd) ** 2 - np.log(sd) - 0.5 * np.log(2 * np.pi)).sum(axis=1)

    return float(np.mean(logpdf(x, mu_q, sd_q) - logpdf(x, mu_p, sd_p)))


def gaussian_kl_closed_form(mu_q, sd_q, mu_p, sd_p) -> float:
    return float(np.sum(np.log(sd_p / sd_q)
                        + (sd_q ** 2 + (mu_q - mu_p) ** 2) / (2 * sd_p ** 2) - 0.5))


def cross_entropy_reference(logits: np.ndarray, labels: np.ndarray) -> float:
    """Direct per-point summation of -log softmax."""
    total = 0.0
    for row, lab in zip(logits, labels):
        z = row - row.max()
        total += -(z[lab] - np.log(np.exp(z).sum()))
    return total / len(labels)


def dice_reference(probs: np.ndarray, labels: np.ndarray, smooth: float = 1.0) -> float:
    """Literal evaluation of the smoothed dice formula over present classes."""
    terms = []
    for c in np.unique(labels):
        g = (labels == c).astype(float)
        p = probs[:, c]
        terms.append(1.0 - (2.0 * (p * g).sum() + smooth) / (p.sum() + g.sum() + smooth))
    return float(np.mean(terms))


def brute_force_components(points: np.ndarray, member: np.ndarray, radius: float):
    """Connected components of the selected points under a radius graph,
    by full pairwise distances and flood fill. Returns a list of index
    arrays (indices into `points`)."""
    idx = np.flatnonzero(member)
    if idx.size == 0:
        return []
    sub = points[idx]
    d2 = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(-1)
    adj = d2 <= radius * radius
    unvisited = set(range(idx.size))
    comps = []
    while unvisited:
        seed = min(unvisited)
        frontier = {seed}
        comp = set()
        while frontier:
            i = frontier.pop()
            if i in comp:
                continue
            comp.add(i)
            frontier.update(j for j in np.flatnonzero(adj[i]) if j not in comp)
        unvisited -= comp
        comps.append(idx[sorted(comp)])
    return comps


def brute_force_next_click(points: np.ndarray, pred: np.ndarray, gt: np.ndarray,
                           radius: float, exclude=frozenset()):
    """Reference for the error-driven click rule: per ground-truth label,
    split the misclassified points into radius-graph components; pick the
    largest (ties: smaller label, then smaller min index); return the
    component point nearest its centroid (ties: smaller index) and its label.
    """
    wrong = pred != gt
    if exclude:
        wrong = wrong.copy()
        wrong[list(exclude)] = False
    if not wrong.any():
        return None
    best = None  # (-size, label, min_index, comp)
    for label in np.unique(gt[wrong]):
        member = wrong & (gt == label)
        for comp in brute_force_components(points, member, radius):
            key = (-len(comp), int(label), int(comp.min()))
            if best is None or key < best[0]:
                best = (key, comp, int(label))
    _, comp, label = best
    centroid = points[comp].mean(axis=0)
    dists = ((points[comp] - centroid) ** 2).sum(axis=1)
    chosen = comp[int(np.argmin(dists))]
    return int(chosen), label
