"""Exact posterior enumeration over association hypotheses on tiny instances.

Weights combine the gaussian-module marginal likelihood per object (a filter
pass, independent of the sampler's explicit trajectory representation), a
scipy-based count prior, and the clutter density. States are canonical
labelings (objects numbered by first appearance); each carries a K! label
multiplicity so the distribution matches label-symmetric samplers after
canonical relabeling.
"""

import math

import numpy as np
from scipy.stats import binom, poisson

from mcmot.gaussian import gaussian_logpdf, log_marginal_likelihood
from mcmot.model import AssociationHypothesis, derive_counts


def counts_logp_scipy(m, params) -> float:
    total = 0.0
    e_prev = 0
    for t in range(m.horizon):
        a, f, d, lam = (int(m.arrivals[t]), int(m.clutter[t]),
                        int(m.detections[t]), int(m.departures[t]))
        trials = e_prev + a if params.detection_trials == "arrivals_included" else e_prev
        total += poisson.logpmf(a, params.lambda_b) + poisson.logpmf(f, params.lambda_f)
        total += binom.logpmf(d, trials, params.p_d) + binom.logpmf(lam, d, params.p_lam)
        e_prev = e_prev + a - lam
    return float(total)


def enumerate_canonical_hypotheses(counts_per_time):
    """All canonical valid labelings for the given per-time observation counts."""
    slots = [(t, n) for t, c in enumerate(counts_per_time, start=1) for n in range(c)]
    results = []

    def recurse(i, labels, used_times, n_objects):
        if i == len(slots):
            claims_times = used_times
            if all(len(v) >= 2 for v in claims_times.values()):
                results.append([row[:] for row in labels])
            return
        t, n = slots[i]
        choices = [0]
        choices += [k for k in range(1, n_objects + 1) if t not in used_times[k]]
        choices.append(n_objects + 1)  # introduce the next label (canonical order)
        for k in choices:
            labels[t - 1][n] = k
            if k == 0:
                recurse(i + 1, labels, used_times, n_objects)
            elif k <= n_objects:
                used_times[k].add(t)
                recurse(i + 1, labels, used_times, n_objects)
                used_times[k].remove(t)
            else:
                used_times[k] = {t}
                recurse(i + 1, labels, used_times, max(n_objects, k))
                del used_times[k]
        labels[t - 1][n] = 0

    recurse(0, [[0] * c for c in counts_per_time], {}, 0)
    return [AssociationHypothesis(rows) for rows in results]


def enumerate_posterior(y, params):
    """dict: canonical z key -> exact posterior probability."""
    hyps = enumerate_canonical_hypotheses(list(y.counts()))
    keys, logws = [], []
    for z in hyps:
        m = derive_counts(z)
        logw = counts_logp_scipy(m, params)
        K = z.num_objects
        logw += math.lgamma(K + 1)  # label multiplicity under canonicalization
        for k in range(1, K + 1):
            claims = z.claims_of(k)
            times = [t for t, _ in claims]
            ys = np.vstack([y.y(t, n) for t, n in claims])
            logw += log_marginal_likelihood(times, ys, params)
        for t in range(1, z.horizon + 1):
            for n, lab in enumerate(z.labels[t - 1]):
                if lab == 0:
                    logw += gaussian_logpdf(y.y(t, n), params.mu_fp, params.Sigma_fp)
        keys.append(z.key())
        logws.append(logw)
    logws = np.array(logws)
    probs = np.exp(logws - logws.max())
    probs /= probs.sum()
    return dict(zip(keys, probs))


def total_variation_to(empirical_counts: dict, target: dict) -> float:
    total = sum(empirical_counts.values())
    tv = 0.0
    for key, p in target.items():
        q = empirical_counts.get(key, 0) / total
        tv += abs(p - q)
    for key in empirical_counts:
        if key not in target:
            tv += empirical_counts[key] / total
    return 0.5 * tv
