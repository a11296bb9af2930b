"""Random test instances."""

import numpy as np


def random_spd(rng, p, n=None):
    """Sample covariance of ``n`` Gaussian draws (default ``3p``)."""
    n = n or 3 * p
    a = rng.standard_normal((p, p)) * 0.4
    cov = a @ a.T + np.eye(p)
    x = rng.multivariate_normal(np.zeros(p), cov, size=n)
    return x.T @ x / n


def random_penalty(rng, p, scale=0.3, p_inf=0.0):
    r = rng.uniform(0.2, 1.0, (p, p)) * scale
    if p_inf:
        r[rng.random((p, p)) < p_inf] = np.inf
    r = np.triu(r, 1)
    r = r + r.T
    return r


# (criterion, description, passed, detail) rows printed in the terminal summary
ACCEPTANCE = []


def report(criterion, description, passed, detail=""):
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion} ({description}): {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed
