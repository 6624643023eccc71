"""Independent brute-force oracles shared by the unit and acceptance tests."""

import numpy as np
from scipy import integrate
from scipy.stats import norm


def partial_sum_oracle(z):
    """C_k = max(0, max_j sum_{i=j..k} z_i), evaluated by brute force."""
    out = []
    for k in range(len(z)):
        best = 0.0
        for j in range(k + 1):
            best = max(best, sum(z[j:k + 1]))
        out.append(best)
    return out


def brute_minimal_family(sets):
    """Search every index family for the one made of exactly the inclusion-minimal sets."""
    n = len(sets)
    found = []
    for bits in range(1, 2 ** n):
        fam = [i for i in range(n) if bits >> i & 1]
        ok = all(not any(sets[j] < sets[i] for j in range(n)) for i in fam)
        ok = ok and all(any(sets[j] < sets[i] for j in range(n)) for i in range(n) if i not in fam)
        if ok:
            found.append(fam)
    assert len(found) == 1
    fam = found[0]
    private = []
    for i in fam:
        count = 0
        for s in sets[i]:
            if all(s not in sets[j] for j in fam if j != i):
                count += 1
        private.append(count)
    return min(private), frozenset(i + 1 for i in fam)


def brute_pfi_pairs(sets):
    sizes = []
    for i in range(len(sets)):
        for j in range(len(sets)):
            if not sets[j] <= sets[i]:
                sizes.append(len([s for s in sets[j] if s not in sets[i]]))
    return (min(sizes), max(sizes)) if sizes else (None, None)


def kl_quadrature(mu, sigma):
    f = lambda x: norm.pdf(x, mu, sigma) * (norm.logpdf(x, mu, sigma) - norm.logpdf(x, 0, sigma))
    return integrate.quad(f, -np.inf, np.inf, epsabs=1e-12)[0]
