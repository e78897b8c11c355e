"""Independent brute-force references used across the tests."""
from collections import defaultdict

from brwlab.groups import compose


def walk_law(spec, step, start, n):
    """Exact law of S_n by enumerating group elements (no distance reduction)."""
    gens = [spec.generator(l) for l in range(spec.n_gens)]
    law = {start: 1.0}
    for _ in range(n):
        nxt = defaultdict(float)
        for x, p in law.items():
            nxt[x] += p * step(spec.identity_label)
            for l, g in enumerate(gens):
                nxt[compose(x, g)] += p * step(l)
        law = dict(nxt)
    return law


def enumerate_sphere(spec, r):
    """Count elements at word length exactly r by breadth-first search."""
    gens = [spec.generator(l) for l in range(spec.n_gens)]
    seen = {spec.identity()}
    frontier = [spec.identity()]
    for _ in range(r):
        nxt = []
        for x in frontier:
            for g in gens:
                y = compose(x, g)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return len(frontier)
