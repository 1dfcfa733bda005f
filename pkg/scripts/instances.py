"""Instance loading shared by the experiment scripts."""

import itertools
from pathlib import Path

import numpy as np

from ddsdp.problem import RawSdp, normalize, parse_sdpa, phase1_init


def stable_set_instance(n: int = 12, p: float = 0.35, seed: int = 7) -> RawSdp:
    """Stable-set relaxation of a random graph, in min form (C = -J).

    The feasible set is compact (unit trace), so every cost level has an
    analytic center and the run exercises both phase kinds throughout.
    """
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2)
             if rng.random() < p]
    A = [np.eye(n)]
    b = [1.0]
    for (i, j) in edges:
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1.0
        A.append(E)
        b.append(0.0)
    return RawSdp(name=f"stable-set-{n}-{seed}", C=-np.ones((n, n)),
                  A=np.stack(A), b=np.array(b), block_structure=(n,))


def load_instance(path: str | None):
    """Parse the given SDPA file, or build the default stable-set instance."""
    if path:
        raw = parse_sdpa(Path(path).read_text(), name=Path(path).stem)
    else:
        raw = stable_set_instance()
    norm = normalize(raw)
    return raw, norm, phase1_init(norm)
