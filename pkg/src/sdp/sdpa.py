"""Write an SdpProblem in SDPA sparse format (.dat-s) for offline debugging.

SDPA solves  min c^T x  s.t.  sum_i x_i F'_i - F'_0 >= 0, so every LMI block
is written with F'_i = -F_i and F'_0 = F_0. Finite box bounds become one
diagonal block (negative block size).
"""

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from src.sdp.problem import SdpProblem


def _entries(matrix: np.ndarray, matno: int, blkno: int, sign: float) -> List[Tuple[int, int, int, int, float]]:
    rows, cols = np.nonzero(np.triu(matrix))
    return [(matno, blkno, int(i) + 1, int(j) + 1, sign * float(matrix[i, j])) for i, j in zip(rows, cols)]


def write_sdpa(problem: SdpProblem, path: Union[str, Path]) -> Path:
    path = Path(path)
    n = problem.n_vars
    sizes = [con.size for con in problem.constraints]

    bound_rows = []  # (variable, coefficient, constant)
    for i in range(n):
        if np.isfinite(problem.lb[i]):
            bound_rows.append((i, 1.0, problem.lb[i]))
        if np.isfinite(problem.ub[i]):
            bound_rows.append((i, -1.0, -problem.ub[i]))
    if bound_rows:
        sizes.append(-len(bound_rows))

    entries = []
    for blk, con in enumerate(problem.constraints, start=1):
        entries += _entries(con.F0, 0, blk, 1.0)
        for i in range(n):
            entries += _entries(con.coefficient(i), i + 1, blk, -1.0)
    if bound_rows:
        blk = len(problem.constraints) + 1
        for k, (i, coef, const) in enumerate(bound_rows, start=1):
            if const != 0.0:
                entries.append((0, blk, k, k, float(const)))
            entries.append((i + 1, blk, k, k, coef))

    lines = [
        '"grasp-scp LMI problem"',
        f"{n} = mDIM",
        f"{len(sizes)} = nBLOCK",
        " ".join(str(s) for s in sizes),
        " ".join(f"{v:.17g}" for v in problem.c),
    ]
    lines += [f"{m} {b} {i} {j} {v:.17g}" for m, b, i, j, v in entries if v != 0.0]
    path.write_text("\n".join(lines) + "\n")
    return path
