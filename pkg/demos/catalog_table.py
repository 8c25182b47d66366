"""Print closed-form zeta'(0) values next to the cut-integral pipeline for q = 0 on (0, 1)."""
import math

from specdet.sl_core import Krein, Separated, SLProblem
from specdet.zeta import flat_reference_zeta_prime0, zeta_prime0

UNIT = SLProblem(0.0, 1.0)
CASES = [
    ("Dirichlet", Separated(0.0, 0.0)),
    ("Neumann", Separated(math.pi / 2, math.pi / 2)),
    ("Robin pi/3", Separated(math.pi / 3, math.pi / 3)),
    ("Dirichlet-Robin pi/3", Separated(0.0, math.pi / 3)),
    ("Krein", Krein()),
]


def main():
    print(f"{'condition':24s} {'closed form':>14s} {'pipeline':>14s} {'zero modes':>10s}")
    for name, bc in CASES:
        ref = flat_reference_zeta_prime0(UNIT, bc)
        r = zeta_prime0(UNIT, bc)
        print(f"{name:24s} {ref:14.10f} {r.re_part:14.10f} {r.zero_modes[0]:10d}")


if __name__ == "__main__":
    main()
