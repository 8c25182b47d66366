"""Half-line relative determinants for a compact well against the free operator."""
import math

from specdet.coeff_lang import parse_expr
from specdet.halfline import HalfLineProblem, bound_states, halfline_relative_zeta_prime0

FREE = HalfLineProblem(parse_expr("0"))
WELL = HalfLineProblem(parse_expr("-8*sin(pi*x/2)^2"), x_max=2.0)


def main():
    for alpha in (0.0, 1.0, 2.0):
        r = halfline_relative_zeta_prime0(FREE, WELL, alpha, alpha)
        E = ", ".join(f"{e:.6f}" for e in bound_states(WELL, alpha))
        print(f"alpha={alpha:4.2f}  zeta'(0) = {r.re_part:+.10f} {r.im_part / math.pi:+.0f} i pi   bound states: {E}")
    r = halfline_relative_zeta_prime0(FREE, FREE, 0.0, 2 * math.pi / 5)
    print(f"free Dirichlet vs Robin 2pi/5: {r.re_part:.12f} (closed form {-math.log(abs(1 - 1 / math.tan(2 * math.pi / 5))):.12f})")


if __name__ == "__main__":
    main()
