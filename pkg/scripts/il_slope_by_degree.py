#!/usr/bin/env python3
"""Growth of the quaternion IL norm with the frequency radius, per tap degree.

A filter with ``K`` taps has tap polynomials of degree ``K - 1``; the log-log
slope of the IL norm against the radius tracks that degree.
"""

import numpy as np

from ncasp.quaternion import QuaternionFilter, quaternion_il_emptiness_check


def main() -> None:
    print("taps  degree  slope(min)  slope(max)")
    for K in (2, 3, 4):
        slopes = [
            quaternion_il_emptiness_check(1, F=QuaternionFilter(np.random.default_rng(s).standard_normal((4, K)))).growth_slope
            for s in range(10)
        ]
        print(f"{K:4d}  {K - 1:6d}  {min(slopes):10.3f}  {max(slopes):10.3f}")


if __name__ == "__main__":
    main()
