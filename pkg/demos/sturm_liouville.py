"""Which eigenfunction of -(p u')' = lambda u is most localized?

With p = tanh(40x - 10) + 1.1 the operator is stiff on the right and soft
near the left end, so low modes crowd into the soft region.
"""
import numpy as np

from locz.sturm import SLProblem, discretize_sl, eigensolve, localized_metric, score_localization


def main(n=2048, count=40):
    pairs = eigensolve(discretize_sl(SLProblem.from_function(localized_metric, n, count)), count)
    std = score_localization(pairs)
    ext = score_localization(pairs, mode="extended", margin=1.0)
    print(f"{'k':>3} {'lambda':>12} {'1/alpha24':>10} {'beta':>8} {'beta ext':>9}")
    for pr, s, e in list(zip(pairs, std, ext))[:12]:
        print(f"{pr.index:3d} {pr.eigenvalue:12.4f} {s[0]:10.5f} {s[1]:8.5f} {e[1]:9.5f}")
    print("...")
    print(f"most localized by 1/alpha24: k = {np.argmax(std[:, 0]) + 1}")
    print(f"most localized by beta:      k = {np.argmax(std[:, 1]) + 1}")
    slope = np.polyfit(np.arange(1, count + 1), ext[:, 1], 1)[0]
    print(f"trend of the padded-domain beta over k = 1..{count}: slope {slope:.2e}")


if __name__ == "__main__":
    main()
