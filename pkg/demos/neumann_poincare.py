"""Neumann-Poincare eigenfunctions on three superformula curves.

For each curve the script resolves the spectrum twice, compares the leading
eigenvalues, and prints how the pulled-back eigenfunction densities score as
the eigenvalues approach zero.
"""
import numpy as np
from scipy.stats import spearmanr

from locz.neumann_poincare import (
    CIRCLE, SUPERFORMULA_CURVES, np_matrix, np_spectrum, sample_curve, score_np_localization,
)


def circle_check():
    lam = np.sort(np.linalg.eigvals(np_matrix(sample_curve(CIRCLE, 256))).real)
    print(f"unit circle: smallest eigenvalue {lam[0]:.12f}, next largest |lambda| {np.abs(lam[1:]).max():.1e}")


def curve_report(k, p):
    curve, pairs = np_spectrum(p, 512, 60)
    _, fine = np_spectrum(p, 1024, 10)
    a = np.abs([q.eigenvalue for q in pairs[:10]])
    b = np.abs([q.eigenvalue for q in fine])
    print(f"\ncurve {k}: length {curve.length():.4f}, top-10 drift N=512 -> 1024: {np.max(np.abs(a - b) / b):.1e}")
    s = score_np_localization(pairs)
    for row in s[[0, 1, 2, 3, 29, 59]]:
        print(f"   lambda {row[0]:+.6f}   1/alpha24 {row[1]:.4f}   beta {row[2]:.4f}")
    mod = np.abs(s[:, 0])
    print(f"   rank correlation with |lambda|: 1/alpha24 {spearmanr(mod, s[:, 1]).statistic:+.2f}, "
          f"beta {spearmanr(mod, s[:, 2]).statistic:+.2f}")


if __name__ == "__main__":
    circle_check()
    for k, p in enumerate(SUPERFORMULA_CURVES, 1):
        curve_report(k, p)
