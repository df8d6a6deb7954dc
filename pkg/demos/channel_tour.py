#!/usr/bin/env python3
"""A walk through the Lee-metric geometry and the two channel models.

Covers: sphere and ball counting, the uniform-symbol mean weight
delta_q, solving the Boltzmann law for a target mean weight, and the
marginal of the constant-weight channel converging to that law as the
block length grows.
"""
import numpy as np

from leeldpc.channels import sample_constant_weight, trial_stream
from leeldpc.ring import (
    ball_size,
    expected_lee_weight,
    lee_weight,
    solve_boltzmann,
    sphere_size,
)


def main():
    print("Lee spheres in (Z/7Z)^10")
    print("  radius t, |S_t|, |B_t|")
    for t in (0, 1, 5, 15, 30):
        print(f"  {t:2d}  {sphere_size(10, t, 7):>12}  {ball_size(10, t, 7):>12}")
    total = ball_size(10, 30, 7)
    print(f"  the radius-30 ball is everything: {total} = 7^10 = {7 ** 10}\n")

    print("mean Lee weight of a uniform symbol (delta_q)")
    for q in (2, 4, 5, 7, 8, 16):
        print(f"  q={q:2d}: {expected_lee_weight(q):.4f}")
    print()

    q, delta = 7, 0.3
    bparams = solve_boltzmann(delta, q)
    print(f"Boltzmann law with mean weight {delta} over Z/{q}Z")
    print(f"  beta = {bparams.beta:.6f}")
    for a in range(q):
        print(f"  P({a}) = {bparams.dist[a]:.6f}   (Lee weight {lee_weight(a, q)})")
    mean = sum(bparams.dist[a] * lee_weight(a, q) for a in range(q))
    print(f"  realized mean weight: {mean:.12f}\n")

    print("constant-weight channel marginal vs the Boltzmann law")
    print("  n=1000, t=300 (so t/n = 0.3); TV distance of the empirical")
    print("  symbol histogram against B_0.3 shrinks with more draws")
    hist = np.zeros(q)
    draws = 0
    for trial in range(1000):
        e = sample_constant_weight(1000, 300, q, trial_stream(42, trial))
        hist += np.bincount(e, minlength=q)
        draws += 1000
        if trial + 1 in (10, 100, 1000):
            tv = 0.5 * np.abs(hist / draws - bparams.dist).sum()
            print(f"  after {trial + 1:4d} vectors: TV = {tv:.5f}")


if __name__ == "__main__":
    main()
