"""Regenerate tests/data/special_functions.csv with 50-digit mpmath references.

Usage: python3 special_functions.py > ../data/special_functions.csv
"""
import random

import mpmath as mp

mp.mp.dps = 50
N = 10_000


def cdf(z):
    return mp.ncdf(z)


def quantile(p):
    """Solve log ncdf(x) = log p by Newton in 50 digits."""
    p = mp.mpf(p)
    if p > 0.5:
        return -quantile(1 - p)
    if p == mp.mpf("0.5"):
        return mp.mpf(0)
    target = mp.log(p)
    x = -mp.sqrt(-2 * target) if p < mp.mpf("0.1") else mp.sqrt(2) * mp.erfinv(2 * p - 1)
    for _ in range(200):
        c = mp.ncdf(x)
        step = (mp.log(c) - target) * c / mp.npdf(x)
        x -= step
        if abs(step) < mp.mpf("1e-45"):
            break
    return x


def cvar(eps):
    return mp.npdf(quantile(1 - mp.mpf(eps))) / eps


def main():
    rng = random.Random(20240611)
    print("kind,x,expected")
    for i in range(N):
        z = rng.uniform(-37.0, 37.0) if i % 4 == 0 else rng.uniform(-8.0, 8.0)
        print(f"cdf,{z!r},{mp.nstr(cdf(mp.mpf(z)), 25)}")
    for i in range(N):
        if i % 2 == 0:
            p = rng.uniform(1e-6, 1 - 1e-6)
        else:
            p = 10.0 ** rng.uniform(-300.0, -6.0)
            if i % 4 == 1:
                p = 1.0 - 10.0 ** rng.uniform(-15.0, -6.0)
        print(f"quantile,{p!r},{mp.nstr(quantile(p), 25)}")
    for i in range(N):
        eps = rng.uniform(1e-4, 0.9999) if i % 2 == 0 else 10.0 ** rng.uniform(-12.0, -4.0)
        print(f"cvar,{eps!r},{mp.nstr(cvar(mp.mpf(eps)), 25)}")


if __name__ == "__main__":
    main()
