"""Target scalar functions for coefficient optimization and certification."""

from __future__ import annotations

from mpmath import mp

from .series import TruncSeries


def exp_target(z):
    return mp.exp(z)


def sqrt1p_target(z):
    return mp.sqrt(1 + z)


def series_target(coeffs):
    """Polynomial target from Taylor coefficients (valid inside their radius)."""
    coeffs = list(coeffs)

    def f(z):
        acc = 0 * z
        for c in reversed(coeffs):
            acc = acc * z + c
        return acc

    return f


def exp_series(nterms: int) -> TruncSeries:
    return TruncSeries.exp(nterms)


def load_series_file(path: str) -> list[float]:
    """Taylor coefficients, one per line; blank lines and # comments ignored."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            out.append(float(line))
    if not out:
        raise ValueError(f"no coefficients found in {path}")
    return out


def get_target(name: str):
    """Resolve a CLI target name to (callable, series factory or None)."""
    if name == "exp":
        return exp_target, exp_series
    if name == "sqrt1p":
        return sqrt1p_target, None
    if name.startswith("series:"):
        coeffs = load_series_file(name[len("series:"):])

        def factory(nterms):
            return TruncSeries(coeffs, nterms)

        return series_target(coeffs), factory
    raise ValueError(f"unknown target {name!r}; use exp, sqrt1p, or series:<file>")
