"""Discrete periodic signal model and the 1-D analytic operators.

Signals live on a uniform power-of-two grid over one period; every
multiplier, cutoff and projection acts spectrally.  Forward transforms
are 1/N normalized, so hat(f)[k] is the coefficient of e^(2 pi i k x / P).
Integrals carry the measure dx = P/N, i.e. ||f||_p = (sum |f|^p dx)^(1/p).

Intervals are periodic arcs; sampling uses the half-open convention
[a, b) so that disjoint unions of touching arcs stay exactly additive.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .dyadic import Interval, frac
from .profiles import plateau


class GridError(ValueError):
    pass


class Grid:
    """Uniform periodic sampling: n points over [origin, origin + period)."""

    def __init__(self, n: int, period: float = 1.0, origin: float = 0.0):
        if n < 16 or (n & (n - 1)) != 0:
            raise GridError(f"n must be a power of two >= 16, got {n}")
        self.n = n
        self.period = float(period)
        self.origin = float(origin)
        self.dx = self.period / n
        self.x = self.origin + np.arange(n) * self.dx
        self.bins = np.fft.fftfreq(n, d=1.0 / n)      # integer frequency indices
        self.xi = self.bins / self.period             # physical frequencies

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.n == other.n
                and self.period == other.period and self.origin == other.origin)

    def __hash__(self):
        return hash((self.n, self.period, self.origin))

    def pdist(self, x, target) -> np.ndarray:
        """Periodic distance from sample positions to a point or arc."""
        if isinstance(target, Interval):
            d1 = self.pdist(x, float(target.a))
            d2 = self.pdist(x, float(target.b))
            inside = self.arc_mask(target)
            out = np.minimum(d1, d2)
            out[inside] = 0.0
            return out
        delta = np.abs(np.asarray(x, dtype=float) - float(target)) % self.period
        return np.minimum(delta, self.period - delta)

    def arc_mask(self, iv: Interval) -> np.ndarray:
        """Samples falling in the half-open arc [a, b) modulo the period."""
        a = float(iv.a) % self.period
        length = float(iv.length)
        if length >= self.period:
            return np.ones(self.n, dtype=bool)
        rel = (self.x - self.origin - a) % self.period
        return rel < length

    def __repr__(self):
        return f"Grid(n={self.n}, period={self.period}, origin={self.origin})"


class SampledSignal:
    """Complex signal sampled on a Grid."""

    __slots__ = ("grid", "values", "_hat")

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n,):
            raise GridError(f"expected {grid.n} samples, got {values.shape}")
        self.grid = grid
        self.values = values
        self._hat = None

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            self._hat = np.fft.fft(self.values) / self.grid.n
        return self._hat

    @classmethod
    def from_spectrum(cls, grid: Grid, hat) -> "SampledSignal":
        hat = np.asarray(hat, dtype=complex)
        sig = cls(grid, np.fft.ifft(hat * grid.n))
        sig._hat = hat.copy()
        return sig

    def norm(self, p) -> float:
        if p == math.inf:
            return float(np.max(np.abs(self.values)))
        a = np.abs(self.values) ** p
        return float((a.sum() * self.grid.dx) ** (1.0 / p))

    def norm2(self) -> float:
        return self.norm(2)

    def integral(self) -> complex:
        return complex(self.values.sum() * self.grid.dx)

    def __add__(self, other):
        self._check(other)
        return SampledSignal(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return SampledSignal(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, SampledSignal):
            self._check(other)
            return SampledSignal(self.grid, self.values * other.values)
        return SampledSignal(self.grid, self.values * other)

    __rmul__ = __mul__

    def _check(self, other):
        if other.grid != self.grid:
            raise GridError("grid mismatch")

    def modulate(self, xi) -> "SampledSignal":
        """Multiply by e^(-2 pi i xi x), shifting frequency xi to zero."""
        return SampledSignal(self.grid, self.values * np.exp(-2j * np.pi * float(xi) * self.grid.x))

    def demodulate(self, xi) -> "SampledSignal":
        return SampledSignal(self.grid, self.values * np.exp(2j * np.pi * float(xi) * self.grid.x))


def random_band_limited(grid: Grid, band: int, rng, real: bool = False,
                        normalize: str = "inf") -> SampledSignal:
    """Random signal with spectrum in |k| <= band (integer bins)."""
    hat = np.zeros(grid.n, dtype=complex)
    ks = np.where(np.abs(grid.bins) <= band)[0]
    hat[ks] = rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks))
    if real:
        full = np.zeros(grid.n, dtype=complex)
        for k in range(band + 1):
            full[k] = hat[k]
            if k:
                full[-k] = np.conj(hat[k])
        full[0] = full[0].real
        hat = full
    sig = SampledSignal.from_spectrum(grid, hat)
    if normalize == "inf":
        m = sig.norm(math.inf)
        if m > 0:
            sig = (1.0 / m) * sig
    elif normalize == "l2":
        m = sig.norm2()
        if m > 0:
            sig = (1.0 / m) * sig
    return sig


class SpectralSymbol1D:
    """Fourier multiplier symbol: an evaluation rule plus a support
    interval outside which the symbol is exactly zero."""

    def __init__(self, fn, support: tuple[float, float], name: str = "",
                 smoothness_budget: int = 4):
        self.fn = fn
        self.support = (float(support[0]), float(support[1]))
        self.name = name
        self.smoothness_budget = smoothness_budget

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        vals = np.asarray(self.fn(xi), dtype=complex)
        lo, hi = self.support
        mask = (xi >= lo) & (xi <= hi)
        return np.where(mask, vals, 0.0)

    @classmethod
    def constant(cls, value=1.0):
        return cls(lambda xi: np.full_like(xi, value, dtype=complex),
                   (-np.inf, np.inf), name=f"const({value})")

    @classmethod
    def halfline(cls, xi0: float, sign: int):
        """Sharp indicator of the open half-line {sign * (xi - xi0) > 0}."""
        if sign > 0:
            return cls(lambda xi: (xi > xi0).astype(complex), (xi0, np.inf),
                       name=f"H+({xi0})")
        return cls(lambda xi: (xi < xi0).astype(complex), (-np.inf, xi0),
                   name=f"H-({xi0})")

    def __repr__(self):
        return f"SpectralSymbol1D({self.name or self.fn})"


def apply_multiplier(sym: SpectralSymbol1D, f: SampledSignal) -> SampledSignal:
    return SampledSignal.from_spectrum(f.grid, sym(f.grid.xi) * f.hat)


def riesz_projection(f: SampledSignal, xi: float, sign: int) -> SampledSignal:
    """Riesz projection to the open half-line {sign*(freq - xi) > 0}.

    Both signs drop the exact xi bin, so H+ + H- = identity minus that
    bin's contribution.
    """
    keep = (f.grid.xi > xi) if sign > 0 else (f.grid.xi < xi)
    return SampledSignal.from_spectrum(f.grid, np.where(keep, f.hat, 0.0))


def lp_symbol(j: float, K: int, kind: str = "T") -> SpectralSymbol1D:
    """Littlewood-Paley symbols: T_j equals 1 on |xi| <= 2^(1+K j) and is
    supported in |xi| <= 2^(2+K j); S_j = T_j - T_{j-1}.  All are dilates
    of a single real even profile, so kernels are real and even."""
    s = 2.0 ** (K * j)

    if kind == "T":
        return SpectralSymbol1D(lambda xi: plateau(xi / s, flat=2.0, supp=4.0).astype(complex),
                                (-4.0 * s, 4.0 * s), name=f"T_{j}")
    if kind == "S":
        slo = 2.0 ** (K * (j - 1))
        return SpectralSymbol1D(
            lambda xi: (plateau(xi / s, flat=2.0, supp=4.0)
                        - plateau(xi / slo, flat=2.0, supp=4.0)).astype(complex),
            (-4.0 * s, 4.0 * s), name=f"S_{j}")
    raise GridError(f"kind must be T or S, got {kind!r}")


def littlewood_paley(f: SampledSignal, j: float, K: int, kind: str = "T") -> SampledSignal:
    return apply_multiplier(lp_symbol(j, K, kind), f)


class EtaKernel:
    """Positive mass-one smoothing kernel with compactly supported
    spectrum, built from a pair of Fejer kernel powers at coprime orders
    (their zero sets are disjoint, so the sum is strictly positive).

    At scale j the spectral radius is eta_fraction * 2^(K j); bins beyond
    the grid are simply absent.  Physical-space decay is polynomial of
    order ~2m where m is the Fejer power; the fitted two-sided constants
    are reported, not assumed.
    """

    def __init__(self, j: int, gc, grid: Grid):
        self.j = j
        self.grid = grid
        radius = float(gc.eta_fraction) * 2.0 ** (gc.K * j)
        b = int(math.floor(radius * grid.period + 1e-9))
        self.bandwidth = b
        if b < 1:
            table = np.full(grid.n, 1.0 / grid.period)
        else:
            m = max(1, min(gc.Ndecay // 2, b // 2))
            r1 = max(2, b // m + 1)
            while m * (r1 - 1) > b and r1 > 2:
                r1 -= 1
            r2 = r1 - 1
            table = _fejer_power(grid, r1, m)
            if r2 >= 1:
                table = table + _fejer_power(grid, r2, m)
            table = table / (table.sum() * grid.dx)
        self.table = table
        self.hat = np.fft.fft(table) * grid.dx     # hat[0] == 1 exactly
        self._support_check()

    def _support_check(self):
        out = np.abs(self.grid.bins) > self.bandwidth
        if np.any(np.abs(self.hat[out]) > 1e-10):
            raise GridError("eta kernel spectral support violated")

    def mass(self) -> float:
        return float(self.table.sum() * self.grid.dx)

    def min_value(self) -> float:
        return float(self.table.min())

    def decay_fit(self, q: float = 2.0) -> tuple[float, float]:
        """Two-sided fit of eta against (1 + s|x|)^-q at the sampled
        points: returns (C_hi, C_lo) with
        C_lo^-1 (1+s|x|)^-q <= eta/eta(0) <= C_hi (1+s|x|)^-q."""
        s = max(1, self.bandwidth)
        x = self.grid.pdist(self.grid.x, self.grid.origin)
        ref = (1.0 + s * x) ** (-q)
        ratio = self.table / (self.table.max() * ref)
        return float(ratio.max()), float(1.0 / max(ratio.min(), 1e-300))


def _fejer_power(grid: Grid, r: int, m: int) -> np.ndarray:
    """(sin(pi r x)/(r sin(pi x)))^(2m) on the grid, periodic."""
    u = (grid.x - grid.origin) / grid.period
    num = np.sin(np.pi * r * u)
    den = r * np.sin(np.pi * u)
    vals = np.ones_like(u)
    small = np.abs(den) < 1e-14
    vals[~small] = (num[~small] / den[~small]) ** 2
    vals[small] = 1.0
    return vals ** m


def indicator(grid: Grid, arcs) -> np.ndarray:
    """0/1 samples of a finite union of half-open arcs."""
    if isinstance(arcs, Interval):
        arcs = [arcs]
    out = np.zeros(grid.n)
    for iv in arcs:
        out = np.maximum(out, grid.arc_mask(iv).astype(float))
    return out


def smooth_indicator(arcs, kernel: EtaKernel) -> SampledSignal:
    """chi_{E, j} = chi_E * eta_j, computed by circular convolution."""
    grid = kernel.grid
    chi = indicator(grid, arcs)
    vals = np.fft.ifft(np.fft.fft(chi) * kernel.hat)
    return SampledSignal(grid, vals)


def chi_tilde(grid: Grid, iv: Interval, power: float = 1.0) -> np.ndarray:
    """Approximate cutoff (1 + dist(x, I)/|I|)^(-power), periodic distance."""
    ln = float(iv.length)
    d = grid.pdist(grid.x, iv)
    return (1.0 + d / ln) ** (-float(power))


class WeightProfile:
    """chi_tilde_I^p weight with its base interval and exponent."""

    def __init__(self, grid: Grid, base: Interval, exponent: float = 10.0):
        self.grid = grid
        self.base = base
        self.exponent = float(exponent)
        self.values = chi_tilde(grid, base, exponent)

    def essentially_constant_ratio(self, scale: float) -> float:
        """Worst ratio w(x)/w(y) against (1 + |x-y|/scale)^100 over sampled
        adjacent-pair distances; <= 1 certifies the defining inequality."""
        w = self.values
        n = self.grid.n
        worst = 0.0
        for shift in (1, 2, 4):
            d = shift * self.grid.dx
            ratio = np.maximum(w / np.roll(w, shift), np.roll(w, shift) / w)
            bound = (1.0 + d / scale) ** 100
            worst = max(worst, float(np.max(ratio / bound)))
        return worst


def osc(f: SampledSignal, iv: Interval) -> float:
    """L2 mean oscillation of f over an arc."""
    mask = f.grid.arc_mask(iv)
    if not np.any(mask):
        return 0.0
    vals = f.values[mask]
    mean = vals.mean()
    return float(np.sqrt(np.mean(np.abs(vals - mean) ** 2)))


def validate_weight_lemmas(grid: Grid, gc, rng, trials: int = 16,
                           packings: int = 8) -> dict:
    """Randomized numerical renderings of the weight/truncation lemmas.

    (a) || sum |I|^(1/2) chi~_I f_I ||_2 <= C (sum |I|)^(1/2) sup ||f_I||_2
        over random disjoint interval packings;
    (b) the chi~_{I'}-weighted variant with |I| <= |I'|;
    (c) weighted Bernstein ||w f||_inf <= C 2^(K j / 2) ||w f||_2 for
        band-limited f and admissible weights;
    (d) weighted L2 bound for essentially-local convolution operators.

    Returns the worst observed constant per lemma; thresholds live in the
    test suite, not here.
    """
    out = {"packing": 0.0, "packing_weighted": 0.0, "bernstein": 0.0, "local": 0.0}
    P = grid.period
    for _ in range(packings):
        k = int(rng.integers(2, 7))
        cuts = np.sort(rng.uniform(0, P, 2 * k))
        ivs = [Interval(frac(float(cuts[2 * i])).limit_denominator(10 ** 9),
                        frac(float(cuts[2 * i + 1])).limit_denominator(10 ** 9))
               for i in range(k)]
        ivs = [iv for iv in ivs if float(iv.length) > 4 * grid.dx]
        if not ivs:
            continue
        for _ in range(trials):
            fs = [random_band_limited(grid, 16, rng, normalize="l2") for _ in ivs]
            acc = np.zeros(grid.n, dtype=complex)
            for iv, fI in zip(ivs, fs):
                acc += math.sqrt(float(iv.length)) * chi_tilde(grid, iv) * fI.values
            lhs = SampledSignal(grid, acc).norm2()
            tot = math.sqrt(sum(float(iv.length) for iv in ivs))
            sup = max(f.norm2() for f in fs)
            if tot * sup > 0:
                out["packing"] = max(out["packing"], lhs / (tot * sup))
            big = max(ivs, key=lambda iv: iv.length)
            lhs_w = SampledSignal(grid, chi_tilde(grid, big) * acc).norm2()
            denom = math.sqrt(float(big.length)) * sup
            if denom > 0:
                out["packing_weighted"] = max(out["packing_weighted"], lhs_w / denom)
    # (c) Bernstein
    for _ in range(trials):
        j = int(rng.integers(0, 3))
        width = 2.0 ** (gc.K * j)
        center = float(rng.integers(-grid.n // 4, grid.n // 4)) / grid.period
        hat = np.zeros(grid.n, dtype=complex)
        sel = np.abs(grid.xi - center) <= width / 2
        hat[sel] = rng.standard_normal(sel.sum()) + 1j * rng.standard_normal(sel.sum())
        f = SampledSignal.from_spectrum(grid, hat)
        ln = max(2.0 ** (-gc.K * j), 4 * grid.dx)
        iv = Interval(0, frac(ln).limit_denominator(1 << 40))
        w = chi_tilde(grid, iv, 2.0)
        wf = SampledSignal(grid, w * f.values)
        if wf.norm2() > 0:
            out["bernstein"] = max(out["bernstein"],
                                   wf.norm(math.inf) / (2.0 ** (gc.K * j / 2) * wf.norm2()))
    # (d) essentially local operators
    for _ in range(trials):
        j = int(rng.integers(0, 3))
        s = 2.0 ** (gc.K * j)
        sym = SpectralSymbol1D(lambda xi, s=s: plateau(xi / s, 0.5, 1.0).astype(complex),
                               (-s, s))
        f = random_band_limited(grid, grid.n // 4, rng, normalize="l2")
        ln = max(1.0 / s, 4 * grid.dx)
        iv = Interval(0, frac(ln).limit_denominator(1 << 40))
        w = chi_tilde(grid, iv, 2.0)
        wf = SampledSignal(grid, w * f.values).norm2()
        wTf = SampledSignal(grid, w * apply_multiplier(sym, f).values).norm2()
        if wf > 0:
            out["local"] = max(out["local"], wTf / wf)
    return out
