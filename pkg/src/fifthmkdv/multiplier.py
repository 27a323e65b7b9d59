"""Resonance function, dyadic blocks, block-norm estimates and the KPV example.

Frequencies ``xi_j`` and modulations ``lambda_j = tau_j - xi_j^5`` of three
interacting waves satisfy ``xi_1 + xi_2 + xi_3 = 0``, ``tau_1 + tau_2 + tau_3 = 0``
and hence ``h = xi_1^5 + xi_2^5 + xi_3^5 = -(lambda_1 + lambda_2 + lambda_3)``.

Dyadic conventions used throughout: ``|xi| ~ N`` means ``N/2 <= |xi| < 2N``;
``|lambda| ~ L`` means ``L/2 <= |lambda| < 2L`` except ``L = 1``, which stands
for ``|lambda| < 2``; ``A ~ B`` means ``max/min <= 4``; ``A >> B`` means
``A >= 8 B``; ``A >~ B`` means ``A >= B / 4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapacityError, PreconditionError, ResolutionError
from .spectral import ShearedField, ShearedGrid, japanese, xsb_norm

SIM = 4.0
MUCH = 8.0
RESONANCE_FACTOR = 16.0
BOUND_FACTOR = 8.0


def resonance_h(xi1, xi2):
    """``xi1^5 + xi2^5 + xi3^5`` with ``xi3 = -(xi1 + xi2)``, in factored form."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    # grouped so that swapping or negating the arguments is exact in floating point
    p = xi1 * xi2
    out = -5.0 * p * (xi1 + xi2) * ((xi1 * xi1 + xi2 * xi2) + p)
    return out if out.ndim else float(out)


def resonance_h_expanded(xi1, xi2, exact=False):
    """The defining quintic sum; ``exact=True`` evaluates it in rational arithmetic."""
    if exact:
        a, b = Fraction(float(xi1)), Fraction(float(xi2))
        return float(a**5 + b**5 - (a + b) ** 5)
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    return xi1**5 + xi2**5 + (-(xi1 + xi2)) ** 5


def dyadic(x):
    """Nearest power of two (in log scale)."""
    return 2.0 ** np.round(np.log2(np.abs(x)))


@dataclass
class ResonanceReport:
    samples: int
    ratio_min: float
    ratio_max: float
    dyadic_ratio_min: float
    dyadic_ratio_max: float
    identity_max_rel_error: float
    ok: bool


def check_resonance_relation(samples: int, seed: int = 0, identity_samples: int | None = None, bound=32.0):
    """Monte-Carlo check of ``|h| ~ N_max^4 N_min`` on the cone ``N_max ~ N_med >~ 1``.

    The exact-magnitude ratio ``|h| / (|xi|_max^4 |xi|_min)`` lies in ``[15/8, 5]``;
    with dyadic rounding of the magnitudes it must stay in ``[1/bound, bound]``.
    Also compares the factored form with the exact rational quintic sum.
    """
    if samples < 1:
        raise PreconditionError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    big = 10.0 ** rng.uniform(0.0, 3.0, samples) * rng.choice([-1.0, 1.0], samples)
    small = big * 10.0 ** rng.uniform(-3.0, 0.0, samples) * rng.choice([-1.0, 1.0], samples)
    x1, x2 = big, small
    x3 = -(x1 + x2)
    mags = np.sort(np.abs(np.stack([x1, x2, x3])), axis=0)
    keep = (mags[2] >= 1.0) & (mags[0] > 0)
    x1, x2, mags = x1[keep], x2[keep], mags[:, keep]
    h = np.abs(resonance_h(x1, x2))
    ratio = h / (mags[2] ** 4 * mags[0])
    dm = dyadic(mags)
    dm.sort(axis=0)
    dratio = h / (dm[2] ** 4 * dm[0])
    n_id = len(x1) if identity_samples is None else min(identity_samples, len(x1))
    errs = []
    for a, b, hv in zip(x1[:n_id], x2[:n_id], resonance_h(x1[:n_id], x2[:n_id])):
        ex = resonance_h_expanded(a, b, exact=True)
        errs.append(abs(hv - ex) / abs(ex) if ex else abs(hv))
    err = float(max(errs)) if errs else 0.0
    ok = bool(dratio.min() >= 1 / bound and dratio.max() <= bound and err <= 1e-10)
    return ResonanceReport(int(keep.sum()), float(ratio.min()), float(ratio.max()), float(dratio.min()), float(dratio.max()), err, ok)


# ---------------------------------------------------------------------------
# Dyadic blocks
# ---------------------------------------------------------------------------


def _sim(a, b, factor=SIM):
    return max(a, b) <= factor * min(a, b)


@dataclass(frozen=True)
class DyadicBlockSpec:
    N1: float
    N2: float
    N3: float
    H: float
    L1: float
    L2: float
    L3: float

    def __post_init__(self):
        for name in ("N1", "N2", "N3", "H"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"{name} must be positive")
        for name in ("L1", "L2", "L3"):
            if not getattr(self, name) >= 1:
                raise PreconditionError(f"{name} must be >= 1")

    @property
    def Ns(self):
        return (self.N1, self.N2, self.N3)

    @property
    def Ls(self):
        return (self.L1, self.L2, self.L3)

    @property
    def N_sorted(self):
        return tuple(sorted(self.Ns))

    @property
    def L_sorted(self):
        return tuple(sorted(self.Ls))

    def emptiness(self):
        """Reasons the block is provably empty (band arithmetic), or ``[]``."""
        nmin, nmed, nmax = self.N_sorted
        lmin, lmed, lmax = self.L_sorted
        out = []
        if nmax >= MUCH * nmed:
            out.append("N_med ~ N_max fails: N_max >= 8 N_med")
        if lmax >= 16 * max(self.H, lmed):
            out.append("L_max ~ max(H, L_med) fails: L_max >= 16 max(H, L_med)")
        if self.H >= 16 * lmax:
            out.append("L_max ~ max(H, L_med) fails: H >= 16 L_max")
        # 15/8 <= |h| / (|xi|_max^4 |xi|_min) <= 5 on the plane, and each |xi_j| is within a factor 2 of N_j
        scale = nmax**4 * nmin
        if 2 * self.H <= 15 / 256 * scale or self.H / 2 >= 160 * scale:
            out.append("H ~ N_max^4 N_min fails: resonance band out of reach")
        return out

    def violations(self):
        """Relations of the admissible set that this spec breaks."""
        nmin, nmed, nmax = self.N_sorted
        lmin, lmed, lmax = self.L_sorted
        out = []
        if not _sim(nmax, nmed):
            out.append("N_med ~ N_max")
        if not _sim(lmax, max(self.H, lmed)):
            out.append("L_max ~ max(H, L_med)")
        if nmax >= 1 and not _sim(self.H, nmax**4 * nmin, RESONANCE_FACTOR):
            out.append("H ~ N_max^4 N_min")
        return out

    @property
    def admissible(self):
        return not self.violations()

    def require_admissible(self):
        v = self.violations()
        if v:
            raise PreconditionError("inadmissible block: violates " + "; ".join(v))
        return self


def block_case(spec: DyadicBlockSpec):
    nmin, nmed, nmax = spec.N_sorted
    lmax = spec.L_sorted[2]
    if _sim(nmax, nmin) and _sim(lmax, spec.H):
        return "a"
    Ns, Ls = spec.Ns, spec.Ls
    for j in range(3):
        others = [k for k in range(3) if k != j]
        a, b = (Ns[k] for k in others)
        if min(a, b) >= MUCH * Ns[j] and _sim(a, b) and _sim(spec.H, Ls[j]) and all(Ls[j] >= Ls[k] / SIM for k in others):
            return "b"
    return "c"


def block_bound(spec: DyadicBlockSpec):
    """Closed-form upper bound for the block and the case that produced it."""
    spec.require_admissible()
    nmin, _, nmax = spec.N_sorted
    lmin, lmed, _ = spec.L_sorted
    case = block_case(spec)
    base = math.sqrt(lmin) * nmax**-2
    if case == "a":
        return base * math.sqrt(lmed), case
    if case == "b":
        return base * math.sqrt(min(spec.H, nmax / nmin * lmed)), case
    return base * math.sqrt(min(spec.H, lmed)), case


# ---------------------------------------------------------------------------
# Block-norm estimation
# ---------------------------------------------------------------------------


def _band(rng, n, center, low_one=False):
    """Uniform samples of a signed dyadic band and its total measure."""
    if low_one:
        return rng.uniform(-2.0, 2.0, n), 4.0
    mag = rng.uniform(center / 2, 2 * center, n)
    return mag * rng.choice([-1.0, 1.0], n), 3.0 * center


def _cell_index(v, center, cells, low_one=False):
    """Cell number of a band sample, ``-1`` outside the band; ``2 * cells`` cells per band."""
    v = np.asarray(v)
    if low_one:
        inside = np.abs(v) < 2.0
        idx = np.floor((v + 2.0) / 4.0 * 2 * cells).astype(np.int64)
    else:
        a = np.abs(v)
        inside = (a >= center / 2) & (a < 2 * center)
        k = np.floor((a - center / 2) / (1.5 * center) * cells).astype(np.int64)
        idx = np.where(v >= 0, cells + k, cells - 1 - k)
    idx = np.clip(idx, 0, 2 * cells - 1)
    return np.where(inside, idx, -1)


def _cell_measure(center, cells, low_one=False):
    return (4.0 if low_one else 3.0 * center) / (2 * cells)


@dataclass
class BlockEstimate:
    value: float
    history: list = field(default_factory=list)
    trials: int = 0
    hits: int = 0
    empty_reason: list = field(default_factory=list)


def _block_tensor(spec: DyadicBlockSpec, samples, cells, rng):
    """Monte-Carlo weights ``|S cap (c1 x c2 x c3)| / sqrt(|c1||c2||c3|)``."""
    Ns, Ls = spec.Ns, spec.Ls
    # free frequencies: the smallest one and one other, so the third is of size ~ N_max
    order_n = np.argsort(Ns, kind="stable")
    fa, fb = int(order_n[0]), int(order_n[2])
    fc = 3 - fa - fb
    # free modulations: the two smallest; the largest is fixed by the resonance relation
    order_l = np.argsort(Ls, kind="stable")
    la, lb = int(order_l[0]), int(order_l[1])
    lc = 3 - la - lb
    xi = [None] * 3
    lam = [None] * 3
    xi[fa], va = _band(rng, samples, Ns[fa])
    xi[fb], vb = _band(rng, samples, Ns[fb])
    xi[fc] = -(xi[fa] + xi[fb])
    lam[la], wa = _band(rng, samples, Ls[la], Ls[la] == 1)
    lam[lb], wb = _band(rng, samples, Ls[lb], Ls[lb] == 1)
    h = resonance_h(xi[0], xi[1])
    lam[lc] = -h - lam[la] - lam[lb]
    volume = va * vb * wa * wb
    habs = np.abs(h)
    ok = (habs >= spec.H / 2) & (habs < 2 * spec.H)
    nx, nl = cells
    idx = []
    for j in range(3):
        ix = _cell_index(xi[j], Ns[j], nx)
        il = _cell_index(lam[j], Ls[j], nl, Ls[j] == 1)
        ok &= (ix >= 0) & (il >= 0)
        idx.append(ix * (2 * nl) + il)
    m = (2 * nx) * (2 * nl)
    hits = int(ok.sum())
    flat = (idx[0][ok] * m + idx[1][ok]) * m + idx[2][ok]
    keys, counts = np.unique(flat, return_counts=True)
    i, rest = np.divmod(keys, m * m)
    j, k = np.divmod(rest, m)
    meas = [
        np.repeat(np.full(2 * nx, _cell_measure(Ns[q], nx)), 2 * nl)
        * np.tile(np.full(2 * nl, _cell_measure(Ls[q], nl, Ls[q] == 1)), 2 * nx)
        for q in range(3)
    ]
    w = counts * (volume / samples) / np.sqrt(meas[0][i] * meas[1][j] * meas[2][k])
    return (i, j, k, w, m), hits


def _power(W, v, iters=60, tol=1e-10):
    """Alternating power iteration for ``max W(a, b, c)`` over unit vectors.

    ``W`` is ``(i, j, k, w, m)``: coordinates and values of the non-zero entries.
    """
    i, j, k, w, m = W
    a, b, c = v
    val = 0.0
    for _ in range(iters):
        a = np.bincount(i, w * b[j] * c[k], m)
        na = np.linalg.norm(a)
        if na == 0:
            return 0.0, (a, b, c)
        a /= na
        b = np.bincount(j, w * a[i] * c[k], m)
        b /= np.linalg.norm(b)
        c = np.bincount(k, w * a[i] * b[j], m)
        new = float(np.linalg.norm(c))
        c /= new
        if abs(new - val) <= tol * new:
            val = new
            break
        val = new
    return val, (a, b, c)


def estimate_block_norm(
    spec: DyadicBlockSpec,
    trials: int = 10_000,
    seed: int = 0,
    samples: int = 200_000,
    cells=(6, 6),
    patience: int = 10,
    rel_improvement: float = 0.005,
) -> BlockEstimate:
    """Lower estimate of the block multiplier norm.

    Test functions are piecewise constant on a cell partition of each
    variable's (frequency, modulation) band.  The cell-averaged trilinear
    weights come from Monte-Carlo sampling of the block; the maximal trilinear
    form over unit vectors is then found by alternating power iteration from
    random non-negative starts.  ``history`` is the running maximum per trial.
    Stops once ``patience`` consecutive trials improve by less than
    ``rel_improvement`` in total, or after ``trials`` trials.
    """
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    nx, nl = cells
    if (2 * nx * 2 * nl) ** 3 > 2e7 or samples > 5e7:
        raise CapacityError("cell partition or sample count too large for a desk-scale estimate")
    reason = spec.emptiness()
    if reason:
        return BlockEstimate(0.0, [0.0], 0, 0, reason)
    rng = np.random.default_rng(seed)
    W, hits = _block_tensor(spec, samples, cells, rng)
    if hits == 0:
        return BlockEstimate(0.0, [0.0], 0, 0, ["no sample fell in the block"])
    m = W[-1]
    best, history = 0.0, []
    stall_ref, stall = 0.0, 0
    t = 0
    for t in range(1, trials + 1):
        if t == 1:
            v = [np.full(m, 1 / math.sqrt(m)) for _ in range(3)]
        else:
            v = [rng.random(m) for _ in range(3)]
            v = [x / np.linalg.norm(x) for x in v]
        val, _ = _power(W, v)
        best = max(best, val)
        history.append(best)
        if best > stall_ref * (1 + rel_improvement):
            stall_ref, stall = best, 0
        else:
            stall += 1
            if stall >= patience:
                break
    return BlockEstimate(best, history, t, hits, [])


def regression_specs(count: int = 100, seed: int = 2024):
    """Deterministic list of admissible block specs covering cases (a), (b) and (c)."""
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 100 * count:
            raise RuntimeError("could not assemble the regression set")
        nmax = 2.0 ** rng.integers(0, 5)
        kind = rng.integers(0, 3)
        if kind == 0:
            nmin = nmax
        elif kind == 1:
            nmin = nmax / 2.0 ** rng.integers(3, 7)
        else:
            nmin = nmax / 2.0 ** rng.integers(1, 3)
        Ns = [nmax, nmax, nmin]
        rng.shuffle(Ns)
        H = float(dyadic(3.0 * nmax**4 * nmin))
        H *= 2.0 ** rng.integers(-1, 2)
        if rng.random() < 0.7:
            lmax = H
            top = max(1, int(math.log2(max(lmax, 1.0))) + 1)
            lrest = [2.0 ** rng.integers(0, top) for _ in range(2)]
        else:
            base = max(0, int(math.log2(H)))
            lmax = 2.0 ** rng.integers(base, base + 4)
            lrest = [lmax, 2.0 ** rng.integers(0, int(math.log2(lmax)) + 1)]
        Ls = [lmax] + lrest
        rng.shuffle(Ls)
        spec = DyadicBlockSpec(*(float(x) for x in Ns), float(H), *(max(1.0, float(x)) for x in Ls))
        if spec.admissible and spec not in out:
            out.append(spec)
    return out


# ---------------------------------------------------------------------------
# KPV counterexample
# ---------------------------------------------------------------------------


def kpv_width(N):
    return N ** -1.5


def build_kpv_indicator(N, grid: ShearedGrid) -> ShearedField:
    """``chi_A + chi_{-A}`` with ``A = {N <= xi <= N + N^{-3/2}, |tau - xi^5| <= 1}``."""
    w = kpv_width(N)
    for lo, hi in ((N, N + w), (-N - w, -N)):
        cells = np.sum((grid.xi > lo) & (grid.xi < hi))
        if cells < 16:
            raise ResolutionError(f"A is covered by {cells} frequency cells; need >= 16")
    if np.sum(np.abs(grid.mu) < 1) < 16:
        raise ResolutionError("fewer than 16 modulation cells across |mu| <= 1")
    inA = (np.abs(grid.xi) >= N) & (np.abs(grid.xi) <= N + w)
    inM = np.abs(grid.mu) <= 1.0
    return ShearedField(grid, (inM[:, None] & inA[None, :]).astype(float))


def kpv_grid(N, cells=32):
    w = kpv_width(N)
    return ShearedGrid.from_windows([(-N - w, -N), (N, N + w)], (-1.0, 1.0), cells, cells)


def _triangle3(c):
    """``chi * chi * chi`` for ``chi`` the indicator of ``[-1, 1]``."""
    a = np.abs(c)
    return np.where(a <= 1, 3 - a * a, np.where(a <= 3, 0.5 * (3 - a) ** 2, 0.0))


@dataclass
class ConvolutionProfile:
    N: float
    a: np.ndarray  # scaled frequency offsets, xi = N + N^{-3/2} a
    m: np.ndarray  # modulation grid
    G: np.ndarray  # shape (len(a), len(m)); near-curve value of the triple convolution is 3 N^{-3} G
    dm: float
    da: float

    @property
    def peak(self):
        return float(3 * self.G.max())


def kpv_convolution(N, n_alpha=48, bin_width=0.02) -> ConvolutionProfile:
    """Triple self-convolution of ``chi_A + chi_{-A}`` near ``(N, N^5)``.

    Parametrise ``xi_j = +-(N + N^{-3/2} alpha_j)``; the three modulation
    integrals collapse exactly to ``P(m - D)`` with ``P`` the threefold box
    convolution, and ``D`` is the polynomial phase defect
    ``sum_{k=2}^5 C(5,k) N^{5 - 5k/2} (alpha_1^k + alpha_2^k - alpha_3^k - a^k)``.
    The remaining double integral over ``(alpha_1, alpha_2)`` uses a midpoint
    rule on exact sub-intervals and a histogram in ``D``.
    """
    eps_pow = [math.comb(5, k) * N ** (5 - 2.5 * k) for k in range(6)]
    na = 3 * n_alpha
    da = 3.0 / na
    a_vals = -1.0 + (np.arange(na) + 0.5) * da
    u = (np.arange(n_alpha) + 0.5) / n_alpha
    al1 = u
    Dlist, wlist = [], []
    for a in a_vals:
        lo = np.maximum(0.0, a - al1)
        hi = np.minimum(1.0, 1.0 + a - al1)
        span = np.clip(hi - lo, 0.0, None)
        al2 = lo[:, None] + span[:, None] * u[None, :]
        a1 = np.broadcast_to(al1[:, None], al2.shape)
        al3 = a1 + al2 - a
        D = np.zeros_like(al2)
        for k in range(2, 6):
            D += eps_pow[k] * (a1**k + al2**k - al3**k - a**k)
        Dlist.append(D.ravel())
        wlist.append(np.broadcast_to((span / n_alpha / n_alpha)[:, None], al2.shape).ravel())
    Dall = np.concatenate(Dlist)
    lo_m = math.floor(Dall.min() - 3.5)
    hi_m = math.ceil(Dall.max() + 3.5)
    nb = int(round((hi_m - lo_m) / bin_width))
    edges = np.linspace(lo_m, hi_m, nb + 1)
    centers = 0.5 * (edges[1:] + edges[:-1])
    dm = edges[1] - edges[0]
    kern_x = np.arange(-int(3 / dm) - 1, int(3 / dm) + 2) * dm
    kern = _triangle3(kern_x)
    G = np.empty((na, nb))
    for i, (D, w) in enumerate(zip(Dlist, wlist)):
        hist, _ = np.histogram(D, bins=edges, weights=w)
        G[i] = np.convolve(hist, kern, mode="same")
    return ConvolutionProfile(float(N), a_vals, centers, G, dm, da)


def _far_harmonic_norm2(N, s, b, n_alpha=24):
    """Weighted L2 mass of the ``A + A + A`` part near ``(3N, 3N^5 + 240 N^5)``.

    There the phase defect grows like ``400 N^{5/2} a`` across the set, so the
    convolution is spread over a modulation range far wider than ``P``; we use
    ``int P = 8`` per histogram bin, which is accurate once bins are wider
    than the support of ``P``.
    """
    eps = kpv_width(N)
    u = (np.arange(n_alpha) + 0.5) / n_alpha
    a1, a2, a3 = np.meshgrid(u, u, u, indexing="ij")
    a = (a1 + a2 + a3).ravel()
    xi = 3 * N + eps * a
    D = xi**5 - ((N + eps * a1) ** 5 + (N + eps * a2) ** 5 + (N + eps * a3) ** 5).ravel()
    # joint density of (a, D) over the unit cube, on coarse bins
    na, nm = 24, 24
    H, ae, me = np.histogram2d(a, D, bins=(na, nm))
    dA = np.diff(ae)[0]
    dM = np.diff(me)[0]
    rho = H / len(a) / (dA * dM)  # density per unit a per unit m
    G3 = 8.0 * rho  # int over mu's gives 8 per unit of m-density
    ac = 0.5 * (ae[1:] + ae[:-1])
    mc = 0.5 * (me[1:] + me[:-1])
    xi_c = 3 * N + eps * ac
    w = np.abs(xi_c) ** 6 * japanese(xi_c) ** (2 * s)
    conv = eps**2 * G3  # triple convolution value
    return float(np.sum(w[:, None] * japanese(mc)[None, :] ** (2 * (b - 1)) * conv**2) * eps * dA * dM)


def kpv_norm(N, s, b, order=64):
    """``||f||_{X^{s,b}}`` of the KPV function by Gauss-Legendre quadrature in sheared coordinates."""
    w = kpv_width(N)
    x, wx = np.polynomial.legendre.leggauss(order)
    xi = N + w * (x + 1) / 2
    Ixi = float(np.sum(wx * japanese(xi) ** (2 * s))) * w / 2
    Imu = float(np.sum(wx * japanese(x) ** (2 * b)))
    return math.sqrt(2 * Ixi * Imu) / (2 * math.pi)


def trilinear_ratio(N, s, b=0.51, n_alpha=48, bin_width=0.02, include_far=True, profile=None):
    """``||d_x^3 (f^3)||_{X^{s,b-1}} / ||f||_{X^{s,b}}^3`` for the KPV function ``f``.

    Norms carry the Plancherel factors of ``(2 pi)^{-1}`` per transform, so
    ``(f^3)~ = (2 pi)^{-4} f~ * f~ * f~``.
    """
    prof = profile or kpv_convolution(N, n_alpha, bin_width)
    eps = kpv_width(N)
    xi = N + eps * prof.a
    wx = np.abs(xi) ** 6 * japanese(xi) ** (2 * s)
    wm = japanese(prof.m) ** (2 * (b - 1))
    conv = 3 * N**-3.0 * prof.G
    near = float(np.sum(wx[:, None] * wm[None, :] * conv**2)) * eps * prof.da * prof.dm
    total = 2 * near  # the mirror image near (-N, -N^5)
    if include_far:
        total += 2 * _far_harmonic_norm2(N, s, b)
    num = math.sqrt(total) / (2 * math.pi) ** 5
    return num / kpv_norm(N, s, b) ** 3


def kpv_xsb_norm(N, s, b=0.51, cells=32):
    """Quadrature of the indicator on a sheared grid (cross-check of :func:`kpv_norm`)."""
    return xsb_norm(build_kpv_indicator(N, kpv_grid(N, cells)), s, b)
