"""Integer-frequency feature banks on the scaled hypercube.

Real features are products of cosines cos(a_1 x_1)...cos(a_n x_n) on
[0, pi]^n (Neumann Laplacian eigenfunctions); complex features are the
exponentials exp(i a.x).  Both share the analytic whitening divisor
||a||_2, which makes the gradient Gram matrix (the tuning matrix) of the
bank the identity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import kernels


class FeatureKind(str, Enum):
    COSINE = "Cosine"
    HOLOMORPHIC = "Holomorphic"


class BankError(ValueError):
    """Degenerate or inconsistent feature-bank configuration."""


@dataclass(frozen=True)
class MultiIndex:
    """Sparse nonnegative integer frequency vector of dimension n.

    `support` holds the positions of the nonzero entries (strictly
    increasing), `values` the entries themselves.  The all-zero vector is
    representable (empty support) so degenerate inputs can be rejected where
    it matters (whitening, bank construction), but enumeration never emits it.
    """

    n: int
    support: tuple[int, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.support) != len(self.values):
            raise ValueError("support/values length mismatch")
        if any(v < 1 for v in self.values):
            raise ValueError("values must be positive (zeros are implicit)")
        if any(not 0 <= p < self.n for p in self.support):
            raise ValueError("support position out of range")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ValueError("support must be strictly increasing")

    @classmethod
    def from_dense(cls, entries) -> "MultiIndex":
        arr = np.asarray(entries)
        if arr.ndim != 1 or np.any(arr < 0) or np.any(arr != np.floor(arr)):
            raise ValueError("entries must be a nonnegative integer vector")
        sup = tuple(int(i) for i in np.nonzero(arr)[0])
        return cls(n=arr.size, support=sup, values=tuple(int(arr[i]) for i in sup))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.int64)
        for p, v in zip(self.support, self.values):
            out[p] = v
        return out

    @property
    def degree(self) -> int:
        return sum(self.values)

    def norm1(self) -> float:
        return float(sum(self.values))

    def norm2(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    def norminf(self) -> int:
        return max(self.values) if self.values else 0


def whiten_scale(alpha: MultiIndex) -> float:
    """Whitening divisor ||alpha||_2; rejects the zero multi-index."""
    if not alpha.support:
        raise ValueError("zero multi-index has no whitening scale (bias term)")
    return alpha.norm2()


def cosine_feature(alpha: MultiIndex, x) -> float:
    """prod_j cos(alpha_j x_j) at a real point of [0, pi]^n."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (alpha.n,):
        raise ValueError("dimension mismatch")
    out = 1.0
    for p, v in zip(alpha.support, alpha.values):
        out *= math.cos(v * x[p])
    return out


def cosine_sum_expansion(alpha: MultiIndex, x) -> float:
    """Sign-pattern cosine sum (1/2^m) sum_Q cos(Q alpha . x) over the support.

    Zero entries contribute a factor 1 and are skipped; the empty support
    gives the empty product 1.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (alpha.n,):
        raise ValueError("dimension mismatch")
    m = len(alpha.support)
    if m == 0:
        return 1.0
    if m > 24:
        raise ValueError("support too large for the sign-sum form")
    terms = np.array([v * x[p] for p, v in zip(alpha.support, alpha.values)])
    total = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=m):
        total += math.cos(float(np.dot(signs, terms)))
    return total / 2.0 ** m


def holo_feature(alpha: MultiIndex, z) -> complex:
    """exp(i alpha . z); unit magnitude on real input."""
    z = np.asarray(z)
    if z.shape != (alpha.n,):
        raise ValueError("dimension mismatch")
    phase = sum(v * z[p] for p, v in zip(alpha.support, alpha.values))
    return complex(np.exp(1j * phase))


def cos_complex(z) -> complex:
    """Complex cosine cos(x)cosh(y) - i sin(x)sinh(y) for z = x + iy.

    This is the unique extension off the real axis that satisfies the
    Cauchy-Riemann equations; on the real axis it reduces to the real cosine
    exactly.
    """
    z = complex(z)
    x, y = z.real, z.imag
    if y == 0.0:
        return complex(math.cos(x), 0.0)
    return complex(math.cos(x) * math.cosh(y), -math.sin(x) * math.sinh(y))


# ---------------------------------------------------------------------------
# templates and bank enumeration

@dataclass(frozen=True)
class Template:
    """One placed instance of a 0/1 mask: dilation stretches the inter-cell
    spacing, the anchor positions the top-left cell on the image grid."""

    mask: tuple[tuple[int, ...], ...]
    dilation: int
    anchor: tuple[int, int]

    def __post_init__(self):
        if not 1 <= self.dilation <= 5:
            raise ValueError("dilation must be in [1, 5]")
        if not self.mask or any(len(r) != len(self.mask[0]) for r in self.mask):
            raise ValueError("mask must be a rectangular 0/1 grid")
        if not any(c for row in self.mask for c in row):
            raise ValueError("mask has no active cells")

    def cells(self) -> list[tuple[int, int]]:
        r0, c0 = self.anchor
        return [
            (r0 + self.dilation * i, c0 + self.dilation * j)
            for i, row in enumerate(self.mask)
            for j, v in enumerate(row)
            if v
        ]

    def fits(self, image_shape: tuple[int, int]) -> bool:
        rows, cols = image_shape
        return all(0 <= r < rows and 0 <= c < cols for r, c in self.cells())


DEFAULT_MASKS: tuple[tuple[tuple[int, ...], ...], ...] = (
    ((1,),),                 # singleton
    ((1, 1),),               # horizontal pair
    ((1,), (1,)),            # vertical pair
    ((1, 0), (0, 1)),        # diagonal pair
    ((1, 1), (1, 1)),        # 2x2 block
)


@dataclass(frozen=True)
class TemplateConfig:
    masks: tuple[tuple[tuple[int, ...], ...], ...] = DEFAULT_MASKS
    dilations: tuple[int, ...] = (1, 2, 3, 4, 5)
    kind: FeatureKind = FeatureKind.COSINE

    def __post_init__(self):
        if not self.masks or not self.dilations:
            raise BankError("template config needs at least one mask and dilation")
        if any(not 1 <= d <= 5 for d in self.dilations):
            raise BankError("dilations must lie in [1, 5]")


def parse_template_config(path) -> TemplateConfig:
    """Read a template file: `kind:`, `dilations:` and `mask:` blocks whose
    rows are strings of 0/1 characters."""
    text = Path(path).read_text()
    kind = None
    dilations: list[int] = []
    masks: list[tuple[tuple[int, ...], ...]] = []
    current: list[tuple[int, ...]] | None = None

    def flush():
        nonlocal current
        if current is not None:
            if not current:
                raise BankError("empty mask block")
            masks.append(tuple(current))
            current = None

    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("kind:"):
            flush()
            kind = FeatureKind(line.split(":", 1)[1].strip())
        elif line.lower().startswith("dilations:"):
            flush()
            dilations = [int(t) for t in line.split(":", 1)[1].split()]
        elif line.lower().startswith("mask:"):
            flush()
            current = []
        else:
            if current is None or any(ch not in "01" for ch in line):
                raise BankError(f"unexpected template line: {raw!r}")
            current.append(tuple(int(ch) for ch in line))
    flush()
    if kind is None:
        raise BankError("template config missing kind")
    return TemplateConfig(masks=tuple(masks), dilations=tuple(dilations), kind=kind)


def format_template_config(cfg: TemplateConfig) -> str:
    lines = [f"kind: {cfg.kind.value}", "dilations: " + " ".join(map(str, cfg.dilations))]
    for mask in cfg.masks:
        lines.append("mask:")
        lines.extend("".join(map(str, row)) for row in mask)
    return "\n".join(lines) + "\n"


@dataclass
class FeatureBank:
    """Ordered, deduplicated multi-index set with whitening scales."""

    n: int
    indices: list[MultiIndex]
    scales: np.ndarray
    kind: FeatureKind
    image_shape: tuple[int, int] | None = None
    _csr: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False)
    _lineage: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_indices(cls, indices, kind, image_shape=None) -> "FeatureBank":
        indices = list(indices)
        if not indices:
            raise BankError("empty feature bank")
        n = indices[0].n
        if any(a.n != n for a in indices):
            raise BankError("mixed dimensions in bank")
        if any(not a.support for a in indices):
            raise BankError("bank cannot contain the zero multi-index")
        keys = {(a.support, a.values) for a in indices}
        if len(keys) != len(indices):
            raise BankError("bank indices must be distinct")
        scales = np.array([whiten_scale(a) for a in indices])
        return cls(n=n, indices=indices, scales=scales, kind=kind,
                   image_shape=image_shape)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def amps(self) -> np.ndarray:
        """Orthonormalizing amplitudes: sqrt(2) per active cosine component
        (unit L2 norm under the uniform measure on [0, pi]^n); 1 for the
        holomorphic exponentials, which are already unimodular."""
        if self.kind is FeatureKind.HOLOMORPHIC:
            return np.ones(len(self.indices))
        m = np.array([len(a.support) for a in self.indices], dtype=np.float64)
        return np.sqrt(2.0) ** m

    def csr(self):
        """Bank as CSR arrays (indptr, pixel indices, frequencies)."""
        if self._csr is None:
            indptr = np.zeros(len(self.indices) + 1, dtype=np.int64)
            cols = []
            vals = []
            for k, a in enumerate(self.indices):
                cols.extend(a.support)
                vals.extend(a.values)
                indptr[k + 1] = len(cols)
            self._csr = (indptr, np.asarray(cols, dtype=np.int64),
                         np.asarray(vals, dtype=np.float64))
        return self._csr

    def lineage(self):
        """(prefix feature id, last pixel, support size) arrays when every
        feature is unit-valued and its support minus the last pixel appears
        earlier in the bank (always true for enumerated banks); else None."""
        if self._lineage is None:
            by_support = {}
            prefix = np.empty(len(self.indices), dtype=np.int64)
            last = np.empty(len(self.indices), dtype=np.int64)
            sizes = np.empty(len(self.indices), dtype=np.int64)
            ok = True
            for k, a in enumerate(self.indices):
                if any(v != 1 for v in a.values):
                    ok = False
                    break
                sizes[k] = len(a.support)
                last[k] = a.support[-1]
                if len(a.support) == 1:
                    prefix[k] = -1
                else:
                    pf = by_support.get(a.support[:-1])
                    if pf is None:
                        ok = False
                        break
                    prefix[k] = pf
                by_support[a.support] = k
            self._lineage = (prefix, last, sizes) if ok else (None,)
        return None if len(self._lineage) == 1 else self._lineage

    def design(self, x_domain: np.ndarray) -> np.ndarray:
        """Whitened feature matrix at domain points (rows in [0, pi]^n).

        Real (N, K) for the cosine kind, complex (N, K) for the holomorphic
        kind.
        """
        X = np.ascontiguousarray(np.atleast_2d(x_domain), dtype=np.float64)
        lin = self.lineage()
        if self.kind is FeatureKind.COSINE:
            if lin is not None:
                return kernels.cos_design_lineage(X, *lin, self.scales)
            return kernels.cos_design(X, *self.csr()) * (self.amps / self.scales)
        if lin is not None:
            return kernels.holo_design_lineage(X, *lin, self.scales)
        c, s = kernels.phase_design(X, *self.csr())
        return (c + 1j * s) / self.scales

    def design_complex(self, z: np.ndarray) -> np.ndarray:
        """Whitened feature matrix at complex points (cold path, tests)."""
        Z = np.atleast_2d(np.asarray(z, dtype=np.complex128))
        K = len(self.indices)
        out = np.empty((Z.shape[0], K), dtype=np.complex128)
        for k, a in enumerate(self.indices):
            if self.kind is FeatureKind.HOLOMORPHIC:
                phase = Z[:, list(a.support)] @ np.asarray(a.values, dtype=np.float64)
                out[:, k] = np.exp(1j * phase)
            else:
                prod = np.ones(Z.shape[0], dtype=np.complex128)
                for p, v in zip(a.support, a.values):
                    w = v * Z[:, p]
                    prod *= np.array([cos_complex(t) for t in w])
                out[:, k] = prod
        return out * (self.amps / self.scales)

    def input_grad(self, x_domain: np.ndarray, coeff: np.ndarray) -> np.ndarray:
        """d(sum_k coeff[i,k] * raw_feature_k)/dx at domain points; cosine
        kind.  `coeff` carries any whitening and chain factors."""
        if self.kind is not FeatureKind.COSINE:
            raise BankError("input_grad is the cosine-kind path; "
                            "use holo_grad_scatter")
        X = np.ascontiguousarray(np.atleast_2d(x_domain), dtype=np.float64)
        indptr, cols, vals = self.csr()
        G = np.ascontiguousarray(coeff, dtype=np.float64)
        return kernels.cos_input_grad(X, indptr, cols, vals, G)

    def holo_grad_scatter(self, qw: np.ndarray, psi: np.ndarray) -> np.ndarray:
        """Gradient of Re(sum_k qw[i,k] * psi[i,k]) with respect to the domain
        point, given the whitened design matrix psi at those points."""
        if self.kind is not FeatureKind.HOLOMORPHIC:
            raise BankError("holo_grad_scatter needs a holomorphic bank")
        indptr, cols, vals = self.csr()
        return kernels.holo_input_grad(
            self.n, indptr, cols, vals,
            np.ascontiguousarray(qw, dtype=np.complex128),
            np.ascontiguousarray(psi, dtype=np.complex128))


def enumerate_bank(image_shape: tuple[int, int], config: TemplateConfig) -> FeatureBank:
    """Every placement of every dilation of every mask that fits the grid,
    closed under sub-masks, deduplicated, in (mask, dilation, row, col) order."""
    rows, cols = image_shape
    if rows < 1 or cols < 1:
        raise BankError("image shape must be positive")
    n = rows * cols
    seen: set[tuple[int, ...]] = set()
    order: list[tuple[int, ...]] = []
    for mask in config.masks:
        for d in config.dilations:
            for r in range(rows):
                for c in range(cols):
                    tpl = Template(mask=mask, dilation=d, anchor=(r, c))
                    if not tpl.fits(image_shape):
                        continue
                    pixels = sorted(rr * cols + cc for rr, cc in tpl.cells())
                    for size in range(1, len(pixels) + 1):
                        for sub in itertools.combinations(pixels, size):
                            if sub not in seen:
                                seen.add(sub)
                                order.append(sub)
    if not order:
        raise BankError("template config produced an empty bank")
    indices = [MultiIndex(n=n, support=sup, values=(1,) * len(sup)) for sup in order]
    return FeatureBank.from_indices(indices, config.kind, image_shape=image_shape)


# ---------------------------------------------------------------------------
# quadrature verification of the tuning matrix

def tuning_matrix_quadrature(bank: FeatureBank, grid_points_per_dim: int,
                             use_scales: bool = True) -> np.ndarray:
    """Gradient Gram matrix by tensor-product midpoint quadrature.

    Integrates against the uniform probability measure of the fundamental
    cell: [0, pi]^n for the cosine kind (features carrying their sqrt(2)
    orthonormal amplitudes), the full period [-pi, pi]^n with the Hermitian
    form for the holomorphic kind.  Test-only path, guarded to n <= 3.
    """
    n = bank.n
    if n > 3:
        raise BankError("quadrature tuning matrix is limited to n <= 3")
    G = int(grid_points_per_dim)
    if G < 2:
        raise ValueError("need at least 2 quadrature points per dim")
    if bank.kind is FeatureKind.COSINE:
        pts1 = (np.arange(G) + 0.5) * (math.pi / G)
    else:
        pts1 = -math.pi + (np.arange(G) + 0.5) * (2.0 * math.pi / G)
    grids = np.meshgrid(*([pts1] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)  # (G^n, n)

    K = len(bank)
    complex_kind = bank.kind is FeatureKind.HOLOMORPHIC
    dtype = np.complex128 if complex_kind else np.float64
    grads = np.zeros((K, pts.shape[0], n), dtype=dtype)
    amps = bank.amps
    for k, a in enumerate(bank.indices):
        scale = bank.scales[k] if use_scales else 1.0
        if complex_kind:
            phase = pts[:, list(a.support)] @ np.asarray(a.values, dtype=np.float64)
            psi = np.exp(1j * phase) / scale
            for p, v in zip(a.support, a.values):
                grads[k, :, p] = 1j * v * psi
        else:
            cosx = {p: np.cos(v * pts[:, p]) for p, v in zip(a.support, a.values)}
            sinx = {p: np.sin(v * pts[:, p]) for p, v in zip(a.support, a.values)}
            for p, v in zip(a.support, a.values):
                g = np.full(pts.shape[0], -v * amps[k] / scale)
                g *= sinx[p]
                for q, w in zip(a.support, a.values):
                    if q != p:
                        g *= cosx[q]
                grads[k, :, p] = g
    flat = grads.reshape(K, -1)
    sigma = (np.conj(flat) @ flat.T) / pts.shape[0]
    return sigma.real if not complex_kind else sigma
