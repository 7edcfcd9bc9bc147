"""Truncated step-3 tensor algebra over R^d and the free nilpotent group.

Elements live in T3(R^d) = R + R^d + (R^d)^2 + (R^d)^3 with the tensor
product truncated beyond level 3.  Group-like elements (unit scalar part,
shuffle relations) form the step-3 free nilpotent group; their logarithms
form the step-3 free Lie algebra, coordinatized on a Hall basis.

All level arrays support arbitrary leading batch dimensions so that large
ensembles of elements are processed with vectorized numpy arithmetic.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TruncatedTensor",
    "GroupElement",
    "LieElement",
    "zero_tensor",
    "unit_tensor",
    "identity_element",
    "tensor_mul",
    "tensor_add",
    "tensor_scale",
    "group_inverse",
    "exp_trunc",
    "log_trunc",
    "dilate",
    "homogeneous_norm",
    "cc_distance",
    "shuffle_residual",
    "is_group_like",
    "hall_pairs",
    "hall_triples",
    "lie_dim",
    "hall_basis_labels",
    "lie_to_tensor",
    "tensor_to_lie",
    "hall_log_signature",
    "lie_level_norms",
    "bch_bound_check",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TruncatedTensor:
    """Element of the degree-3 truncated tensor algebra.

    ``level0`` has the batch shape, ``level1`` appends (d,), ``level2``
    (d, d) and ``level3`` (d, d, d).  Instances are immutable; the arrays
    are marked read-only at construction.
    """

    dim: int
    level0: np.ndarray
    level1: np.ndarray
    level2: np.ndarray
    level3: np.ndarray

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise ValueError("dim must be >= 1")
        l0 = _freeze(self.level0)
        l1 = _freeze(self.level1)
        l2 = _freeze(self.level2)
        l3 = _freeze(self.level3)
        batch = l0.shape
        if l1.shape != batch + (d,) or l2.shape != batch + (d, d) or l3.shape != batch + (d, d, d):
            raise ValueError("level array extents inconsistent with dim/batch")
        for a in (l0, l1, l2, l3):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite entry in tensor levels")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "level0", l0)
        object.__setattr__(self, "level1", l1)
        object.__setattr__(self, "level2", l2)
        object.__setattr__(self, "level3", l3)

    @property
    def batch_shape(self) -> tuple:
        return self.level0.shape

    def levels(self):
        return self.level0, self.level1, self.level2, self.level3


@dataclass(frozen=True)
class GroupElement:
    """Group-like element of T3: scalar part exactly 1.

    Shuffle relations are not re-validated on every construction (products
    of group elements satisfy them automatically); use
    :func:`shuffle_residual` / :func:`is_group_like` to check inputs of
    unknown provenance.
    """

    tensor: TruncatedTensor

    def __post_init__(self):
        if not np.all(self.tensor.level0 == 1.0):
            raise ValueError("group element must have unit scalar part")

    @property
    def dim(self) -> int:
        return self.tensor.dim

    @property
    def batch_shape(self) -> tuple:
        return self.tensor.batch_shape


def zero_tensor(dim: int, batch: tuple = ()) -> TruncatedTensor:
    d = int(dim)
    return TruncatedTensor(
        d,
        np.zeros(batch),
        np.zeros(batch + (d,)),
        np.zeros(batch + (d, d)),
        np.zeros(batch + (d, d, d)),
    )


def unit_tensor(dim: int, batch: tuple = ()) -> TruncatedTensor:
    d = int(dim)
    return TruncatedTensor(
        d,
        np.ones(batch),
        np.zeros(batch + (d,)),
        np.zeros(batch + (d, d)),
        np.zeros(batch + (d, d, d)),
    )


def identity_element(dim: int, batch: tuple = ()) -> GroupElement:
    return GroupElement(unit_tensor(dim, batch))


def _as_tensor(x) -> TruncatedTensor:
    if isinstance(x, GroupElement):
        return x.tensor
    if isinstance(x, LieElement):
        return lie_to_tensor(x)
    if isinstance(x, TruncatedTensor):
        return x
    raise TypeError(f"expected tensor-like value, got {type(x).__name__}")


def tensor_mul(a, b) -> TruncatedTensor | GroupElement:
    """Truncated tensor product a (x) b; drops everything beyond level 3.

    Batch shapes broadcast against each other.  Returns a GroupElement when
    both factors are group elements (the group is closed under the product).
    """
    wrap = isinstance(a, GroupElement) and isinstance(b, GroupElement)
    ta, tb = _as_tensor(a), _as_tensor(b)
    if ta.dim != tb.dim:
        raise ValueError("dimension mismatch in tensor product")
    a0, a1, a2, a3 = ta.levels()
    b0, b1, b2, b3 = tb.levels()
    s = a0[..., None]
    t = b0[..., None]
    l0 = a0 * b0
    l1 = s * b1 + a1 * t
    l2 = (
        s[..., None] * b2
        + a1[..., :, None] * b1[..., None, :]
        + a2 * t[..., None]
    )
    l3 = (
        s[..., None, None] * b3
        + a1[..., :, None, None] * b2[..., None, :, :]
        + a2[..., :, :, None] * b1[..., None, None, :]
        + a3 * t[..., None, None]
    )
    out = TruncatedTensor(ta.dim, l0, l1, l2, l3)
    return GroupElement(out) if wrap else out


def tensor_add(a, b) -> TruncatedTensor:
    ta, tb = _as_tensor(a), _as_tensor(b)
    if ta.dim != tb.dim:
        raise ValueError("dimension mismatch")
    return TruncatedTensor(
        ta.dim,
        ta.level0 + tb.level0,
        ta.level1 + tb.level1,
        ta.level2 + tb.level2,
        ta.level3 + tb.level3,
    )


def tensor_scale(c, a) -> TruncatedTensor:
    ta = _as_tensor(a)
    c = np.asarray(c, dtype=float)
    return TruncatedTensor(
        ta.dim,
        c * ta.level0,
        c[..., None] * ta.level1,
        c[..., None, None] * ta.level2,
        c[..., None, None, None] * ta.level3,
    )


def group_inverse(g: GroupElement) -> GroupElement:
    """Inverse in the truncated algebra: for g = 1 + x the Neumann series
    1 - x + x^2 - x^3 terminates exactly at step 3."""
    t = _as_tensor(g)
    if not np.all(t.level0 == 1.0):
        raise ValueError("inverse requires unit scalar part")
    x1, x2, x3 = t.level1, t.level2, t.level3
    sq2 = np.einsum("...i,...j->...ij", x1, x1)
    sq3 = (
        np.einsum("...i,...jk->...ijk", x1, x2)
        + np.einsum("...ij,...k->...ijk", x2, x1)
    )
    cube3 = np.einsum("...i,...j,...k->...ijk", x1, x1, x1)
    inv = TruncatedTensor(
        t.dim,
        np.ones(t.batch_shape),
        -x1,
        -x2 + sq2,
        -x3 + sq3 - cube3,
    )
    return GroupElement(inv)


def exp_trunc(x) -> GroupElement:
    """exp truncated at degree 3: 1 + x + x^2/2 + x^3/6 (zero scalar input)."""
    t = _as_tensor(x)
    if not np.all(t.level0 == 0.0):
        raise ValueError("exp requires zero scalar part")
    x1, x2, x3 = t.level1, t.level2, t.level3
    s2_l2 = np.einsum("...i,...j->...ij", x1, x1)
    s2_l3 = (
        np.einsum("...i,...jk->...ijk", x1, x2)
        + np.einsum("...ij,...k->...ijk", x2, x1)
    )
    s3_l3 = np.einsum("...i,...j,...k->...ijk", x1, x1, x1)
    out = TruncatedTensor(
        t.dim,
        np.ones(t.batch_shape),
        x1,
        x2 + 0.5 * s2_l2,
        x3 + 0.5 * s2_l3 + s3_l3 / 6.0,
    )
    return GroupElement(out)


def log_trunc(g) -> TruncatedTensor:
    """log power series truncated at degree 3: x - x^2/2 + x^3/3, x = g - 1."""
    t = _as_tensor(g)
    if not np.all(t.level0 == 1.0):
        raise ValueError("log requires unit scalar part")
    x1, x2, x3 = t.level1, t.level2, t.level3
    sq2 = np.einsum("...i,...j->...ij", x1, x1)
    sq3 = (
        np.einsum("...i,...jk->...ijk", x1, x2)
        + np.einsum("...ij,...k->...ijk", x2, x1)
    )
    cube3 = np.einsum("...i,...j,...k->...ijk", x1, x1, x1)
    return TruncatedTensor(
        t.dim,
        np.zeros(t.batch_shape),
        x1,
        x2 - 0.5 * sq2,
        x3 - 0.5 * sq3 + cube3 / 3.0,
    )


def dilate(lam, g: GroupElement) -> GroupElement:
    """Dilation: multiplies level i by lam^i.  lam may be batched."""
    t = _as_tensor(g)
    lam = np.asarray(lam, dtype=float)
    out = TruncatedTensor(
        t.dim,
        t.level0,
        lam[..., None] * t.level1,
        (lam**2)[..., None, None] * t.level2,
        (lam**3)[..., None, None, None] * t.level3,
    )
    return GroupElement(out)


def _level_fro(t: TruncatedTensor):
    d = t.dim
    n1 = np.sqrt(np.sum(t.level1**2, axis=-1))
    n2 = np.sqrt(np.sum(t.level2.reshape(t.batch_shape + (d * d,)) ** 2, axis=-1))
    n3 = np.sqrt(np.sum(t.level3.reshape(t.batch_shape + (d**3,)) ** 2, axis=-1))
    return n1, n2, n3


def _raw_norm(t: TruncatedTensor):
    n1, n2, n3 = _level_fro(t)
    return np.maximum(n1, np.maximum(n2 ** 0.5, n3 ** (1.0 / 3.0)))


def homogeneous_norm(g: GroupElement):
    """max(|pi1|, |pi2|^(1/2), |pi3|^(1/3)) with Frobenius level norms,
    symmetrized so that ||g|| = ||g^-1|| (take the max of both raw values).

    Homogeneous under dilation and subadditive: ||g (x) h|| <= ||g|| + ||h||.
    Returns an array over the batch shape (0-d array for a single element).
    """
    raw = _raw_norm(g.tensor)
    raw_inv = _raw_norm(group_inverse(g).tensor)
    return np.maximum(raw, raw_inv)


def cc_distance(g: GroupElement, h: GroupElement):
    """Homogeneous distance ||g^-1 (x) h||."""
    if g.dim != h.dim:
        raise ValueError("dimension mismatch")
    return homogeneous_norm(tensor_mul(group_inverse(g), h))


def shuffle_residual(g: GroupElement):
    """Relative size of the group-like (shuffle) defects.

    Checks sym(pi2) = 1/2 pi1 (x) pi1 and, for all i,j,k,
    pi1^i pi2^(j,k) = pi3^(i,j,k) + pi3^(j,i,k) + pi3^(j,k,i).
    Residuals are scaled by max(1, raw norm)^level so the measure is
    dilation-insensitive for large elements and absolute for small ones.
    """
    t = g.tensor
    x1, x2, x3 = t.level1, t.level2, t.level3
    sym2 = 0.5 * (x2 + np.swapaxes(x2, -1, -2))
    half_sq = 0.5 * np.einsum("...i,...j->...ij", x1, x1)
    r2 = np.sqrt(np.sum((sym2 - half_sq) ** 2, axis=(-2, -1)))
    lhs3 = np.einsum("...i,...jk->...ijk", x1, x2)
    rhs3 = (
        x3
        + np.einsum("...jik->...ijk", x3)
        + np.einsum("...jki->...ijk", x3)
    )
    r3 = np.sqrt(np.sum((lhs3 - rhs3) ** 2, axis=(-3, -2, -1)))
    nrm = np.maximum(_raw_norm(t), 1.0)
    return r2 / nrm**2 + r3 / nrm**3


def is_group_like(g: GroupElement, tol: float = 1e-10) -> bool:
    return bool(np.all(shuffle_residual(g) <= tol))


# ---------------------------------------------------------------------------
# Hall basis and Lie elements


@functools.lru_cache(maxsize=None)
def hall_pairs(d: int) -> tuple:
    """Level-2 basis index pairs (i, j) with i < j, for [e_i, e_j]."""
    return tuple((i, j) for i in range(d) for j in range(i + 1, d))


@functools.lru_cache(maxsize=None)
def hall_triples(d: int) -> tuple:
    """Level-3 basis index triples (i, j, k) with j < k and j <= i.

    (i, j, k) stands for [e_i, [e_j, e_k]]; the cases i = j and i = k are
    the repeated-letter words.  Count per d is (d^3 - d)/3.
    """
    return tuple(
        (i, j, k)
        for j in range(d)
        for k in range(j + 1, d)
        for i in range(j, d)
    )


def lie_dim(d: int) -> int:
    return d + d * (d - 1) // 2 + (d**3 - d) // 3


def hall_basis_labels(d: int) -> list:
    labels = [f"{i+1}" for i in range(d)]
    labels += [f"[{i+1},{j+1}]" for i, j in hall_pairs(d)]
    labels += [f"[{i+1},[{j+1},{k+1}]]" for i, j, k in hall_triples(d)]
    return labels


@dataclass(frozen=True)
class LieElement:
    """Element of the step-3 free Lie algebra in Hall coordinates.

    ``coords`` concatenates [level-1 (d); level-2 pairs; level-3 triples]
    along the last axis, with the index sets from :func:`hall_pairs` and
    :func:`hall_triples`.  Leading axes are batch.
    """

    dim: int
    coords: np.ndarray

    def __post_init__(self):
        c = _freeze(self.coords)
        if c.shape[-1] != lie_dim(self.dim):
            raise ValueError(
                f"expected {lie_dim(self.dim)} hall coordinates, got {c.shape[-1]}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite hall coordinate")
        object.__setattr__(self, "coords", c)

    @property
    def batch_shape(self) -> tuple:
        return self.coords.shape[:-1]

    def split(self):
        d = self.dim
        n1, n2 = d, len(hall_pairs(d))
        return (
            self.coords[..., :n1],
            self.coords[..., n1 : n1 + n2],
            self.coords[..., n1 + n2 :],
        )


@functools.lru_cache(maxsize=None)
def _hall_expansion_matrices(d: int):
    """Dense expansion of the Hall basis into tensor coordinates.

    Returns (E2, E3): E2 maps level-2 hall coords to the d*d tensor, E3 maps
    level-3 hall coords to the d^3 tensor ([e_i,[e_j,e_k]] written out as
    ijk - ikj - jki + kji).
    """
    pairs = hall_pairs(d)
    triples = hall_triples(d)
    E2 = np.zeros((len(pairs), d * d))
    for r, (i, j) in enumerate(pairs):
        E2[r, i * d + j] += 1.0
        E2[r, j * d + i] -= 1.0
    E3 = np.zeros((len(triples), d**3))
    for r, (i, j, k) in enumerate(triples):
        E3[r, (i * d + j) * d + k] += 1.0
        E3[r, (i * d + k) * d + j] -= 1.0
        E3[r, (j * d + k) * d + i] -= 1.0
        E3[r, (k * d + j) * d + i] += 1.0
    return E2, E3


def lie_to_tensor(l: LieElement) -> TruncatedTensor:
    d = l.dim
    c1, c2, c3 = l.split()
    E2, E3 = _hall_expansion_matrices(d)
    l2 = (c2 @ E2).reshape(l.batch_shape + (d, d))
    l3 = (c3 @ E3).reshape(l.batch_shape + (d, d, d))
    return TruncatedTensor(d, np.zeros(l.batch_shape), c1, l2, l3)


def _hall_reduce_level3(alpha: np.ndarray, d: int) -> np.ndarray:
    """Project a level-3 Lie tensor onto Hall coordinates.

    Dynkin's bracketing map (w Lie of degree 3 implies
    w = 1/3 sum alpha_ijk [e_i,[e_j,e_k]]) followed by the reduction of
    arbitrary triple brackets onto the Hall set: for j<i<k or j<k<i the
    coefficient is alpha_ijk - alpha_ikj + alpha_jik - alpha_jki, and for
    i != j the [e_i,[e_i,e_j]] coefficient is alpha_iij - alpha_iji.
    """
    triples = hall_triples(d)
    out = np.empty(alpha.shape[:-3] + (len(triples),))
    for r, (i, j, k) in enumerate(triples):
        if i == j:
            c = alpha[..., i, i, k] - alpha[..., i, k, i]
        elif i == k:
            # canonical word [e_k,[e_j,e_k]] = -[e_k,[e_k,e_j]]
            c = -(alpha[..., i, i, j] - alpha[..., i, j, i])
        else:
            c = (
                alpha[..., i, j, k]
                - alpha[..., i, k, j]
                + alpha[..., j, i, k]
                - alpha[..., j, k, i]
            )
        out[..., r] = c / 3.0
    return out


def tensor_to_lie(t: TruncatedTensor, tol: float = 1e-9) -> LieElement:
    """Hall coordinates of a Lie tensor (zero scalar, levels in the free Lie
    algebra).  Raises if the reconstruction residual exceeds ``tol`` relative
    to the level scale, i.e. if the input is not actually Lie."""
    d = t.dim
    if not np.all(t.level0 == 0.0):
        raise ValueError("Lie element must have zero scalar part")
    pairs = hall_pairs(d)
    c1 = t.level1
    c2 = np.stack([t.level2[..., i, j] for i, j in pairs], axis=-1) if pairs else np.zeros(t.batch_shape + (0,))
    c3 = _hall_reduce_level3(t.level3, d)
    lie = LieElement(d, np.concatenate([c1, c2, c3], axis=-1))
    back = lie_to_tensor(lie)
    for lvl, (got, want) in enumerate(
        [(back.level2, t.level2), (back.level3, t.level3)], start=2
    ):
        scale = np.maximum(np.max(np.abs(want)), 1.0)
        if np.max(np.abs(got - want)) > tol * scale:
            raise ValueError(f"level-{lvl} part is not a Lie element")
    return lie


def hall_log_signature(sig: GroupElement, tol: float = 1e-10) -> LieElement:
    """Closed-form Hall coordinates of log(sig) straight from signature
    entries (no power series):

      level 1:  X^i
      level 2:  1/2 (X^(i,j) - X^(j,i))                      on [e_i,e_j], i<j
      level 3:  1/6 (X^(ijk) + X^(jik) - 2 X^(ikj)
                     + X^(kij) - 2 X^(jki) + X^(kji))        on [e_i,[e_j,e_k]]
                X^(iij) + 1/12 (X^i)^2 X^j - 1/2 X^i X^(ij)  on [e_i,[e_i,e_j]]

    Inputs failing the shuffle check at ``tol`` are rejected.
    """
    res = shuffle_residual(sig)
    if np.any(res > tol):
        raise ValueError(
            f"input is not group-like (shuffle residual {float(np.max(res)):.3e} > {tol:g})"
        )
    t = sig.tensor
    d = t.dim
    x1, x2, x3 = t.level1, t.level2, t.level3
    c1 = x1
    pairs = hall_pairs(d)
    c2 = (
        np.stack([0.5 * (x2[..., i, j] - x2[..., j, i]) for i, j in pairs], axis=-1)
        if pairs
        else np.zeros(t.batch_shape + (0,))
    )

    def repeated(i, j):
        return (
            x3[..., i, i, j]
            + x1[..., i] ** 2 * x1[..., j] / 12.0
            - 0.5 * x1[..., i] * x2[..., i, j]
        )

    cols = []
    for i, j, k in hall_triples(d):
        if i == j:
            cols.append(repeated(i, k))
        elif i == k:
            cols.append(-repeated(i, j))
        else:
            cols.append(
                (
                    x3[..., i, j, k]
                    + x3[..., j, i, k]
                    - 2.0 * x3[..., i, k, j]
                    + x3[..., k, i, j]
                    - 2.0 * x3[..., j, k, i]
                    + x3[..., k, j, i]
                )
                / 6.0
            )
    c3 = np.stack(cols, axis=-1) if cols else np.zeros(t.batch_shape + (0,))
    return LieElement(d, np.concatenate([c1, c2, c3], axis=-1))


# ---------------------------------------------------------------------------
# Lie level norms and the step-3 commutator bound


def lie_level_norms(t: TruncatedTensor):
    """Per-level norms of a Lie tensor, scaled so that the commutator
    estimates |[u,v]| <= |u| |v| (level 1 x 1 -> 2 and 1 x 2 -> 3) and
    |[u,[u,v]]| <= |u|^2 |v| hold with constant one:

      level 1: Euclidean;  level 2: Frobenius/sqrt(2) (wedge coordinates);
      level 3: Frobenius/sqrt(6).

    Raw Frobenius norms satisfy the same estimates only up to sqrt(2) resp.
    sqrt(6), which is why this scaling is the natural one for step-3 bounds.
    """
    n1, n2, n3 = _level_fro(t)
    return n1, n2 / np.sqrt(2.0), n3 / np.sqrt(6.0)


def bch_bound_check(a: LieElement, b: LieElement, rtol: float = 1e-12):
    """Level-2/3 norm bounds for m = log(exp(-a) (x) exp(b)).

    Asserts, in the scaled Lie level norms of :func:`lie_level_norms`,

      |pi2(m)| <= |b2 - a2| + 1/2 |b1 - a1| |b1|
      |pi3(m)| <= |b3 - a3| + 1/2 |b2 - a2| |b1|
                  + |b1 - a1| (1/2 |b2| + 1/12 |a1|^2 + 1/12 |b1|^2)

    Returns a boolean array over the (broadcast) batch: True where both
    inequalities hold.  ``rtol`` adds a relative slack absorbing float error
    in the equality cases (e.g. a = b).
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    ta, tb = lie_to_tensor(a), lie_to_tensor(b)
    m = log_trunc(tensor_mul(exp_trunc(tensor_scale(-1.0, ta)), exp_trunc(tb)))
    _, m2, m3 = lie_level_norms(m)
    a1, a2, a3 = lie_level_norms(ta)
    b1, b2, b3 = lie_level_norms(tb)
    diff = TruncatedTensor(
        ta.dim,
        np.zeros(np.broadcast_shapes(ta.batch_shape, tb.batch_shape)),
        tb.level1 - ta.level1,
        tb.level2 - ta.level2,
        tb.level3 - ta.level3,
    )
    d1, d2, d3 = lie_level_norms(diff)
    rhs2 = d2 + 0.5 * d1 * b1
    rhs3 = d3 + 0.5 * d2 * b1 + d1 * (0.5 * b2 + (a1**2 + b1**2) / 12.0)
    ok2 = m2 <= rhs2 + rtol * (1.0 + rhs2)
    ok3 = m3 <= rhs3 + rtol * (1.0 + rhs3)
    return np.logical_and(ok2, ok3)
