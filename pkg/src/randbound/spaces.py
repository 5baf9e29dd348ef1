"""Finite-dimensional sequence spaces, operator families and witnesses.

Everything here is a dense float64 array under the hood. ``INF`` is a
distinct sentinel for the exponent infinity; it is never a large float.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np


class ShapeError(ValueError):
    """Dimension mismatch between a vector, matrix or space."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class ContractError(ValueError):
    """Operation called on an object it does not support (e.g. pi_2 off l-infinity)."""


class DegenerateWitnessError(ValueError):
    """Witness whose denominator vanishes."""


class BudgetError(RuntimeError):
    """Exact enumeration requested beyond the configured cap."""


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

Exponent = Union[float, _Infinity]


def parse_exponent(p: Any) -> Exponent:
    """Accept a number, ``INF``, ``math.inf`` or the strings "inf"/"infinity"."""
    if p is INF:
        return INF
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "∞"):
            return INF
        p = float(p)
    p = float(p)
    if math.isinf(p) and p > 0:
        return INF
    if not p >= 1.0:
        raise DomainError(f"exponent must be >= 1 or infinity, got {p!r}")
    return p


def dual_exponent(p: Exponent) -> Exponent:
    if p is INF:
        return 1.0
    if p == 1.0:
        return INF
    return p / (p - 1.0)


def exponent_to_json(p: Exponent):
    return "inf" if p is INF else p


@dataclass(frozen=True)
class SeqSpace:
    """The space l^p_dim."""

    dim: int
    p: Exponent = INF

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "p", parse_exponent(self.p))

    @property
    def is_inf(self) -> bool:
        return self.p is INF

    def dual(self) -> "SeqSpace":
        return SeqSpace(self.dim, dual_exponent(self.p))

    def __repr__(self) -> str:
        p = "inf" if self.p is INF else f"{self.p:g}"
        return f"l^{p}_{self.dim}"


def as_vector(space: SeqSpace, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != space.dim:
        raise ShapeError(f"vector of shape {v.shape} does not belong to {space!r}")
    if not np.all(np.isfinite(v)):
        raise DomainError("vector entries must be finite")
    return v


def as_vectors(space: SeqSpace, vs) -> np.ndarray:
    """Stack a list of vectors into a (k, dim) array."""
    arr = np.asarray(vs, dtype=float)
    if arr.ndim == 1 and space.dim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"expected a list of vectors, got array of shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DomainError("empty list of vectors")
    if arr.shape[1] != space.dim:
        raise ShapeError(f"vectors of length {arr.shape[1]} do not belong to {space!r}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("vector entries must be finite")
    return arr


def lp_norm(x: np.ndarray, p: Exponent, axis: int = -1) -> np.ndarray:
    """Batched l^p norm along ``axis``."""
    a = np.abs(x)
    if p is INF:
        return a.max(axis=axis)
    if p == 1.0:
        return a.sum(axis=axis)
    # scale by the max entry so extreme magnitudes neither overflow nor underflow
    m = a.max(axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    return np.squeeze(m, axis=axis) * (((a / safe) ** p).sum(axis=axis)) ** (1.0 / p)


def norm(space: SeqSpace, v) -> float:
    return float(lp_norm(as_vector(space, v), space.p))


def square_function(vs: np.ndarray) -> np.ndarray:
    """Coordinatewise (sum_n |v_n|^2)^(1/2) over the second-to-last axis."""
    vs = np.asarray(vs, dtype=float)
    # scale by the column maximum so tiny or huge entries neither underflow nor overflow
    top = np.max(np.abs(vs), axis=-2) if vs.shape[-2] else np.zeros(vs.shape[:-2] + vs.shape[-1:])
    safe = np.where(top > 0, top, 1.0)
    u = vs / safe[..., None, :]
    return safe * np.sqrt(np.einsum("...nm,...nm->...m", u, u))


def square_function_norm(space: SeqSpace, vs) -> float:
    return float(lp_norm(square_function(as_vectors(space, vs)), space.p))


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """Finite ordered list of matrices T_1..T_N from ``domain`` to ``codomain``.

    ``members`` is stored as a read-only (N, codomain.dim, domain.dim) array.
    """

    domain: SeqSpace
    codomain: SeqSpace
    members: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.array(self.members, dtype=float)
        if m.ndim == 2:
            m = m[None]
        if m.ndim != 3 or m.shape[0] == 0:
            raise ShapeError("members must be a nonempty list of matrices")
        if m.shape[1:] != (self.codomain.dim, self.domain.dim):
            raise ShapeError(
                f"members have shape {m.shape[1:]}, expected "
                f"({self.codomain.dim}, {self.domain.dim})"
            )
        if not np.all(np.isfinite(m)):
            raise DomainError("matrix entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    def __len__(self) -> int:
        return self.members.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorFamily):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.codomain == other.codomain
            and np.array_equal(self.members, other.members)
        )

    __hash__ = None

    @property
    def is_functional(self) -> bool:
        return self.codomain.dim == 1

    def scaled(self, lam: float) -> "OperatorFamily":
        return OperatorFamily(self.domain, self.codomain, lam * self.members, self.name)

    def stacked(self) -> "OperatorFamily":
        """The operator A x = (T_n x)_n into l^inf of the stacked rows, as a singleton family.

        Only norm-preserving when every member maps into l^inf or into the scalars.
        """
        if not (self.codomain.dim == 1 or self.codomain.p is INF):
            raise ContractError("stacking needs scalar or l^inf codomains")
        rows = self.members.reshape(-1, self.domain.dim)
        return OperatorFamily(self.domain, SeqSpace(rows.shape[0], INF), rows[None], self.name)

    def unstacked(self) -> "OperatorFamily":
        """Row functionals of a singleton family."""
        if len(self) != 1:
            raise ContractError("unstacked() needs a single-member family")
        rows = self.members[0]
        return OperatorFamily(self.domain, SeqSpace(1, 1.0), rows[:, None, :], self.name)

    def distinct(self) -> "OperatorFamily":
        """Family with exact duplicate members removed (first occurrence kept)."""
        keep = []
        for i, m in enumerate(self.members):
            if not any(np.array_equal(m, self.members[j]) for j in keep):
                keep.append(i)
        return OperatorFamily(self.domain, self.codomain, self.members[keep], self.name)


def make_family(members, domain_p=INF, codomain_p=INF, name: str = "") -> OperatorFamily:
    m = np.asarray(members, dtype=float)
    if m.ndim == 2:
        m = m[None]
    return OperatorFamily(SeqSpace(m.shape[2], domain_p), SeqSpace(m.shape[1], codomain_p), m, name)


def diagonal_c0_family(a) -> OperatorFamily:
    """Functionals T_n x = a_n x_n on l^inf_N (the truncated c_0 family)."""
    a = np.asarray(a, dtype=float).ravel()
    n = a.shape[0]
    members = np.zeros((n, 1, n))
    members[np.arange(n), 0, np.arange(n)] = a
    return OperatorFamily(SeqSpace(n, INF), SeqSpace(1, 1.0), members, "diag-c0")


def coordinate_family(n: int) -> OperatorFamily:
    """Coordinate functionals T_n x = x_n on l^inf_N."""
    return diagonal_c0_family(np.ones(n))


def embedding_family(n: int) -> OperatorFamily:
    """T_n a = a e_n from R into l^inf_N."""
    members = np.zeros((n, n, 1))
    members[np.arange(n), np.arange(n), 0] = 1.0
    return OperatorFamily(SeqSpace(1, 2.0), SeqSpace(n, INF), members, "embedding")


def apply(family: OperatorFamily, index: int, v) -> np.ndarray:
    if not 0 <= index < len(family):
        raise ShapeError(f"operator index {index} out of range for {len(family)} members")
    return family.members[index] @ as_vector(family.domain, v)


def adjoint_family(family: OperatorFamily) -> OperatorFamily:
    return OperatorFamily(
        family.codomain.dual(),
        family.domain.dual(),
        np.transpose(family.members, (0, 2, 1)),
        family.name,
    )


# Exhaustive vertex enumeration for l^inf domains stays below this many vertices.
_VERTEX_CAP = 2**20


def operator_norm(matrix, domain: SeqSpace, codomain: SeqSpace) -> Optional[float]:
    """Exact operator norm l^p -> l^q where it is computable exactly, else None.

    Exact cases: l^1 domains (max image of a basis vector), l^inf codomains
    (max dual norm of a row), l^2 -> l^2 (largest singular value) and l^inf
    domains of small dimension (max over the sign vertices of the cube).
    """
    m = np.asarray(matrix, dtype=float)
    if not m.any():
        return 0.0
    if domain.p == 1.0:
        return float(lp_norm(m, codomain.p, axis=0).max())
    if codomain.p is INF:
        return float(lp_norm(m, dual_exponent(domain.p), axis=1).max())
    if domain.p == 2.0 and codomain.p == 2.0:
        return float(np.linalg.norm(m, 2))
    if codomain.dim == 1:
        return float(lp_norm(m[0], dual_exponent(domain.p)))
    if domain.p is INF and 2 ** (domain.dim - 1) <= _VERTEX_CAP:
        signs = sign_vertices(domain.dim)
        return float(lp_norm(signs @ m.T, codomain.p, axis=1).max())
    return None


def sign_vertices(d: int) -> np.ndarray:
    """All vectors in {-1, 1}^d with first entry +1, shape (2^(d-1), d)."""
    if d == 1:
        return np.ones((1, 1))
    rest = np.array(list(itertools.product((1.0, -1.0), repeat=d - 1)))
    return np.hstack([np.ones((rest.shape[0], 1)), rest])


@dataclass(frozen=True, eq=False)
class Witness:
    """Operator indices and domain vectors realizing a lower bound.

    For single-operator constants (cotype, summing norms) the indices are all 0.
    """

    op_indices: tuple
    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=float)
        if vecs.ndim != 2:
            raise ShapeError("witness vectors must form a 2-d array")
        idx = tuple(int(i) for i in self.op_indices)
        if len(idx) != vecs.shape[0]:
            raise ShapeError("witness indices and vectors differ in length")
        vecs.setflags(write=False)
        object.__setattr__(self, "op_indices", idx)
        object.__setattr__(self, "vectors", vecs)

    def __len__(self) -> int:
        return len(self.op_indices)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.vectors)

    def scaled(self, lam: float) -> "Witness":
        return Witness(self.op_indices, lam * self.vectors)

    def validate(self, family: OperatorFamily) -> None:
        if self.vectors.shape[1] != family.domain.dim:
            raise ShapeError("witness vectors do not live in the family's domain")
        if any(not 0 <= i < len(family) for i in self.op_indices):
            raise ShapeError("witness operator index out of range")
        if self.is_zero:
            raise DegenerateWitnessError("witness has no nonzero vector")

    def to_dict(self) -> dict:
        return {"op_indices": list(self.op_indices), "vectors": self.vectors.tolist()}


def zero_witness(dim: int) -> Witness:
    return Witness((0,), np.zeros((1, dim)))


@dataclass
class BoundEstimate:
    """A bracket [lower, upper] for one constant.

    ``lower`` is reproduced by re-evaluating ``certificate``; ``upper_source``
    names the analytic formula behind a finite upper, or is "none".
    """

    lower: float
    upper: float
    certificate: Witness
    upper_source: str = "none"
    ci: Optional[tuple] = None  # (half_width, level)
    meta: dict = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        slack = self.ci[0] if self.ci else 0.0
        tol = 1e-9 * max(1.0, abs(self.upper)) if math.isfinite(self.upper) else 0.0
        if self.lower < 0 or self.lower > self.upper + slack + tol:
            raise ValueError(f"inconsistent bracket [{self.lower}, {self.upper}]")

    @property
    def closed(self) -> bool:
        return math.isfinite(self.upper) and self.upper - self.lower <= 1e-12 * max(1.0, self.upper)

    def to_dict(self) -> dict:
        out = {
            "lower": self.lower,
            "upper": self.upper if math.isfinite(self.upper) else "inf",
            "upper_source": self.upper_source,
            "certificate": self.certificate.to_dict(),
            "degenerate": self.degenerate,
            "meta": dict(self.meta),
        }
        if self.ci is not None:
            out["ci"] = {"half_width": self.ci[0], "level": self.ci[1]}
        return out


# -- family interchange format ---------------------------------------------


def family_to_dict(family: OperatorFamily) -> dict:
    d = {
        "domain": {"dim": family.domain.dim, "p": exponent_to_json(family.domain.p)},
        "codomain": {"dim": family.codomain.dim, "p": exponent_to_json(family.codomain.p)},
        "members": family.members.tolist(),
    }
    if family.name:
        d["name"] = family.name
    return d


def family_from_dict(d: dict) -> OperatorFamily:
    try:
        domain = SeqSpace(d["domain"]["dim"], d["domain"]["p"])
        codomain = SeqSpace(d["codomain"]["dim"], d["codomain"]["p"])
        members = d["members"]
    except (KeyError, TypeError) as exc:
        raise ShapeError(f"malformed family document: missing {exc}") from exc
    try:
        members = np.asarray(members, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ShapeError(f"members are not a rectangular numeric array: {exc}") from exc
    if members.ndim != 3:
        raise ShapeError("members must be a list of row-major matrices")
    return OperatorFamily(domain, codomain, members, str(d.get("name", "")))


def dumps_family(family: OperatorFamily) -> str:
    # json emits repr-exact floats, so values round-trip bit for bit
    return json.dumps(family_to_dict(family), sort_keys=True)


def loads_family(text: str) -> OperatorFamily:
    return family_from_dict(json.loads(text))


def load_family(path) -> OperatorFamily:
    with open(path, encoding="utf-8") as fh:
        return loads_family(fh.read())


def save_family(family: OperatorFamily, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_family(family))
        fh.write("\n")


def check_family(family) -> OperatorFamily:
    """Validation helper: accept an OperatorFamily or a JSON-like dict."""
    if isinstance(family, OperatorFamily):
        return family
    if isinstance(family, dict):
        return family_from_dict(family)
    if isinstance(family, (np.ndarray, list, tuple)):
        return make_family(family)
    raise TypeError(f"cannot interpret {type(family).__name__} as an operator family")


def norming_vector(matrix, domain: SeqSpace, codomain: SeqSpace) -> Optional[np.ndarray]:
    """A unit vector x with ||M x|| = ||M||, in the cases ``operator_norm`` handles."""
    m = np.asarray(matrix, dtype=float)
    d = domain.dim
    if not m.any():
        return np.eye(d)[0]
    if domain.p == 1.0:
        return np.eye(d)[int(np.argmax(lp_norm(m, codomain.p, axis=0)))]
    if codomain.p is INF or codomain.dim == 1:
        q = dual_exponent(domain.p)
        row = m[int(np.argmax(lp_norm(m, q, axis=1)))]
        if domain.p is INF:
            x = np.where(row >= 0, 1.0, -1.0)
        else:
            x = np.sign(row) * np.abs(row) ** (q - 1.0)
        return x / lp_norm(x, domain.p)
    if domain.p == 2.0 and codomain.p == 2.0:
        return np.linalg.svd(m)[2][0]
    if domain.p is INF and 2 ** (d - 1) <= _VERTEX_CAP:
        signs = sign_vertices(d)
        return signs[int(np.argmax(lp_norm(signs @ m.T, codomain.p, axis=1)))]
    return None


def disjoint_supports(vs: np.ndarray) -> bool:
    """True when no coordinate is nonzero in more than one vector."""
    return bool(((vs != 0).sum(axis=0) <= 1).all())
