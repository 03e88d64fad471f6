"""Forward-mode dual numbers.

Two layers are used throughout the package:

``Jet``
    Multivariate dual number truncated at second order (the flat storage of a
    dual-of-dual, a.k.a. hyper-dual number).  Model component functions are
    evaluated on jets seeded with the chart coordinates, which yields

    value, gradient and Hessian exactly up to rounding.

``TensorJet``
    First-order dual *arrays*: a tensor value together with its four partial
    derivatives.  Derived fields (Christoffel symbols, kinematical invariants,
    the one-form rho ...) are assembled from jets of ``g``, ``dg``, ``V`` and
    ``dV`` so that their exterior derivatives come out of the same pass.

Both types carry an arbitrary leading batch shape so a whole grid of events is
evaluated in one call.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Jet",
    "TensorJet",
    "seed",
    "exp",
    "log",
    "sqrt",
    "sin",
    "cos",
    "sinh",
    "cosh",
    "tanh",
    "jeinsum",
]


class Jet:
    """Truncated Taylor number ``v + d.e + 1/2 e.dd.e`` in ``n`` variables.

    ``v`` has the batch shape ``B``; ``d`` has shape ``B + (n,)``; ``dd`` has
    shape ``B + (n, n)`` or is ``None`` when only first derivatives are
    tracked.
    """

    __slots__ = ("v", "d", "dd")
    __array_priority__ = 1000

    def __init__(self, v, d, dd=None):
        self.v = v
        self.d = d
        self.dd = dd

    @property
    def order(self) -> int:
        return 1 if self.dd is None else 2

    def _lift(self, other):
        c = np.asarray(other, dtype=float)
        return c

    def __add__(self, other):
        if isinstance(other, Jet):
            dd = None if self.dd is None or other.dd is None else self.dd + other.dd
            return Jet(self.v + other.v, self.d + other.d, dd)
        c = self._lift(other)
        return Jet(self.v + c, self.d + np.zeros_like(c)[..., None], self.dd)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d, None if self.dd is None else -self.dd)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            v = self.v * other.v
            a = np.asarray(self.v)[..., None]
            b = np.asarray(other.v)[..., None]
            d = a * other.d + b * self.d
            dd = None
            if self.dd is not None and other.dd is not None:
                cross = self.d[..., :, None] * other.d[..., None, :]
                dd = a[..., None] * other.dd + b[..., None] * self.dd + cross + np.swapaxes(cross, -1, -2)
            return Jet(v, d, dd)
        c = self._lift(other)
        return Jet(
            self.v * c,
            self.d * c[..., None],
            None if self.dd is None else self.dd * c[..., None, None],
        )

    __rmul__ = __mul__

    def _unary(self, f0, f1, f2):
        """Chain rule with derivative values ``f1 = f'(v)``, ``f2 = f''(v)``."""
        f1 = np.asarray(f1)
        d = f1[..., None] * self.d
        dd = None
        if self.dd is not None:
            f2 = np.asarray(f2)
            dd = f1[..., None, None] * self.dd + f2[..., None, None] * (
                self.d[..., :, None] * self.d[..., None, :]
            )
        return Jet(f0, d, dd)

    def reciprocal(self):
        inv = 1.0 / self.v
        return self._unary(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / self._lift(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        p = float(p)
        if p == 2.0:
            return self * self
        v = self.v
        return self._unary(v**p, p * v ** (p - 1.0), p * (p - 1.0) * v ** (p - 2.0))

    def __rpow__(self, base):
        return exp(self * np.log(base))

    def __repr__(self) -> str:
        return f"Jet(v={self.v!r}, d={self.d!r}, order={self.order})"


def seed(x, order: int = 2) -> list[Jet]:
    """Independent-variable jets for the coordinates ``x[..., i]``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    batch = x.shape[:-1]
    eye = np.eye(n)
    jets = []
    for i in range(n):
        d = np.broadcast_to(eye[i], batch + (n,)).copy()
        dd = np.zeros(batch + (n, n)) if order >= 2 else None
        jets.append(Jet(x[..., i].copy(), d, dd))
    return jets


def _dispatch(name, f0, f1, f2):
    def fn(x):
        if isinstance(x, Jet):
            v = x.v
            return x._unary(f0(v), f1(v), f2(v) if x.dd is not None else None)
        return f0(np.asarray(x, dtype=float))

    fn.__name__ = name
    fn.__doc__ = f"``{name}`` for floats, arrays and jets."
    return fn


exp = _dispatch("exp", np.exp, np.exp, np.exp)
log = _dispatch("log", np.log, lambda v: 1.0 / v, lambda v: -1.0 / (v * v))
sqrt = _dispatch(
    "sqrt", np.sqrt, lambda v: 0.5 / np.sqrt(v), lambda v: -0.25 / (v * np.sqrt(v))
)
sin = _dispatch("sin", np.sin, np.cos, lambda v: -np.sin(v))
cos = _dispatch("cos", np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))
sinh = _dispatch("sinh", np.sinh, np.cosh, np.sinh)
cosh = _dispatch("cosh", np.cosh, np.sinh, np.cosh)
tanh = _dispatch(
    "tanh",
    np.tanh,
    lambda v: 1.0 / np.cosh(v) ** 2,
    lambda v: -2.0 * np.tanh(v) / np.cosh(v) ** 2,
)


class TensorJet:
    """Tensor field value with its first partial derivatives.

    ``val`` has shape ``B + S``; ``der`` has shape ``(n,) + B + S`` with the
    derivative index in front, so ellipsis einsum broadcasting over the batch
    also broadcasts over the derivative axis.
    """

    __slots__ = ("val", "der")

    def __init__(self, val, der):
        self.val = np.asarray(val)
        self.der = np.asarray(der)

    @classmethod
    def constant(cls, val, n: int = 4) -> "TensorJet":
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros((n,) + val.shape))

    def __add__(self, other):
        if isinstance(other, TensorJet):
            return TensorJet(self.val + other.val, self.der + other.der)
        return TensorJet(self.val + other, self.der)

    __radd__ = __add__

    def __neg__(self):
        return TensorJet(-self.val, -self.der)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TensorJet):
            return TensorJet(self.val * other.val, self.der * other.val + self.val * other.der)
        other = np.asarray(other)
        return TensorJet(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TensorJet):
            inv = 1.0 / other.val
            return self * TensorJet(inv, -other.der * inv * inv)
        return self * (1.0 / np.asarray(other))

    def transpose(self) -> "TensorJet":
        """Swap the last two tensor indices."""
        return TensorJet(np.swapaxes(self.val, -1, -2), np.swapaxes(self.der, -1, -2))

    @property
    def T(self) -> "TensorJet":
        return self.transpose()

    def expand(self, axis: int) -> "TensorJet":
        """Insert a tensor axis counted from the right (``axis < 0``)."""
        return TensorJet(np.expand_dims(self.val, axis), np.expand_dims(self.der, axis))

    def exterior(self) -> np.ndarray:
        """``(d alpha)_ab = d_a alpha_b - d_b alpha_a`` for a covector jet.

        Returns an array of shape ``B + (n, n)``.
        """
        grad = np.moveaxis(self.der, 0, -2)  # B + (a, b) with a the derivative index
        return grad - np.swapaxes(grad, -1, -2)

    def gradient(self) -> np.ndarray:
        """Partial derivatives with the derivative index moved last."""
        return np.moveaxis(self.der, 0, -1)


def jeinsum(subscripts: str, *operands) -> TensorJet:
    """``np.einsum`` over tensor jets with the product rule.

    Operands that are plain arrays are treated as constants.  Subscripts must
    use a leading ellipsis for the batch axes in every operand.
    """
    jets = [op if isinstance(op, TensorJet) else None for op in operands]
    vals = [op.val if isinstance(op, TensorJet) else np.asarray(op) for op in operands]
    val = np.einsum(subscripts, *vals)
    der = None
    for i, jet in enumerate(jets):
        if jet is None:
            continue
        args = list(vals)
        args[i] = jet.der
        term = np.einsum(subscripts, *args)
        der = term if der is None else der + term
    if der is None:
        der = np.zeros((4,) + val.shape)
    elif der.shape[1:] != val.shape:
        der = np.broadcast_to(der, (der.shape[0],) + val.shape).copy()
    return TensorJet(val, der)
