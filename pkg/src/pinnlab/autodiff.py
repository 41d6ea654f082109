"""Scalar-tape reverse-mode automatic differentiation with nesting.

Expressions are recorded as an append-only tape of scalar nodes.  The
backward pass appends its adjoint arithmetic to the same tape, so the
result of differentiation is itself differentiable: input derivatives of a
network (d/dx, d2/dx2, ...) are obtained by repeated backward passes, and a
further pass yields parameter gradients of those derivatives.

Every node value is rounded through the active precision when it is
created, so replaying a tape under an emulated format is bit-deterministic
round-after-op arithmetic.
"""

from __future__ import annotations

import math

from .precision import FP64, PrecisionSpec

# Op codes.  Unary ops leave parent b at -1.
CONST, VAR, ADD, SUB, MUL, DIV, POW_INT, SIN, COS, EXP, TANH, NEG = range(12)

OP_NAMES = ["const", "var", "add", "sub", "mul", "div", "pow_int",
            "sin", "cos", "exp", "tanh", "neg"]


class Ref:
    """Handle to one tape node; supports operator-overloaded recording."""

    __slots__ = ("tape", "i")

    def __init__(self, tape: "Tape", i: int):
        self.tape = tape
        self.i = i

    @property
    def value(self) -> float:
        return self.tape.val[self.i]

    def _coerce(self, other) -> "Ref":
        if isinstance(other, Ref):
            if other.tape is not self.tape:
                raise ValueError("mixing nodes from different tapes")
            return other
        return self.tape.const(float(other))

    def __add__(self, o):
        return self.tape._emit(ADD, self.i, self._coerce(o).i)

    def __radd__(self, o):
        return self._coerce(o).__add__(self)

    def __sub__(self, o):
        return self.tape._emit(SUB, self.i, self._coerce(o).i)

    def __rsub__(self, o):
        return self._coerce(o).__sub__(self)

    def __mul__(self, o):
        return self.tape._emit(MUL, self.i, self._coerce(o).i)

    def __rmul__(self, o):
        return self._coerce(o).__mul__(self)

    def __truediv__(self, o):
        return self.tape._emit(DIV, self.i, self._coerce(o).i)

    def __rtruediv__(self, o):
        return self._coerce(o).__truediv__(self)

    def __neg__(self):
        return self.tape._emit(NEG, self.i)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 1:
            raise ValueError("only positive integer powers are supported")
        return self.tape._emit(POW_INT, self.i, aux=n)

    def sin(self):
        return self.tape._emit(SIN, self.i)

    def cos(self):
        return self.tape._emit(COS, self.i)

    def exp(self):
        return self.tape._emit(EXP, self.i)

    def tanh(self):
        return self.tape._emit(TANH, self.i)


def sin(r: Ref) -> Ref:
    return r.sin()


def cos(r: Ref) -> Ref:
    return r.cos()


def exp(r: Ref) -> Ref:
    return r.exp()


def tanh(r: Ref) -> Ref:
    return r.tanh()


_UNARY_EVAL = {
    SIN: math.sin,
    COS: math.cos,
    EXP: math.exp,
    TANH: math.tanh,
    NEG: lambda a: -a,
}


class Tape:
    """Append-only scalar expression tape.

    Parents always precede a node, so value evaluation is a single forward
    sweep and adjoint propagation a single reverse sweep.
    """

    def __init__(self, precision: PrecisionSpec = FP64):
        self.precision = precision
        self.op: list[int] = []
        self.pa: list[int] = []
        self.pb: list[int] = []
        self.aux: list[int] = []
        self.val: list[float] = []
        self._rounds = precision.name != "fp64"

    def __len__(self) -> int:
        return len(self.op)

    def _emit(self, op: int, a: int = -1, b: int = -1, aux: int = 0,
              value: float | None = None) -> Ref:
        if value is None:
            value = self._eval(op, a, b, aux)
        if self._rounds:
            value = self.precision.round_scalar(value)
        self.op.append(op)
        self.pa.append(a)
        self.pb.append(b)
        self.aux.append(aux)
        self.val.append(value)
        return Ref(self, len(self.op) - 1)

    def _eval(self, op: int, a: int, b: int, aux: int) -> float:
        v = self.val
        if op == ADD:
            return v[a] + v[b]
        if op == SUB:
            return v[a] - v[b]
        if op == MUL:
            return v[a] * v[b]
        if op == DIV:
            return v[a] / v[b]
        if op == POW_INT:
            return v[a] ** aux
        f = _UNARY_EVAL.get(op)
        if f is None:
            raise ValueError(f"cannot evaluate op {OP_NAMES[op]}")
        return f(v[a])

    def const(self, value: float) -> Ref:
        return self._emit(CONST, value=float(value))

    def var(self, value: float) -> Ref:
        v = float(value)
        if self._rounds:
            v = self.precision.round_scalar(v)
        return self._emit(VAR, value=v)

    def backward(self, out: Ref, wrt: list[Ref]) -> list[Ref]:
        """Append adjoint arithmetic for d(out)/d(wrt_j); returns refs.

        Only nodes recorded before the call participate as differentiation
        targets; the adjoint nodes this pass appends are themselves ordinary
        tape nodes, so the returned derivatives can be differentiated again.
        """
        if out.tape is not self:
            raise ValueError("output ref belongs to a different tape")
        n = out.i + 1
        adj: list[Ref | None] = [None] * n
        adj[out.i] = self.const(1.0)

        def acc(idx: int, contrib: Ref):
            if idx >= n:
                return
            cur = adj[idx]
            adj[idx] = contrib if cur is None else cur + contrib

        for i in range(out.i, -1, -1):
            a_bar = adj[i]
            if a_bar is None:
                continue
            op, a, b, aux = self.op[i], self.pa[i], self.pb[i], self.aux[i]
            node = Ref(self, i)
            if op in (CONST, VAR):
                continue
            if op == ADD:
                acc(a, a_bar)
                acc(b, a_bar)
            elif op == SUB:
                acc(a, a_bar)
                acc(b, -a_bar)
            elif op == MUL:
                acc(a, a_bar * Ref(self, b))
                acc(b, a_bar * Ref(self, a))
            elif op == DIV:
                rb = Ref(self, b)
                acc(a, a_bar / rb)
                acc(b, -(a_bar * node) / rb)
            elif op == POW_INT:
                ra = Ref(self, a)
                if aux == 1:
                    acc(a, a_bar)
                elif aux == 2:
                    acc(a, a_bar * (2.0 * ra))
                else:
                    acc(a, a_bar * (float(aux) * ra ** (aux - 1)))
            elif op == SIN:
                acc(a, a_bar * Ref(self, a).cos())
            elif op == COS:
                acc(a, -(a_bar * Ref(self, a).sin()))
            elif op == EXP:
                acc(a, a_bar * node)
            elif op == TANH:
                acc(a, a_bar * (1.0 - node * node))
            elif op == NEG:
                acc(a, -a_bar)
            else:
                raise ValueError(f"no adjoint rule for op {OP_NAMES[op]}")

        zero = None
        out_refs = []
        for w in wrt:
            if w.i >= n or adj[w.i] is None:
                if zero is None:
                    zero = self.const(0.0)
                out_refs.append(zero)
            else:
                out_refs.append(adj[w.i])
        return out_refs


class AdTape:
    """A recorded scalar function together with its distinguished inputs.

    input_refs are the coordinate variables (x, t), param_refs the network
    parameters theta, and output the single scalar terminal.
    """

    def __init__(self, tape: Tape, input_refs: list[Ref],
                 param_refs: list[Ref], output: Ref):
        self.tape = tape
        self.input_refs = input_refs
        self.param_refs = param_refs
        self.output = output

    @property
    def value(self) -> float:
        return self.output.value


def record(f, inputs, params=(), precision: PrecisionSpec = FP64) -> AdTape:
    """Record f(*input_refs, *param_refs) on a fresh tape.

    f must build its result from the supplied refs using the supported
    primitives; anything else raises during construction.
    """
    tape = Tape(precision)
    in_refs = [tape.var(v) for v in inputs]
    par_refs = [tape.var(v) for v in params]
    out = f(*in_refs, *par_refs)
    if not isinstance(out, Ref):
        raise TypeError("recorded function must return a tape node")
    return AdTape(tape, in_refs, par_refs, out)


def grad(rec: AdTape, wrt: list[Ref] | None = None) -> list[float]:
    """Gradient of the recorded scalar with respect to wrt (default: the
    recorded parameter variables)."""
    targets = rec.param_refs if wrt is None else wrt
    refs = rec.tape.backward(rec.output, targets)
    return [r.value for r in refs]


_DERIV_SPECS = {"dx": (0, 1), "dt": (1, 1), "dxx": (0, 2), "dtt": (1, 2)}


def derivative_ref(rec: AdTape, which: str) -> Ref:
    """Tape node for an input derivative of the recorded function.

    which is one of dx, dt, dxx, dtt.  The returned ref lives on the same
    tape, so it can feed further arithmetic (residuals) and be
    differentiated with respect to the parameters afterwards.
    """
    try:
        coord, order = _DERIV_SPECS[which]
    except KeyError:
        raise ValueError(f"unsupported derivative {which!r}; expected one of "
                         f"{sorted(_DERIV_SPECS)}") from None
    ref = rec.output
    for _ in range(order):
        (ref,) = rec.tape.backward(ref, [rec.input_refs[coord]])
    return ref


def input_derivative(u, point, which: str, params=(),
                     precision: PrecisionSpec = FP64) -> float:
    """Derivative of u(x, t; params) with respect to the inputs at a point.

    u is an expression builder taking (x_ref, t_ref, *param_refs); orders
    above 2 are not supported.
    """
    rec = record(u, list(point), params, precision)
    return derivative_ref(rec, which).value
