"""Rewriting of operator expressions containing ``D^{-1}``.

An entry of a :class:`NonlocalExpression` is a sum of *chains*
``(X_0, X_1, ..., X_k)`` of scalar differential operators, read as

    X_0 o D^{-1} o X_1 o D^{-1} o ... o D^{-1} o X_k .

A chain of length one is a local operator.  :func:`normalize` brings each
entry to *flanked form*: a local operator plus chains ``(a, b)`` of two
functions.  The rules are

R1  ``D^{-1} o D = D o D^{-1} = id`` (exact divisions at compose time);
R2  an outer or middle factor of positive order is divided by ``D`` and
    the quotient absorbed, leaving a zero-order remainder;
R3  ``D^{-1} o D(g) o D^{-1} = g o D^{-1} - D^{-1} o g`` for an exact
    zero-order middle factor;
R4  (see :func:`collect`) flanked terms are gathered into the localizable
    tail ``Phi^i D^{-1} V^j + V^i D^{-1} Phi^j``.

Flanked chains of depth ``k`` are handled as elements of the tensor
product of ``k + 1`` copies of the jet algebra, realised as a jet space
with ``(k + 1) N`` fields.  Rule R3 becomes: a tensor exact in a middle
copy with witness ``G`` is replaced by ``G`` with that copy identified
with its left neighbour minus ``G`` with it identified with its right
neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .algebra import (DiffOp, DiffPoly, JetSpace, _acc, _clean, _merge_jets, term_sort_key,
                      variational_derivative, witness)
from .coefficients import Coefficient
from .division import series_quotient
from .errors import DepthExceeded, IrreducibleNonlocal, ShapeError
from .operators import LocalOperator, WNLOperator

__all__ = ["NonlocalExpression", "compose", "normalize", "collect", "adjoint", "MAX_DEPTH"]

#: Maximal number of ``D^{-1}`` factors in one chain.
MAX_DEPTH = 3


def _is_zero_order(op: DiffOp) -> bool:
    return all(s == 0 for s in op.coeffs)


def _absorb(chain: tuple) -> tuple | None:
    """Apply exact ``D^{-1} D`` cancellations (rule R1) to one chain."""
    changed = True
    while changed and len(chain) > 1:
        changed = False
        for m in range(1, len(chain)):
            left, right = chain[m - 1], chain[m]
            if left.is_zero() or right.is_zero():
                return None
            if left.coeffs and 0 not in left.coeffs:
                y, _ = left.divide_right()
                chain = chain[:m - 1] + (y.compose(right),) + chain[m + 1:]
                changed = True
                break
            if right.order() >= 1:
                z, b = right.divide_left()
                if b.is_zero():
                    chain = chain[:m - 1] + (left.compose(z),) + chain[m + 1:]
                    changed = True
                    break
    if any(x.is_zero() for x in chain):
        return None
    return chain


@dataclass(frozen=True)
class NonlocalExpression:
    """Matrix of sums of chains ``X_0 D^{-1} X_1 ... D^{-1} X_k``."""

    space: JetSpace
    entries: tuple  # tuple of rows; each entry is a tuple of chains

    @property
    def size(self) -> int:
        return len(self.entries)

    @classmethod
    def from_chains(cls, space: JetSpace, entries) -> "NonlocalExpression":
        rows = []
        for row in entries:
            rows.append(tuple(tuple(tuple(c) for c in entry) for entry in row))
        return cls(space, tuple(rows))

    @classmethod
    def scalar(cls, space: JetSpace, *chains) -> "NonlocalExpression":
        return cls.from_chains(space, [[list(chains)]])

    @classmethod
    def dinv(cls, space: JetSpace) -> "NonlocalExpression":
        one = DiffOp.identity(space)
        return cls.scalar(space, (one, one))

    @classmethod
    def from_local(cls, P) -> "NonlocalExpression":
        if isinstance(P, DiffOp):
            return cls.scalar(P.space, (P,))
        if isinstance(P, LocalOperator):
            return cls.from_chains(P.space, [[[(e,)] if e.coeffs else [] for e in row]
                                             for row in P.entries])
        raise TypeError(type(P).__name__)

    @classmethod
    def from_wnl(cls, P: WNLOperator) -> "NonlocalExpression":
        sp = P.space
        n = P.size
        rows = []
        flank = P.flank_vector()
        for i in range(n):
            row = []
            for j in range(n):
                entry = []
                e = P.local.entries[i][j]
                if e.coeffs:
                    entry.append((e,))
                if P.V is not None:
                    for a, b in ((flank[i], P.V[j]), (P.V[i], flank[j])):
                        if a.terms and b.terms:
                            entry.append((DiffOp.mult(a), DiffOp.mult(b)))
                row.append(entry)
            rows.append(row)
        return cls.from_chains(sp, rows)

    def depth(self) -> int:
        return max((len(c) - 1 for row in self.entries for e in row for c in e), default=0)

    def __add__(self, other: "NonlocalExpression") -> "NonlocalExpression":
        return NonlocalExpression(self.space, tuple(
            tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)))

    def __neg__(self) -> "NonlocalExpression":
        return NonlocalExpression(self.space, tuple(
            tuple(tuple((-c[0],) + c[1:] for c in e) for e in row) for row in self.entries))

    def __sub__(self, other):
        return self + (-other)

    def left_mul(self, f: DiffPoly) -> "NonlocalExpression":
        """Multiply every entry on the left by the function ``f``."""
        return NonlocalExpression(self.space, tuple(
            tuple(tuple((c[0].left_mul(f),) + c[1:] for c in e) for e in row)
            for row in self.entries))

    def compose(self, other: "NonlocalExpression") -> "NonlocalExpression":
        return compose(self, other)

    def adjoint(self) -> "NonlocalExpression":
        return adjoint(self)

    def apply(self, psi: Sequence[DiffPoly]) -> tuple[DiffPoly, ...]:
        """Apply to a vector of functions; every ``D^{-1}`` needs a witness."""
        out = []
        for row in self.entries:
            acc = self.space.zero
            for entry, f in zip(row, psi):
                for chain in entry:
                    g = chain[-1].apply(f)
                    for X in reversed(chain[:-1]):
                        w = witness(g) if g.terms else self.space.zero
                        if w is None:
                            raise IrreducibleNonlocal(f"D^{{-1}} of {g} has no witness")
                        g = X.apply(w)
                    acc = acc + g
            out.append(acc)
        return tuple(out)

    def __str__(self) -> str:
        return format_expression(self)


def format_chain(chain) -> str:
    return " o Dinv o ".join(f"({x})" for x in chain)


def format_expression(E: NonlocalExpression) -> str:
    lines = []
    for i, row in enumerate(E.entries):
        for j, entry in enumerate(row):
            text = " + ".join(format_chain(c) for c in entry) or "0"
            lines.append(f"[{i + 1}][{j + 1}] = {text}")
    return "\n".join(lines)


def compose(A: NonlocalExpression, B: NonlocalExpression) -> NonlocalExpression:
    """Composition with chains concatenated and exact ``D^{-1} D`` pairs cancelled."""
    n = A.size
    rows = []
    for i in range(n):
        row = []
        for j in range(B.size):
            entry = []
            for k in range(n):
                for ca in A.entries[i][k]:
                    for cb in B.entries[k][j]:
                        chain = ca[:-1] + (ca[-1].compose(cb[0]),) + cb[1:]
                        chain = _absorb(chain)
                        if chain is None:
                            continue
                        if len(chain) - 1 > MAX_DEPTH:
                            raise DepthExceeded(f"more than {MAX_DEPTH} inverse derivatives")
                        entry.append(chain)
            row.append(tuple(entry))
        rows.append(tuple(row))
    return NonlocalExpression(A.space, tuple(rows))


def adjoint(E: NonlocalExpression) -> NonlocalExpression:
    """Formal adjoint, using ``(D^{-1})^* = -D^{-1}``."""
    n = E.size
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            entry = []
            for chain in E.entries[j][i]:
                k = len(chain) - 1
                new = tuple(x.adjoint() for x in reversed(chain))
                if k & 1:
                    new = (-new[0],) + new[1:]
                entry.append(new)
            row.append(tuple(entry))
        rows.append(tuple(row))
    return NonlocalExpression(E.space, tuple(rows))


# -- tensor products of jet spaces -------------------------------------------

def tensor_space(space: JetSpace, copies: int) -> JetSpace:
    return JetSpace(space.n * copies, space.eps_order)


def relabel(f: DiffPoly, target: JetSpace, fmap: Sequence[int]) -> DiffPoly:
    """Rename field ``i`` of ``f`` to ``fmap[i-1]`` in ``target`` (even input only)."""
    d: dict = {}
    ring = target.ring
    for key, c in f.terms.items():
        if key[2] or key[3]:
            raise ValueError("relabel is defined for even functions only")
        jets = ()
        for (i, s, p) in key[1]:
            jets = _merge_jets(jets, ((fmap[i - 1], s, p),))
        _acc(d, (key[0], jets, (), 0), c.embed(ring, fmap))
    return DiffPoly(target, _clean(d), False)


def _copy_map(n: int, copy: int) -> list[int]:
    return [copy * n + i for i in range(1, n + 1)]


def chain_tensor(chain: Sequence[DiffPoly], base: JetSpace) -> DiffPoly:
    T = tensor_space(base, len(chain))
    out = T.one
    for m, f in enumerate(chain):
        out = out * relabel(f, T, _copy_map(base.n, m))
    return out


def merge_copy(t: DiffPoly, base: JetSpace, copies: int, src: int, dst: int) -> DiffPoly:
    """Identify copy ``src`` with copy ``dst`` and drop ``src``."""
    n = base.n
    target = tensor_space(base, copies - 1)
    order = [c for c in range(copies) if c != src]
    newpos = {c: k for k, c in enumerate(order)}
    newpos[src] = newpos[dst]
    fmap = []
    for c in range(copies):
        for i in range(1, n + 1):
            fmap.append(newpos[c] * n + i)
    return relabel(t, target, fmap)


def copy_fields(base: JetSpace, copy: int) -> list[int]:
    return _copy_map(base.n, copy)


def tensor_to_chains(t: DiffPoly, base: JetSpace) -> list[tuple[DiffPoly, DiffPoly]]:
    """Write a two-copy tensor as a canonical sum ``sum_k a_k (x) b_k``."""
    n = base.n
    ring = base.ring
    groups: dict = {}
    dens: dict = {}
    for key, c in t.terms.items():
        jets0 = tuple((i, s, p) for (i, s, p) in key[1] if i <= n)
        jets1 = tuple((i - n, s, p) for (i, s, p) in key[1] if i > n)
        den0, den1 = _split_denominator(c, n)
        for exps, q in c.num.to_dict().items():
            e0, e1 = exps[:n], exps[n:]
            num0 = ring.ctx.from_dict({tuple(e0): q})
            b_key = (jets1, tuple(e1), tuple(sorted(den1.to_dict().items())))
            dens[b_key] = den1
            a_term = (key[0], jets0, (), 0)
            coef0 = Coefficient(ring, num0, den0)
            bucket = groups.setdefault(b_key, {})
            _acc(bucket, a_term, coef0)
    out = []
    for b_key, bucket in sorted(groups.items(), key=lambda kv: kv[0]):
        jets1, e1, _ = b_key
        den1 = dens[b_key]
        a = DiffPoly(base, _clean(bucket), False)
        if a.is_zero():
            continue
        num1 = ring.ctx.from_dict({e1: 1})
        b = base.monomial(Coefficient(ring, num1, den1), (0, jets1, (), 0))
        out.append((a, b))
    return out


def _split_denominator(c: Coefficient, n: int):
    """Factor a denominator depending on two copies into its two parts."""
    small = _base_ring(n)
    den = c.den
    if den.is_one():
        return small._pone, small._pone
    const, factors = den.factor()
    d0 = small._pone
    d1 = small._pone
    gens = small.ctx.gens()
    zero = small.ctx.constant(0)
    for f, e in factors:
        degs = f.degrees()
        in0 = any(degs[:n])
        in1 = any(degs[n:])
        if in0 and in1:
            raise ShapeError("coefficient does not split into a tensor product")
        if in1:
            d1 = d1 * f.compose(*([zero] * n), *gens, ctx=small.ctx) ** e
        else:
            d0 = d0 * f.compose(*gens, *([zero] * n), ctx=small.ctx) ** e
    # the constant factor is absorbed into copy 0
    if const != 1:
        d0 = d0 * const
    return d0, d1


def _base_ring(n: int):
    from .coefficients import coefficient_ring
    return coefficient_ring(n)


# -- normalisation -------------------------------------------------------------

def _reduce_outer(chains, trace) -> tuple[DiffOp, dict[int, list]]:
    """Rules R1/R2 until every chain is flanked; returns (local, depth -> chains)."""
    local = None
    flanked: dict[int, list] = {}
    work = [c for c in chains]
    while work:
        chain = work.pop()
        if any(x.is_zero() for x in chain):
            continue
        k = len(chain) - 1
        if k == 0:
            local = chain[0] if local is None else local + chain[0]
            continue
        X0, Xk = chain[0], chain[-1]
        if X0.order() >= 1:
            y, a = X0.divide_right()
            if trace is not None:
                trace.append("R2-right")
            if not y.is_zero():
                work.append((y.compose(chain[1]),) + chain[2:])
            if not a.is_zero():
                work.append((DiffOp.mult(a),) + chain[1:])
            continue
        if Xk.order() >= 1:
            z, b = Xk.divide_left()
            if trace is not None:
                trace.append("R2-left")
            if not z.is_zero():
                work.append(chain[:-2] + (chain[-2].compose(z),))
            if not b.is_zero():
                work.append(chain[:-1] + (DiffOp.mult(b),))
            continue
        for m in range(1, k):
            Xm = chain[m]
            if Xm.order() >= 1:
                z, b = Xm.divide_left()
                if trace is not None:
                    trace.append("R2-middle")
                if not z.is_zero():
                    work.append(chain[:m - 1] + (chain[m - 1].compose(z),) + chain[m + 1:])
                if not b.is_zero():
                    work.append(chain[:m] + (DiffOp.mult(b),) + chain[m + 1:])
                break
        else:
            flanked.setdefault(k, []).append(tuple(x.coeff(0) for x in chain))
    if local is None:
        local = DiffOp.zero(chains[0][0].space) if chains else None
    return local, flanked


def _r3_chain(chain, base, trace):
    """Try rule R3 on a single flanked chain; returns lower chains or None."""
    k = len(chain) - 1
    for m in range(1, k):
        g = witness(chain[m])
        if g is not None:
            if trace is not None:
                trace.append("R3")
            left = chain[:m - 1] + (chain[m - 1] * g,) + chain[m + 1:]
            right = chain[:m] + (g * chain[m + 1],) + chain[m + 2:]
            return [left, (-right[0],) + right[1:]]
    return None


def _monic(f: DiffPoly) -> tuple[Fraction, DiffPoly]:
    """Split off a rational constant so that equal-up-to-scale factors coincide."""
    key = min(f.terms, key=term_sort_key)
    c = f.terms[key]
    lead = c.num.leading_coefficient()
    q = Fraction(int(lead.p), int(lead.q))
    return q, f.scale(1 / q)


def _r3_grouped(chains: list, k: int, trace) -> tuple[list, list]:
    """Rule R3 on sums of chains that differ only in one middle factor."""
    chains = list(chains)
    lower_all: list = []
    for m in range(1, k):
        groups: dict = {}
        order: list = []
        for chain in chains:
            scale = Fraction(1)
            factors = []
            for f in chain:
                q, g = _monic(f)
                scale *= q
                factors.append(g)
            key = tuple(factors[:m] + factors[m + 1:])
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append((scale, factors[m], chain))
        rest = []
        for key in order:
            members = groups[key]
            if len(members) == 1:
                rest.append(members[0][2])
                continue
            total = members[0][1].scale(members[0][0])
            for sc, f, _ in members[1:]:
                total = total + f.scale(sc)
            if total.is_zero():
                if trace is not None:
                    trace.append("cancel")
                continue
            g = witness(total)
            if g is None:
                rest.extend(c for _, _, c in members)
                continue
            if trace is not None:
                trace.append("R3-group")
            outer = list(key)
            left = tuple(outer[:m - 1]) + (outer[m - 1] * g,) + tuple(outer[m:])
            right = tuple(outer[:m]) + (g * outer[m],) + tuple(outer[m + 1:])
            lower_all.extend([left, (-right[0],) + right[1:]])
        chains = rest
    return chains, lower_all


def _exactness_rows(fs: list, base: JetSpace) -> list[dict]:
    """Rational vectors whose linear relations are the exact combinations of ``fs``.

    ``f`` is a total derivative iff all ``delta_{u^i} f`` and its numeric
    constant part vanish, and both are linear over the rationals.
    """
    parts = []
    for f in fs:
        comps = [variational_derivative(f, "u", i) for i in range(1, base.n + 1)]
        const = {k: c for k, c in f.terms.items() if not k[1] and not k[2] and c.is_constant()}
        comps.append(DiffPoly(base, const))
        parts.append(comps)
    den = None
    for comps in parts:
        for g in comps:
            for c in g.terms.values():
                den = c.den if den is None else den * (c.den / den.gcd(c.den))
    rows = []
    for comps in parts:
        row: dict = {}
        for idx, g in enumerate(comps):
            for key, c in g.terms.items():
                num = c.num * (den / c.den)
                for exps, q in num.to_dict().items():
                    row[(idx, key, exps)] = Fraction(int(q.p), int(q.q))
        rows.append(row)
    return rows


def _express_in_basis(rows: list[dict]) -> list[dict]:
    """For each row ``r`` the coefficients ``M[r][s]`` over a basis of the span.

    Basis rows map to themselves; every other row satisfies
    ``row_r = sum_s M[r][s] row_s``.
    """
    reduced: list[tuple[object, dict, dict]] = []  # (pivot, vector, combination of basis rows)
    out = []
    for r, row in enumerate(rows):
        vec = dict(row)
        comb: dict = {}
        for pivot, bvec, bcomb in reduced:
            a = vec.get(pivot)
            if not a:
                continue
            for col, val in bvec.items():
                nv = vec.get(col, 0) - a * val
                if nv:
                    vec[col] = nv
                else:
                    vec.pop(col, None)
            for s, val in bcomb.items():
                nv = comb.get(s, 0) + a * val
                if nv:
                    comb[s] = nv
                else:
                    comb.pop(s, None)
        if vec:
            pivot = min(vec, key=repr)
            a = vec[pivot]
            bvec = {col: val / a for col, val in vec.items()}
            # basis element: row_r - comb = a * bvec, so bvec = (row_r - comb) / a
            bcomb = {s: -val / a for s, val in comb.items()}
            bcomb[r] = bcomb.get(r, 0) + 1 / a
            reduced.append((pivot, bvec, bcomb))
            out.append({r: Fraction(1)})
        else:
            out.append(comb)
    return out


def _reduce_two_slots(chains: list, base: JetSpace, trace):
    """Depth-3 chains whose sum is exact only across both middle slots.

    The first middle factors are written over a basis modulo total
    derivatives; the exact remainders go through R3 in the first slot, and
    for every basis element the remaining sum must be exact in the second
    slot.  Returns ``(depth-2 chains, depth-2 tensor)`` or ``None``.
    """
    fs = [c[1] for c in chains]
    M = _express_in_basis(_exactness_rows(fs, base))
    lower: list = []
    per_basis: dict[int, list] = {}
    for r, chain in enumerate(chains):
        rest = chain[1]
        for s, coef in M[r].items():
            per_basis.setdefault(s, []).append((coef, chain))
            rest = rest - fs[s].scale(coef)
        if rest.is_zero():
            continue
        g = witness(rest)
        if g is None:
            return None
        lower.append((chain[0] * g, chain[2], chain[3]))
        lower.append((-chain[0], g * chain[2], chain[3]))
    T = tensor_space(base, 4)
    carry = tensor_space(base, 3).zero
    for s, members in per_basis.items():
        t = T.zero
        for coef, chain in members:
            t = t + chain_tensor((chain[0], fs[s], chain[2], chain[3]), base).scale(coef)
        if t.is_zero():
            continue
        G = witness(t, copy_fields(base, 2))
        if G is None:
            return None
        carry = carry + merge_copy(G, base, 4, 2, 1) - merge_copy(G, base, 4, 2, 3)
    if trace is not None:
        trace.append("R3-two-slot")
    return lower, carry


def _reduce_depth(flanked: dict[int, list], base: JetSpace, trace) -> DiffPoly:
    """Reduce flanked chains of every depth to a single two-copy tensor."""
    top = max(flanked, default=1)
    if top > MAX_DEPTH:
        raise DepthExceeded(f"more than {MAX_DEPTH} inverse derivatives")
    pending: dict[int, list] = {k: list(v) for k, v in flanked.items()}
    carry: dict[int, DiffPoly] = {}
    for k in range(top, 1, -1):
        leftover = []
        for chain in pending.get(k, []):
            lower = _r3_chain(chain, base, trace)
            if lower is None:
                leftover.append(chain)
            else:
                pending.setdefault(k - 1, []).extend(lower)
        leftover, lower = _r3_grouped(leftover, k, trace)
        pending.setdefault(k - 1, []).extend(lower)
        copies = k + 1
        T = tensor_space(base, copies)
        t = carry.get(k, T.zero)
        for chain in leftover:
            t = t + chain_tensor(chain, base)
        if t.is_zero():
            continue
        for m in range(1, k):
            G = witness(t, copy_fields(base, m))
            if G is not None:
                if trace is not None:
                    trace.append("R3-tensor")
                lower = (merge_copy(G, base, copies, m, m - 1)
                         - merge_copy(G, base, copies, m, m + 1))
                carry[k - 1] = carry.get(k - 1, tensor_space(base, k).zero) + lower
                break
        else:
            split = None
            if k == 3 and k not in carry:
                split = _reduce_two_slots(leftover, base, trace)
            if split is None:
                raise IrreducibleNonlocal(
                    f"depth-{k} terms with non-exact middle factors do not cancel")
            pending.setdefault(k - 1, []).extend(split[0])
            carry[k - 1] = carry.get(k - 1, tensor_space(base, k).zero) + split[1]
    T2 = tensor_space(base, 2)
    t = carry.get(1, T2.zero)
    for chain in pending.get(1, []):
        t = t + chain_tensor(chain, base)
    return t


def reduce_entry(chains, base: JetSpace, trace=None) -> tuple[DiffOp, DiffPoly]:
    """Normal form of one entry as (local operator, two-copy tail tensor)."""
    if not chains:
        return DiffOp.zero(base), tensor_space(base, 2).zero
    local, flanked = _reduce_outer(list(chains), trace)
    if local is None:
        local = DiffOp.zero(base)
    tensor = _reduce_depth(flanked, base, trace)
    return local, tensor


def normalize(E: NonlocalExpression, trace: list | None = None) -> NonlocalExpression:
    """Flanked normal form: local part plus chains ``(a, b)`` of zero order."""
    base = E.space
    rows = []
    for row in E.entries:
        new_row = []
        for entry in row:
            local, tensor = reduce_entry(entry, base, trace)
            chains = [(local,)] if local.coeffs else []
            for a, b in tensor_to_chains(tensor, base):
                chains.append((DiffOp.mult(a), DiffOp.mult(b)))
            new_row.append(tuple(chains))
        rows.append(tuple(new_row))
    return NonlocalExpression(base, tuple(rows))


def tail_tensors(E: NonlocalExpression, trace=None):
    """Local matrix and matrix of two-copy tail tensors of ``E``."""
    base = E.space
    locals_, tensors = [], []
    for row in E.entries:
        lrow, trow = [], []
        for entry in row:
            local, tensor = reduce_entry(entry, base, trace)
            lrow.append(local)
            trow.append(tensor)
        locals_.append(lrow)
        tensors.append(trow)
    return LocalOperator(base, locals_), tensors


def scale_second_copy(t: DiffPoly, f: DiffPoly, base: JetSpace) -> DiffPoly:
    """Multiply a two-copy tensor by ``f`` placed in the second copy."""
    T = tensor_space(base, 2)
    return t * relabel(f, T, _copy_map(base.n, 1))


def solve_tail(tensors, flank: Sequence[DiffPoly], base: JetSpace) -> tuple[DiffPoly, ...] | None:
    """Find ``V`` with ``tensors[i][j] = Phi^i (x) V^j + V^i (x) Phi^j`` (rule R4)."""
    n = len(flank)
    if all(t.is_zero() for row in tensors for t in row):
        return tuple(base.zero for _ in range(n))
    V = []
    for i in range(n):
        diag = merge_copy(tensors[i][i], base, 2, 1, 0)
        if diag.is_zero():
            V.append(base.zero)
            continue
        q = series_quotient(diag.scale(Fraction(1, 2)), flank[i])
        if q is None:
            return None
        V.append(q)
    T = tensor_space(base, 2)
    m0, m1 = _copy_map(base.n, 0), _copy_map(base.n, 1)
    for i in range(n):
        for j in range(n):
            expect = relabel(flank[i], T, m0) * relabel(V[j], T, m1) \
                + relabel(V[i], T, m0) * relabel(flank[j], T, m1)
            if expect != tensors[i][j]:
                return None
    return tuple(V)


def collect(E: NonlocalExpression, flank: Sequence[DiffPoly] | None = None,
            trace: list | None = None) -> WNLOperator:
    """Bring ``E`` to a weakly non-local operator of localizable shape."""
    base = E.space
    local, tensors = tail_tensors(E, trace)
    fl = tuple(flank) if flank is not None else base.flank()
    V = solve_tail(tensors, fl, base)
    if V is None:
        raise ShapeError("the non-local part is not of localizable shape")
    return WNLOperator(local, V, fl)
