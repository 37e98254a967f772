"""Matrix Lie algebras gl(n)/sl(n), the trace-form Casimir, and g (x) g arithmetic.

Elements of g (x) g are plain complex arrays T of shape (n, n, n, n) standing for
sum T[i, j, k, l] E_ij (x) E_kl.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularGroupElement

COND_LIMIT = 1e12


def elementary(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1
    return e


@dataclass(frozen=True, eq=False)
class AlgebraSpec:
    n: int
    kind: str = "gl"
    basis: np.ndarray = field(init=False, repr=False)
    dual: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n
        if self.kind not in ("gl", "sl"):
            raise ValueError(f"unknown algebra kind {self.kind!r}")
        if self.kind == "gl":
            basis = [elementary(n, i, j) for i in range(n) for j in range(n)]
        else:
            basis = [elementary(n, i, j) for i in range(n) for j in range(n) if i != j]
            basis += [elementary(n, i, i) - elementary(n, i + 1, i + 1) for i in range(n - 1)]
        basis = np.array(basis)
        gram = np.einsum("aij,bji->ab", basis, basis)
        # e^b = sum_a (gram^-1)_{ab} e_a  gives  tr(e_a e^b) = delta_ab
        dual = np.einsum("ab,aij->bij", np.linalg.inv(gram), basis)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "dual", dual)

    @classmethod
    def from_json(cls, obj) -> "AlgebraSpec":
        return cls(int(obj["n"]), obj.get("kind", "gl"))

    def to_json(self) -> dict:
        return {"n": self.n, "kind": self.kind}

    @property
    def dim(self) -> int:
        return len(self.basis)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the algebra (trace removal for sl); acts on the last two axes."""
        x = np.asarray(x, dtype=complex)
        if self.kind == "gl":
            return x
        tr = np.trace(x, axis1=-2, axis2=-1)
        return x - tr[..., None, None] * np.eye(self.n) / self.n

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """Coefficients c_a with x = sum c_a e_a."""
        return np.einsum("...ij,aji->...a", x, self.dual)

    def from_coordinates(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("...a,aij->...ij", c, self.basis)

    def gradient(self, derivs: np.ndarray) -> np.ndarray:
        """Element y of g with tr(y e_a) = derivs[..., a]."""
        return np.einsum("...a,aij->...ij", derivs, self.dual)

    def random_element(self, rng, scale: float = 1.0) -> np.ndarray:
        c = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
        return scale * self.from_coordinates(c)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        return self.kind == "gl" or abs(np.trace(x)) <= tol


def gl(n: int) -> AlgebraSpec:
    return AlgebraSpec(n, "gl")


def sl(n: int) -> AlgebraSpec:
    return AlgebraSpec(n, "sl")


def casimir(spec: AlgebraSpec) -> np.ndarray:
    """P = sum_a e_a (x) e^a for the trace form."""
    n = spec.n
    eye = np.eye(n)
    p = np.einsum("il,jk->ijkl", eye, eye).astype(complex)
    if spec.kind == "sl":
        p -= np.einsum("ij,kl->ijkl", eye, eye) / n
    return p


def commutator(x, y):
    return x @ y - y @ x


def _checked_inverse(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if not np.all(np.isfinite(g)) or np.linalg.cond(g) > COND_LIMIT:
        raise SingularGroupElement("group element is singular or ill-conditioned")
    return np.linalg.inv(g)


def adjoint(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    return g @ x @ _checked_inverse(g)


def adjoint_matrix(g: np.ndarray) -> np.ndarray:
    """Matrix of x -> g x g^-1 acting on row-major vec(x)."""
    return np.kron(g, _checked_inverse(g).T)


def adjoint_operator_norm(g: np.ndarray, spec: AlgebraSpec | None = None) -> float:
    """Operator norm of Ad g on the algebra, induced by the Frobenius norm."""
    ad = adjoint_matrix(g)
    if spec is not None and spec.kind == "sl":
        n = spec.n
        flat = spec.basis.reshape(spec.dim, n * n).T
        q, _ = np.linalg.qr(flat)
        ad = q.conj().T @ ad @ q
    return float(np.linalg.norm(ad, 2))


# -- g (x) g -----------------------------------------------------------------

def tensor(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x (x) y."""
    return np.einsum("ij,kl->ijkl", x, y)


def tensor_act(side: int, g: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Ad g on factor `side` (1 or 2)."""
    gi = _checked_inverse(g)
    if side == 1:
        return np.einsum("mi,ijkl,jn->mnkl", g, t, gi)
    if side == 2:
        return np.einsum("mk,ijkl,ln->ijmn", g, t, gi)
    raise ValueError("side must be 1 or 2")


def tensor_commutator(t: np.ndarray, x: np.ndarray, side: int) -> np.ndarray:
    """[T, x (x) 1] for side 1, [T, 1 (x) x] for side 2; broadcasts over leading axes."""
    if side == 1:
        return (np.einsum("...ijkl,jm->...imkl", t, x)
                - np.einsum("mi,...ijkl->...mjkl", x, t))
    if side == 2:
        return (np.einsum("...ijkl,lm->...ijkm", t, x)
                - np.einsum("mk,...ijkl->...ijml", x, t))
    raise ValueError("side must be 1 or 2")


def tensor_commutator_batched(t: np.ndarray, x: np.ndarray, side: int) -> np.ndarray:
    """As tensor_commutator, with x carrying the same leading axes as t."""
    if side == 1:
        return (np.einsum("...ijkl,...jm->...imkl", t, x)
                - np.einsum("...mi,...ijkl->...mjkl", x, t))
    return (np.einsum("...ijkl,...lm->...ijkm", t, x)
            - np.einsum("...mk,...ijkl->...ijml", x, t))


def tensor_swap(t: np.ndarray) -> np.ndarray:
    """T^(21)."""
    return np.swapaxes(np.swapaxes(t, -4, -2), -3, -1)


def tensor_matmul(s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Product in End(C^n (x) C^n)."""
    return np.einsum("ijkl,jmln->imkn", s, t)


def tensor_norm(t: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(t)))


def as_operator(t: np.ndarray) -> np.ndarray:
    """The n^2 x n^2 matrix of T acting on C^n (x) C^n."""
    n = t.shape[-1]
    return np.moveaxis(t, -3, -2).reshape(t.shape[:-4] + (n * n, n * n))


def embed(t: np.ndarray, slots: tuple, factors: int = 3) -> np.ndarray:
    """Operator of a g (x) g element placed in tensor slots (a, b) of factors copies of C^n."""
    n = t.shape[0]
    a, b = slots
    if a == b:
        raise ValueError("slots must differ")
    letters = "abcdefgh"[:factors]
    out_idx = [None] * factors
    in_idx = [None] * factors
    for k in range(factors):
        out_idx[k] = letters[k]
        in_idx[k] = letters[k].upper()
    # identity on the spectator factors
    spec = [f"{out_idx[a]}{in_idx[a]}{out_idx[b]}{in_idx[b]}"]
    ops = [t]
    for k in range(factors):
        if k not in (a, b):
            spec.append(f"{out_idx[k]}{in_idx[k]}")
            ops.append(np.eye(n))
    result = "".join(out_idx) + "".join(in_idx)
    op = np.einsum(",".join(spec) + "->" + result, *ops)
    return op.reshape(n**factors, n**factors)


def embed_single(x: np.ndarray, slot: int, factors: int = 3) -> np.ndarray:
    n = x.shape[0]
    mats = [np.eye(n)] * factors
    mats = list(mats)
    mats[slot] = x
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out
