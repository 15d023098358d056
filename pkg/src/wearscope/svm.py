"""Binary soft-margin SVM with the histogram intersection kernel.

Training uses sequential minimal optimization on a precomputed kernel matrix.
Each step updates the pair of multipliers whose errors ``E = f(x) - y`` are
furthest apart among the pairs that can still move (the maximal violating
pair), and training stops once that gap falls below ``2 * tol``.

Labels are ``+1`` for worn and ``-1`` for serviceable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MODEL_HEADER = "WEARSCOPE-SVM v1"
WORN, SERVICEABLE = "worn", "serviceable"

# alphas at or below this are dropped from the stored model
_ALPHA_EPS = 1e-12


class ConvergenceError(RuntimeError):
    """SMO hit its iteration limit; ``model`` holds the best iterate."""

    def __init__(self, message, model):
        super().__init__(message)
        self.model = model


class ModelFormatError(ValueError):
    pass


def intersection_kernel(x, y) -> float:
    """``sum_i min(x_i, y_i)`` for equal-length non-negative vectors."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    y = np.asarray(getattr(y, "values", y), dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if (x < 0).any() or (y < 0).any():
        raise ValueError("intersection kernel needs non-negative components")
    return float(np.minimum(x, y).sum())


def intersection_gram(A, B=None) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(A[i], B[j])``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"length mismatch: {A.shape[1]} vs {B.shape[1]}")
    if (A < 0).any() or (B < 0).any():
        raise ValueError("intersection kernel needs non-negative components")
    K = np.empty((A.shape[0], B.shape[0]))
    # chunked to bound the (n, m, d) temporary
    step = max(1, 4_000_000 // max(1, B.shape[0] * A.shape[1]))
    for s in range(0, A.shape[0], step):
        K[s:s + step] = np.minimum(A[s:s + step, None, :], B[None, :, :]).sum(axis=2)
    return K


def _as_matrix(samples) -> np.ndarray:
    rows = [np.asarray(getattr(s, "values", s), dtype=np.float64) for s in samples]
    if not rows:
        raise ValueError("empty training set")
    lengths = {r.size for r in rows}
    if len(lengths) != 1:
        raise ValueError(f"descriptors of differing lengths {sorted(lengths)}")
    return np.vstack(rows)


def _as_labels(labels) -> np.ndarray:
    y = []
    for lab in labels:
        if lab in (1, WORN, True):
            y.append(1.0)
        elif lab in (-1, SERVICEABLE, False):
            y.append(-1.0)
        else:
            raise ValueError(f"unknown label {lab!r}")
    return np.array(y)


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray  # (n_sv, feature_len)
    alphas: np.ndarray
    sv_labels: np.ndarray  # +-1
    bias: float
    C: float
    feature_len: int

    @property
    def n_sv(self) -> int:
        return self.alphas.size

    def decision_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_len:
            raise ValueError(f"descriptor length {X.shape[1]} != model's {self.feature_len}")
        if self.n_sv == 0:
            return np.full(X.shape[0], self.bias)
        K = intersection_gram(X, self.support_vectors)
        return K @ (self.alphas * self.sv_labels) + self.bias


def decision(model: SvmModel, x) -> float:
    """Signed margin ``sum a_i y_i k(sv_i, x) + b``."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if x.ndim != 1 or x.size != model.feature_len:
        raise ValueError(f"descriptor length {x.size} != model's {model.feature_len}")
    return float(model.decision_batch(x[None, :])[0])


def label_for_margin(margin: float) -> str:
    # ties go to worn: a missed worn edge is the costly mistake
    return WORN if margin >= 0 else SERVICEABLE


def classify(model: SvmModel, x) -> str:
    return label_for_margin(decision(model, x))


def dual_objective(alpha, y, K) -> float:
    v = alpha * y
    return float(alpha.sum() - 0.5 * v @ K @ v)


def _bias(alpha, y, grad_f, C):
    """Bias from non-bound SVs, else midpoint of the feasible interval.

    ``grad_f[i] = sum_j a_j y_j K_ij`` (decision value without bias).
    """
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(np.mean(y[free] - grad_f[free]))
    E = grad_f - y
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    # KKT: -min_up(E) <= b <= -max_low(E)
    lo = -E[up].min() if up.any() else -np.inf
    hi = -E[low].max() if low.any() else np.inf
    if np.isinf(lo) and np.isinf(hi):
        return 0.0
    if np.isinf(lo):
        return float(hi)
    if np.isinf(hi):
        return float(lo)
    return float(0.5 * (lo + hi))


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
        max_iter: int | None = None):
    """Solve the SVM dual on a precomputed kernel.

    Returns ``(alpha, bias, converged, iterations)``.
    """
    n = y.size
    if max_iter is None:
        max_iter = 100 * n
    alpha = np.zeros(n)
    f = np.zeros(n)  # sum_j a_j y_j K_ij
    tau = 1e-12
    converged = False
    it = 0
    while it < max_iter:
        E = f - y
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        E_up = np.where(up, E, np.inf)
        E_low = np.where(low, E, -np.inf)
        i = int(np.argmin(E_up))
        j = int(np.argmax(E_low))
        if E[j] - E[i] < 2 * tol:
            converged = True
            break
        it += 1
        # move along y_i d_i = -y_j d_j; optimal step for the pair
        eta = K[i, i] + K[j, j] - 2 * K[i, j]
        if eta <= tau:
            eta = tau
        s = y[i] * y[j]
        ai, aj = alpha[i], alpha[j]
        if s < 0:
            L, H = max(0.0, ai - aj), min(C, C + ai - aj)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        # maximise over a_i, keeping y_i a_i + y_j a_j fixed
        ai_new = ai + y[i] * (E[j] - E[i]) / eta
        ai_new = min(max(ai_new, L), H)
        aj_new = aj + s * (ai - ai_new)
        aj_new = min(max(aj_new, 0.0), C)
        di, dj = ai_new - ai, aj_new - aj
        if di == 0.0 and dj == 0.0:
            # numerically stuck pair; nothing more can be gained
            converged = True
            break
        alpha[i], alpha[j] = ai_new, aj_new
        f += di * y[i] * K[i] + dj * y[j] * K[j]
    b = _bias(alpha, y, f, C)
    return alpha, b, converged, it


def train(samples, labels, C: float = 1.0, tol: float = 1e-3, seed: int = 0,
          max_passes: int = 100) -> SvmModel:
    """Fit an intersection-kernel SVM.

    ``seed`` is accepted for interface symmetry; the working-set choice is
    deterministic given the data order. Raises :class:`ConvergenceError`
    after ``max_passes * n`` pair updates.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    X = _as_matrix(samples)
    y = _as_labels(labels)
    if y.size != X.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.size} labels")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("training set needs at least one sample of each class")
    K = intersection_gram(X)
    alpha, b, converged, it = smo(K, y, C, tol, max_iter=max_passes * y.size)
    keep = alpha > _ALPHA_EPS
    model = SvmModel(X[keep].copy(), alpha[keep].copy(), y[keep].copy(), b, float(C), X.shape[1])
    if not converged:
        raise ConvergenceError(f"SMO did not converge within {it} updates", model)
    return model


# --------------------------------------------------------------------------
# persistence

def save_model(model: SvmModel, path) -> None:
    if model.n_sv == 0:
        raise ValueError("refusing to save a model without support vectors")
    lines = [MODEL_HEADER,
             f"C\t{float(model.C).hex()}",
             f"bias\t{float(model.bias).hex()}",
             f"feature_len\t{model.feature_len}",
             f"n_sv\t{model.n_sv}"]
    for a, lab, sv in zip(model.alphas, model.sv_labels, model.support_vectors):
        lines.append(f"{float(a).hex()}\t{int(lab):+d}\t" + ",".join(float(v).hex() for v in sv))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _field(line: str, key: str) -> str:
    parts = line.split("\t")
    if len(parts) != 2 or parts[0] != key:
        raise ModelFormatError(f"expected '{key}' line, got {line[:40]!r}")
    return parts[1]


def load_model(path) -> SvmModel:
    text = Path(path).read_text(encoding="ascii")
    lines = text.split("\n")
    if not lines or lines[0] != MODEL_HEADER:
        head = lines[0] if lines else ""
        if head.startswith("WEARSCOPE-SVM"):
            raise ModelFormatError(f"unsupported model version {head!r}")
        raise ModelFormatError("not a wearscope SVM model file")
    try:
        C = float.fromhex(_field(lines[1], "C"))
        bias = float.fromhex(_field(lines[2], "bias"))
        feature_len = int(_field(lines[3], "feature_len"))
        n_sv = int(_field(lines[4], "n_sv"))
        body = lines[5:5 + n_sv]
        if len(body) < n_sv or not text.endswith("\n"):
            raise ModelFormatError("truncated model file")
        alphas, labels, svs = [], [], []
        for row in body:
            a, lab, vals = row.split("\t")
            sv = [float.fromhex(v) for v in vals.split(",")]
            if len(sv) != feature_len:
                raise ModelFormatError("support vector length mismatch")
            alphas.append(float.fromhex(a))
            labels.append(float(int(lab)))
            svs.append(sv)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model file: {exc}") from exc
    if any(line.strip() for line in lines[5 + n_sv:]):
        raise ModelFormatError("trailing data after support vectors")
    return SvmModel(np.array(svs).reshape(n_sv, feature_len), np.array(alphas),
                    np.array(labels), bias, C, feature_len)
