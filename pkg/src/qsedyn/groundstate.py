"""ADAPT-VQE ground states over a fixed operator pool."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .mapping import PauliOperator
from .simulator import ExponentialCache, basis_state

log = logging.getLogger(__name__)

FD_STEP = 1e-5


class OptimizerError(RuntimeError):
    """Inner optimization failed; ``best`` holds the best state reached so far."""

    def __init__(self, message: str, best: "AnsatzState | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class VQEOptions:
    grad_tol: float = 1e-4
    opt_tol: float = 1e-8
    max_layers: int = 30
    max_iter: int = 2000


@dataclass(frozen=True)
class AnsatzState:
    """Reference bitstring plus ordered ``(label, theta)`` layers."""

    reference_bitstring: str
    layers: tuple = ()
    final_energy: float = float("nan")
    gradient_norm_at_exit: float = float("nan")
    energy_history: tuple = field(default=(), compare=False)

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.layers)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([t for _, t in self.layers], dtype=float)

    def to_text(self) -> str:
        lines = [
            f"reference = {self.reference_bitstring}",
            f"final_energy = {self.final_energy!r}",
            f"gradient_norm_at_exit = {self.gradient_norm_at_exit!r}",
            f"n_layers = {len(self.layers)}",
        ]
        for k, (lab, theta) in enumerate(self.layers):
            lines.append(f"layer.{k} = {','.join(str(i) for i in lab)} {float(theta)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AnsatzState":
        kv = {}
        for line in text.splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                kv[key.strip()] = value.strip()
        layers = []
        for k in range(int(kv["n_layers"])):
            lab, theta = kv[f"layer.{k}"].split()
            layers.append((tuple(int(i) for i in lab.split(",")), float(theta)))
        return cls(
            reference_bitstring=kv["reference"],
            layers=tuple(layers),
            final_energy=float(kv["final_energy"]),
            gradient_norm_at_exit=float(kv["gradient_norm_at_exit"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "AnsatzState":
        return cls.from_text(Path(path).read_text())


class _Problem:
    """Energy of ``prod_k exp(theta_k G_k)|ref>`` with cached exponentials."""

    def __init__(self, h: PauliOperator, pool: Sequence[tuple], reference: str):
        self.h = h.to_matrix()
        self.labels = [lab for lab, _ in pool]
        self.index = {lab: k for k, lab in enumerate(self.labels)}
        self.cache = ExponentialCache([g for _, g in pool])
        self.ref = basis_state(h.n_qubits, reference).amplitudes

    def state(self, ops: Sequence[int], thetas: np.ndarray) -> np.ndarray:
        vec = self.ref
        for k, theta in zip(ops, thetas):
            vec = self.cache.apply(k, theta, vec)
        return vec

    def energy(self, ops: Sequence[int], thetas: np.ndarray) -> float:
        vec = self.state(ops, thetas)
        e = np.vdot(vec, self.h @ vec)
        if not np.isfinite(e):
            raise FloatingPointError("non-finite energy")
        return float(e.real)

    def fd_gradient(self, ops: Sequence[int], thetas: np.ndarray) -> np.ndarray:
        grad = np.empty(len(thetas))
        for k in range(len(thetas)):
            tp = thetas.copy()
            tm = thetas.copy()
            tp[k] += FD_STEP
            tm[k] -= FD_STEP
            grad[k] = (self.energy(ops, tp) - self.energy(ops, tm)) / (2 * FD_STEP)
        return grad

    def pool_gradients(self, vec: np.ndarray) -> np.ndarray:
        hv = self.h @ vec
        # dE/dtheta at theta = 0 for exp(theta G) prepended: <[H, G]> = 2 Re <psi|H G|psi>
        return np.array(
            [2.0 * np.vdot(hv, self.cache.apply_generator(k, vec)).real for k in range(len(self.cache))]
        )


def _optimize(problem: _Problem, ops: list[int], x0: np.ndarray, opts: VQEOptions) -> tuple[np.ndarray, float, float]:
    if len(ops) == 0:
        return x0, problem.energy(ops, x0), 0.0
    fun = lambda x: problem.energy(ops, x)
    jac = lambda x: problem.fd_gradient(ops, x)
    res = minimize(fun, x0, jac=jac, method="BFGS", options={"gtol": opts.opt_tol, "maxiter": opts.max_iter})
    x = res.x
    gnorm = float(np.max(np.abs(jac(x))))
    if gnorm >= opts.opt_tol:
        # BFGS can stall on precision loss right at the optimum; a Newton polish on the
        # FD Hessian finishes the job at this problem size
        x, gnorm = _newton_polish(problem, ops, x, opts)
    return x, problem.energy(ops, x), gnorm


def _newton_polish(problem: _Problem, ops: list[int], x: np.ndarray, opts: VQEOptions) -> tuple[np.ndarray, float]:
    n = len(x)
    step = 1e-4
    for _ in range(20):
        g = problem.fd_gradient(ops, x)
        gnorm = float(np.max(np.abs(g)))
        if gnorm < opts.opt_tol:
            return x, gnorm
        hess = np.empty((n, n))
        for k in range(n):
            xp = x.copy()
            xm = x.copy()
            xp[k] += step
            xm[k] -= step
            hess[:, k] = (problem.fd_gradient(ops, xp) - problem.fd_gradient(ops, xm)) / (2 * step)
        hess = 0.5 * (hess + hess.T)
        w, v = np.linalg.eigh(hess)
        w = np.maximum(np.abs(w), 1e-6)
        dx = -v @ ((v.T @ g) / w)
        e0 = problem.energy(ops, x)
        t = 1.0
        while t > 1e-6 and problem.energy(ops, x + t * dx) > e0 + 1e-15:
            t *= 0.5
        x = x + t * dx
    return x, float(np.max(np.abs(problem.fd_gradient(ops, x))))


def vqe_optimize(
    ansatz: AnsatzState, h: PauliOperator, pool: Sequence[tuple], options: VQEOptions | None = None
) -> AnsatzState:
    """Re-optimize every angle of a fixed layer structure."""
    opts = options or VQEOptions()
    problem = _Problem(h, pool, ansatz.reference_bitstring)
    ops = [problem.index[lab] for lab in ansatz.labels]
    x, energy, gnorm = _optimize(problem, ops, ansatz.thetas, opts)
    layers = tuple((lab, float(t)) for lab, t in zip(ansatz.labels, x))
    out = replace(ansatz, layers=layers, final_energy=energy, gradient_norm_at_exit=gnorm)
    if gnorm >= opts.opt_tol:
        raise OptimizerError(f"angle optimization stalled at |grad|_inf = {gnorm:.2e}", best=out)
    return out


def adapt_vqe(
    h: PauliOperator, pool: Sequence[tuple], reference_bitstring: str, options: VQEOptions | None = None
) -> AnsatzState:
    """Grow the ansatz one pool operator at a time, re-optimizing all angles after each addition.

    ``pool`` is a sequence of ``(label, G)`` with anti-Hermitian qubit
    operators ``G``.  The largest-magnitude energy gradient selects the next
    operator; ties go to the earlier pool entry.
    """
    opts = options or VQEOptions()
    if not pool:
        raise ValueError("operator pool is empty")
    problem = _Problem(h, pool, reference_bitstring)
    ops: list[int] = []
    x = np.zeros(0)
    energy = problem.energy(ops, x)
    history = [energy]
    max_grad = 0.0
    while True:
        grads = problem.pool_gradients(problem.state(ops, x))
        pick = int(np.argmax(np.abs(grads)))
        max_grad = float(np.abs(grads[pick]))
        if max_grad < opts.grad_tol or len(ops) >= opts.max_layers:
            break
        trial_ops = ops + [pick]
        try:
            x_new, e_new, gnorm = _optimize(problem, trial_ops, np.append(x, 0.0), opts)
        except (FloatingPointError, ValueError) as exc:
            best = _make_state(problem, reference_bitstring, ops, x, energy, max_grad, history)
            raise OptimizerError(f"layer {len(ops)} optimization failed: {exc}", best=best) from exc
        if e_new >= energy:
            log.info("layer %d did not lower the energy; stopping", len(ops))
            break
        ops, x, energy = trial_ops, x_new, e_new
        history.append(energy)
        log.debug("layer %d: %s theta=%.6f E=%.10f |g|=%.2e", len(ops), problem.labels[pick], x[-1], energy, max_grad)
    return _make_state(problem, reference_bitstring, ops, x, energy, max_grad, history)


def _make_state(problem, reference, ops, x, energy, max_grad, history) -> AnsatzState:
    return AnsatzState(
        reference_bitstring=reference,
        layers=tuple((problem.labels[k], float(t)) for k, t in zip(ops, x)),
        final_energy=float(energy),
        gradient_norm_at_exit=float(max_grad),
        energy_history=tuple(history),
    )


def prepare_state(ansatz: AnsatzState, pool: Sequence[tuple], n_qubits: int) -> np.ndarray:
    """Replay the layers on the reference and return the amplitudes."""
    by_label = {lab: g for lab, g in pool}
    missing = [lab for lab in ansatz.labels if lab not in by_label]
    if missing:
        raise KeyError(f"pool lacks generators {missing}")
    gens = [by_label[lab] for lab in ansatz.labels]
    cache = ExponentialCache(gens)
    vec = basis_state(n_qubits, ansatz.reference_bitstring).amplitudes
    for k, theta in enumerate(ansatz.thetas):
        vec = cache.apply(k, theta, vec)
    return vec
