"""Finite-difference verification of the analytic logit gradients.

For every strategy's composite loss this builds random (logits, label)
instances, evaluates the closed-form gradient, and compares it against
central finite differences of the loss evaluated through the temperature
softmax. Peer distributions and ensemble targets are held constant, exactly
as the analytic forms assume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .losses import (
    LossBreakdown,
    ce_loss,
    ensemble_target,
    kd_logit_grad,
    kdcl_logit_grad,
    kl_loss,
    one_hot,
    soften,
    student_logit_grad,
    teacher_logit_grad,
)

CHECKABLE = ("vanilla", "kd-offline", "dml", "kdcl", "switch")


@dataclass
class GradCheckCase:
    strategy: str
    role: str
    tau: float
    max_rel_error: float
    ok: bool


@dataclass
class GradCheckReport:
    cases: list[GradCheckCase]
    tolerance: float

    @property
    def max_rel_error(self) -> float:
        return max(c.max_rel_error for c in self.cases)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cases)

    def lines(self) -> list[str]:
        out = []
        for c in self.cases:
            status = "ok" if c.ok else "FAIL"
            out.append(
                f"{status:4s} {c.strategy:10s} {c.role:7s} tau={c.tau:<4g} max_rel_err={c.max_rel_error:.3e}"
            )
        return out


def _loss_and_grad(strategy, role, z_self, z_other, y, alpha, beta, tau, fault_scale):
    """Composite loss value (with peer outputs fixed) and its analytic gradient."""
    p1 = soften(z_self, 1.0)
    ptau = soften(z_self, tau)
    otau = soften(z_other, tau)
    tau2 = tau * tau
    ce = float(ce_loss(y, p1))
    if strategy == "vanilla":
        kl = 0.0
        total = ce
        grad = p1 - y
        kl_part = np.zeros_like(p1)
    elif strategy == "kd-offline":
        kl = float(kl_loss(otau, ptau))
        total = alpha * ce + (1.0 - alpha) * tau2 * kl
        grad = kd_logit_grad(p1, ptau, otau, y, alpha, tau)
        kl_part = grad - alpha * (p1 - y)
    elif strategy == "kdcl":
        pm = ensemble_target(ptau, otau)
        kl = float(kl_loss(pm, ptau))
        total = ce + tau2 * kl
        grad = kdcl_logit_grad(p1, ptau, pm, y, tau)
        kl_part = grad - (p1 - y)
    elif role == "teacher":  # dml / switch teacher side
        kl = float(kl_loss(otau, ptau))
        total = ce + beta * tau2 * kl
        grad = teacher_logit_grad(p1, ptau, otau, y, beta, tau)
        kl_part = grad - (p1 - y)
    else:  # dml / switch student side (identical form in both modes)
        kl = float(kl_loss(otau, ptau))
        total = ce + alpha * tau2 * kl
        grad = student_logit_grad(otau, p1, ptau, y, alpha, tau)
        kl_part = grad - (p1 - y)
    if fault_scale != 1.0:
        grad = grad + (fault_scale - 1.0) * kl_part
    return LossBreakdown(ce=ce, kl=kl, total=total, logit_grad=grad)


def _loss_only(strategy, role, z_self, z_other, y, alpha, beta, tau, pm_fixed):
    p1 = soften(z_self, 1.0)
    ptau = soften(z_self, tau)
    otau = soften(z_other, tau)
    tau2 = tau * tau
    ce = float(ce_loss(y, p1))
    if strategy == "vanilla":
        return ce
    if strategy == "kd-offline":
        return alpha * ce + (1.0 - alpha) * tau2 * float(kl_loss(otau, ptau))
    if strategy == "kdcl":
        return ce + tau2 * float(kl_loss(pm_fixed, ptau))
    coeff = beta if role == "teacher" else alpha
    return ce + coeff * tau2 * float(kl_loss(otau, ptau))


def logit_grad_check(
    strategy: str,
    tau: float = 1.0,
    alpha: float = 1.0,
    beta: float = 1.0,
    seed: int = 0,
    trials: int = 100,
    tolerance: float = 1e-4,
    fault_scale: float = 1.0,
    h: float = 1e-6,
) -> GradCheckReport:
    """Check one strategy's gradient forms on random instances.

    ``fault_scale`` multiplies the KL portion of the analytic gradient and
    exists to prove the harness catches wrong gradients.
    """
    if strategy not in CHECKABLE:
        raise DomainError(f"unknown strategy {strategy!r}")
    rng = np.random.default_rng(seed)
    roles = ("student", "teacher") if strategy in ("dml", "kdcl", "switch") else ("student",)
    cases = []
    for role in roles:
        worst = 0.0
        for _ in range(trials):
            k = int(rng.integers(2, 11))
            z_self = rng.normal(0.0, 2.0, size=k)
            z_other = rng.normal(0.0, 2.0, size=k)
            y = one_hot(int(rng.integers(k)), k)
            pm_fixed = (
                ensemble_target(soften(z_self, tau), soften(z_other, tau))
                if strategy == "kdcl"
                else None
            )
            breakdown = _loss_and_grad(strategy, role, z_self, z_other, y, alpha, beta, tau, fault_scale)
            numeric = np.empty(k)
            for j in range(k):
                zp = z_self.copy()
                zp[j] += h
                up = _loss_only(strategy, role, zp, z_other, y, alpha, beta, tau, pm_fixed)
                zp[j] = z_self[j] - h
                down = _loss_only(strategy, role, zp, z_other, y, alpha, beta, tau, pm_fixed)
                numeric[j] = (up - down) / (2.0 * h)
            denom = np.maximum(np.maximum(np.abs(breakdown.logit_grad), np.abs(numeric)), 1e-8)
            worst = max(worst, float(np.max(np.abs(breakdown.logit_grad - numeric) / denom)))
        cases.append(
            GradCheckCase(strategy=strategy, role=role, tau=tau, max_rel_error=worst, ok=worst <= tolerance)
        )
    return GradCheckReport(cases=cases, tolerance=tolerance)


def full_grad_check(
    taus=(0.5, 1.0, 2.0, 5.0),
    alpha: float = 1.0,
    beta: float = 1.0,
    seed: int = 0,
    trials: int = 100,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """All strategies at several temperatures; the acceptance-level sweep."""
    cases = []
    for strategy in CHECKABLE:
        for tau in taus:
            a = 0.5 if strategy == "kd-offline" else alpha
            report = logit_grad_check(
                strategy, tau=tau, alpha=a, beta=beta, seed=seed, trials=trials, tolerance=tolerance
            )
            cases.extend(report.cases)
    return GradCheckReport(cases=cases, tolerance=tolerance)
