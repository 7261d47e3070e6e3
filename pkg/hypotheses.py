"""
Index hypotheses of the inequalities and existence statements the harness checks.

Each ``*_indices`` validator returns ``(ok, message)``; ``require`` turns a
failed check into a HypothesisError naming the estimate it guards. The same
validators run at config load and inside every check harness.
"""
import math
from typing import Dict, Tuple

EPS = 1e-12

# What each guarded estimate asserts, quoted in HypothesisError messages and reports
ESTIMATES: Dict[str, str] = {
    "lorentz_holder": "Hoelder in Lorentz spaces, ‖fg‖_{L^{r,s}} <= C ‖f‖_{L^{p1,q1}} ‖g‖_{L^{p2,q2}}",
    "lorentz_young": "Young in Lorentz spaces, ‖f*g‖_{L^{r,s}} <= C ‖f‖_{L^{p1,q1}} ‖g‖_{L^{p2,q2}}",
    "convolution_endpoint": "‖f*g‖_∞ <= ‖f‖_{L^{p,q1}} ‖g‖_{L^{p',q2}}",
    "paraproduct_linf": "‖T_f g‖_{L^{q/2} Ḃ^s_{p,r}} <= C ‖f‖_{L^q L^∞} ‖g‖_{L^q Ḃ^s_{p,r}}",
    "paraproduct_negative": "‖T_f g‖_{L^{q/2} Ḃ^{s1+s2}_{p,r}} <= C ‖f‖_{L^q Ḃ^{s1}_{∞,r1}} ‖g‖_{L^q Ḃ^{s2}_{p,r2}} for s1 < 0",
    "remainder": "‖R(f,g)‖ in L^{q/2} Ḃ^{s1+s2} <= C ‖f‖_{L^q Ḃ^{s1}_{p1,r1}} ‖g‖_{L^q Ḃ^{s2}_{p2,r2}} for s1 + s2 > 0",
    "product_linf": "‖fg‖_{L^{q/2} Ḃ^s_{p,r}} <= C (‖f‖_{L^q L^∞} ‖g‖_{L^q Ḃ^s_{p,r}} + ‖g‖_{L^q L^∞} ‖f‖_{L^q Ḃ^s_{p,r}})",
    "product_sobolev": "‖fg‖ in L^{q/2} Ḃ^{s1+s2-n(1/p1+1/p2-1/p)}_{p,r} <= C ‖f‖_{L^q Ḃ^{s1}_{p1,r1}} ‖g‖_{L^q Ḃ^{s2}_{p2,r2}}",
    "trilinear_integral_bound": "|∫(a·∇b, c)| <= ε(‖∇a‖²+‖∇b‖²) + C/ε ∫(‖a‖²+‖b‖²)‖c‖^σ in time",
    "mild_solution": "Picard contraction of the mild formulation in L^q Ḃ^{s+2/q}_{p,r}",
    "weighted_decay": "sup_t t^{1/2-n/(2p)+α/2} ‖∇^α(u,b)‖_p <= C ‖(u0,b0)‖ in Ḃ^{n/p-1}_{p,r}",
    "heat_lorentz": "‖e^{tΔ}f‖ in L^{p,2}(0,T; L^q) <= C ‖f‖_2 with 2/p + n/q = n/2",
    "weak_strong": "weak-strong energy gap <= exp(C ∫‖(u,b)‖^r_{Ḃ^{n/p+2/r-1}_{p,r}}) times its initial value",
    "gronwall_energy": "energy of the MHD-like system <= exp(C ∫‖(w,h)‖^r_{Ḃ^{2/p+2/r-1}_{p,r}}) times its initial value",
    "growth": "two-dimensional norm growth of Ḃ^{2/p-1}_{p,r} data",
    # report names of the calibrated forms
    "lorentz_young_weak": "weak-type Young, ‖f*g‖_{L^{r,∞}} <= C ‖f‖_{L^{p1,∞}} ‖g‖_{L^{p2,∞}}",
    "trilinear_product": "|∫(a·∇b, c)| <= C ‖c‖_{L^σ Ḃ^{n/r+2/σ-1}_{r,σ}} times interpolated L^∞L² and L²Ḣ¹ norms of a, b",
    "trilinear_split": "|∫(a·∇b, c)| <= C (ε(‖∇a‖²+‖∇b‖²) + ε^{-1}∫(‖a‖²+‖b‖²)‖c‖^σ)",
    "trilinear_split_aac": "|∫(a·∇a, c)| <= C (ε‖∇a‖² + ε^{-1}∫‖a‖²‖c‖^σ)",
    "band_decay": "per-band heat decay ‖Δ_j e^{tΔ}f‖_p <= e^{-c 4^j t} ‖Δ_j f‖_p, c fitted per band",
    "x_norm_heat": "X-norm of the free heat flow <= C ‖(u0,b0)‖_2",
    "gronwall_sup": "sup_t ‖(v,g)(t)‖² + ∫‖∇(v,g)‖² <= C ‖(v0,g0)‖²",
    "gronwall_rate": "‖(v,g)(t)‖² + ∫‖∇(v,g)‖² <= exp(c ∫‖(w,h)‖^r) ‖(v0,g0)‖², c fitted",
}


def describe(name: str) -> str:
    """Statement of the estimate behind a hypothesis or report name."""
    if name in ESTIMATES:
        return ESTIMATES[name]
    for key in sorted(ESTIMATES, key=len, reverse=True):
        if name.startswith(key):
            return ESTIMATES[key]
    return ""


class HypothesisError(ValueError):
    """Index combination outside the hypotheses of a named estimate."""

    def __init__(self, estimate: str, message: str):
        self.estimate = estimate
        self.description = describe(estimate)
        label = f"{estimate} [{self.description}]" if self.description else estimate
        super().__init__(f"{label}: {message}")


def inv(x: float) -> float:
    """1/x with 1/inf = 0."""
    return 0.0 if math.isinf(x) else 1.0 / x


def require(estimate: str, check: Tuple[bool, str]) -> None:
    ok, message = check
    if not ok:
        raise HypothesisError(estimate, message)


def besov_banach(s: float, p: float, r: float, n: int) -> Tuple[bool, str]:
    """Ḃ^s_{p,r} is complete iff s < n/p, or s = n/p with r = 1."""
    if p < 1 or r < 1:
        return False, f"need p, r >= 1 (p={p}, r={r})"
    crit = n * inv(p)
    if s < crit - EPS or (abs(s - crit) <= EPS and r == 1):
        return True, ""
    return False, f"Besov space with s={s}, p={p}, r={r} is not complete (need s < n/p = {crit:g}, or s = n/p with r = 1)"


def holder_lorentz_indices(p1, q1, p2, q2, s) -> Tuple[bool, str]:
    if not all(1 < p < math.inf for p in (p1, p2)):
        return False, f"need 1 < p1, p2 < inf (p1={p1}, p2={p2})"
    if min(q1, q2, s) < 1:
        return False, "second Lorentz indices must be >= 1"
    inv_r = inv(p1) + inv(p2)
    if inv_r >= 1:
        return False, f"need 1/r = 1/p1 + 1/p2 < 1, got {inv_r:g}"
    if inv(q1) + inv(q2) < inv(s) - EPS:
        return False, f"need 1/q1 + 1/q2 >= 1/s (q1={q1}, q2={q2}, s={s})"
    return True, ""


def young_lorentz_indices(p1, q1, p2, q2, s) -> Tuple[bool, str]:
    if not all(1 < p < math.inf for p in (p1, p2)):
        return False, f"need 1 < p1, p2 < inf (p1={p1}, p2={p2})"
    total = inv(p1) + inv(p2)
    if total <= 1:
        return False, f"need 1/p1 + 1/p2 > 1, got {total:g}"
    if total - 1 <= 0 or total - 1 >= 1:
        return False, "target exponent r must satisfy 1 < r < inf"
    if min(q1, q2, s) < 1:
        return False, "second Lorentz indices must be >= 1"
    if inv(q1) + inv(q2) < inv(s) - EPS:
        return False, f"need 1/q1 + 1/q2 >= 1/s (q1={q1}, q2={q2}, s={s})"
    return True, ""


def convolution_endpoint_indices(p, q1, q2) -> Tuple[bool, str]:
    if not 1 < p < math.inf:
        return False, f"need 1 < p < inf, got {p}"
    if inv(q1) + inv(q2) < 1 - EPS:
        return False, f"need 1/q1 + 1/q2 >= 1 (q1={q1}, q2={q2})"
    return True, ""


def paraproduct_indices(variant: str, n: int, idx: Dict) -> Tuple[bool, str]:
    q = idx.get("q", 4.0)
    if q < 2:
        return False, f"need q >= 2 so that q/2 >= 1, got {q}"
    if variant == "linf":
        return besov_banach(idx["s"], idx["p"], idx["r"], n)
    if variant == "negative":
        if idx["s1"] >= 0:
            return False, f"need s1 < 0, got {idx['s1']}"
        if abs(inv(idx["r"]) - inv(idx["r1"]) - inv(idx["r2"])) > EPS:
            return False, "need 1/r = 1/r1 + 1/r2"
        return besov_banach(idx["s2"], idx["p"], idx["r2"], n)
    return False, f"unknown paraproduct variant {variant!r}"


def remainder_indices(n: int, idx: Dict) -> Tuple[bool, str]:
    s1, s2, p1, p2, p = idx["s1"], idx["s2"], idx["p1"], idx["p2"], idx["p"]
    r1, r2 = idx["r1"], idx["r2"]
    if idx.get("q", 4.0) < 2:
        return False, "need q >= 2"
    if abs(inv(p) - inv(p1) - inv(p2)) > EPS:
        return False, "need 1/p = 1/p1 + 1/p2"
    for s_k, p_k, r_k in ((s1, p1, r1), (s2, p2, r2)):
        ok, msg = besov_banach(s_k, p_k, r_k, n)
        if not ok:
            return ok, msg
    total = s1 + s2
    inv_r = inv(r1) + inv(r2)
    if inv_r > 1 + EPS:
        return False, "need 1/r1 + 1/r2 <= 1"
    if EPS < total < n * inv(p) - EPS:
        return True, ""
    if abs(total) <= EPS:
        if abs(inv_r - 1) > EPS:
            return False, "endpoint s1 + s2 = 0 needs 1/r1 + 1/r2 = 1"
        return True, ""
    if abs(total - n * inv(p)) <= EPS:
        if abs(inv_r - 1) > EPS:
            return False, "endpoint s1 + s2 = n/p needs r = 1"
        return True, ""
    return False, f"need 0 <= s1 + s2 <= n/p, got s1 + s2 = {total:g}"


def remainder_target(n: int, idx: Dict) -> Tuple[float, float]:
    """Target (regularity, summability) of the remainder estimate."""
    total = idx["s1"] + idx["s2"]
    if abs(total) <= EPS:
        return 0.0, math.inf
    r = 1.0 / (inv(idx["r1"]) + inv(idx["r2"]))
    return total, r


def product_indices(variant: str, n: int, idx: Dict) -> Tuple[bool, str]:
    if idx.get("q", 4.0) < 2:
        return False, "need q >= 2"
    if variant == "linf":
        if idx["s"] <= 0:
            return False, f"need s > 0, got {idx['s']}"
        return besov_banach(idx["s"], idx["p"], idx["r"], n)
    if variant == "sobolev":
        s1, s2, p1, p2, p = idx["s1"], idx["s2"], idx["p1"], idx["p2"], idx["p"]
        for s_k, p_k in ((s1, p1), (s2, p2)):
            if s_k >= n * inv(p_k) - EPS:
                return False, f"need s_k < n/p_k (s={s_k}, p={p_k})"
        if p < max(p1, p2):
            return False, "need p >= max(p1, p2)"
        if abs(inv(idx["r"]) - inv(idx["r1"]) - inv(idx["r2"])) > EPS:
            return False, "need 1/r = 1/r1 + 1/r2"
        loss = n * (inv(p1) + inv(p2) - inv(p))
        if s1 + s2 <= loss + EPS:
            return False, f"need s1 + s2 > n(1/p1 + 1/p2 - 1/p) = {loss:g}"
        return True, ""
    return False, f"unknown product variant {variant!r}"


def trilinear_indices(n: int, r: float, sigma: float) -> Tuple[bool, str]:
    if not 2 <= r < math.inf:
        return False, f"need 2 <= r < inf, got r={r}"
    if not 2 < sigma < math.inf:
        return False, f"need 2 < sigma < inf, got sigma={sigma}"
    if n / r + 2 / sigma <= 1:
        return False, f"need n/r + 2/sigma > 1, got {n / r + 2 / sigma:g}"
    return True, ""


def heat_lorentz_indices(n: int, p: float, q: float) -> Tuple[bool, str]:
    if not 2 < p < math.inf:
        return False, f"need 2 < p < inf, got {p}"
    if q < 2:
        return False, f"need q >= 2, got {q}"
    if abs(2 / p + n * inv(q) - n / 2) > 1e-9:
        return False, f"need 2/p + n/q = n/2, got {2 / p + n * inv(q):g} vs {n / 2:g}"
    return True, ""


def mild_solution_indices(n: int, p: float, r: float, q: float) -> Tuple[bool, str]:
    if not 2 < q < math.inf:
        return False, f"need q in (2, inf), got {q}"
    if not 1 <= p < math.inf or r < 1:
        return False, f"need 1 <= p < inf and r >= 1 (p={p}, r={r})"
    s_p = n / p - 1
    if s_p < 1 - 4 / q - EPS:
        return False, f"need s_p = n/p - 1 >= 1 - 4/q, got s_p={s_p:g}"
    return True, ""


def decay_indices(n: int, p: float, alpha: int) -> Tuple[bool, str]:
    if p <= n:
        return False, f"need p > n, got p={p}"
    if alpha not in (0, 1):
        return False, f"alpha must be 0 or 1, got {alpha}"
    return True, ""


def weak_strong_indices(n: int, p: float, r: float) -> Tuple[bool, str]:
    if p < 1 or not 1 <= r < math.inf:
        return False, f"need p >= 1 and 1 <= r < inf (p={p}, r={r})"
    if n / (2 * p) + 2 / r <= 1:
        return False, f"need n/(2p) + 2/r > 1, got {n / (2 * p) + 2 / r:g}"
    return True, ""


def gronwall_indices(n: int, p: float, r: float) -> Tuple[bool, str]:
    if n != 2:
        return False, "the energy bound for the MHD-like system is two dimensional"
    if p < 1 or not 1 <= r < math.inf:
        return False, f"need p >= 1 and 1 <= r < inf (p={p}, r={r})"
    if 2 / p + 2 / r <= 1:
        return False, f"need 2/p + 2/r > 1, got {2 / p + 2 / r:g}"
    return True, ""


def growth_indices(n: int, p: float, r: float) -> Tuple[bool, str]:
    if n != 2:
        return False, "the growth monitor is two dimensional"
    if not 2 < p < math.inf:
        return False, f"need 2 < p < inf, got {p}"
    if not 1 <= r < math.inf:
        return False, f"need 1 <= r < inf, got {r}"
    return True, ""
