"""Linear stability of constant steady states, mode by mode.

Linearizing the reaction-diffusion system around a constant steady
state Z and expanding perturbations in the zero-flux cosine modes with
Laplacian eigenvalues lambda_j decouples the dynamics into 4x4 mode
matrices

    M_j = J(Z) - lambda_j * diag(a1, a2, a3, a4),

where J is the reaction Jacobian. The state is linearly stable iff
every M_j has all eigenvalues in the open left half-plane, including
the infinite tail of modes beyond any finite list; the tail is
certified by a Gershgorin bound, since the off-diagonal row sums of M_j
do not depend on lambda.

Two routes are computed per mode and cross-checked:

  numeric      eigenvalues of the assembled M_j (authoritative verdict)
  closed form  exploits the zero pattern of J at each steady-state
               family: at Z1 the Jacobian digraph is acyclic so the
               eigenvalues are the diagonal entries; at Z2 the S row
               and R column split off, leaving a quadratic in the (I,B)
               block; at Z3 the B column splits off, leaving a cubic in
               the (S,I,R) block; at Z4 the (S,I,R) block yields a
               cubic and the B diagonal is tracked separately, which
               drops the (weak) B couplings and is therefore compared
               at classification level with an allowance of that
               coupling's norm.

Cubics are classified by sign tests on their coefficients
(``classify_cubic``), the quadratic and linear factors in closed form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import ModelParams
from .steady import SteadyState

__all__ = [
    "DiffusionMatrix",
    "Jacobian4",
    "CubicCoeffs",
    "CubicClass",
    "ModeVerdict",
    "StabilityReport",
    "DampingMargins",
    "ConsistencyError",
    "jacobian",
    "mode_matrix",
    "eigenvalues4",
    "classify_cubic",
    "classify_state",
    "damping_margins",
]

# |max real part| below 1e-9*(1 + ||M||_F) is reported as marginal
# rather than forced into a stable/unstable call.
MARGINAL_RTOL = 1e-9

# Closed-form eigenvalues must match numeric ones to this relative
# accuracy where the closed form is exact (Z1, Z2, Z3).
CROSSCHECK_RTOL = 1e-8


class ConsistencyError(RuntimeError):
    """Closed-form and numeric routes disagree beyond tolerance."""


@dataclass(frozen=True)
class DiffusionMatrix:
    """Constant diffusion coefficients of (S, I, R, B), all positive."""

    a1: float
    a2: float
    a3: float
    a4: float

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "a4"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"diffusion coefficient {name} must be positive, got {v}")

    @classmethod
    def from_coefficients(cls, coeffs) -> "DiffusionMatrix":
        """From four CoefficientField objects, which must be constant."""
        values = []
        for k, c in enumerate(coeffs):
            if not c.is_constant:
                raise ValueError(
                    f"mode analysis needs constant diffusion; coefficient {k + 1} "
                    f"has kind {c.kind!r}"
                )
            values.append(c.constant_value())
        return cls(*values)

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4])

    def to_dict(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "a3": self.a3, "a4": self.a4}


@dataclass(frozen=True)
class Jacobian4:
    """Reaction Jacobian at a state, with the family tag it came from."""

    matrix: np.ndarray
    tag: str


def jacobian(z, p: ModelParams, tag: str = "numeric") -> Jacobian4:
    """Analytic reaction Jacobian at a nonnegative 4-vector.

    Entries follow from differentiating the reaction terms:
    db/dS = b0*(1 - 2S/k1), dh1/dB = k2/(B + k2)^2,
    dg2/dB = g0*(1 - 2B/k3).
    """
    z = np.asarray(z, dtype=float).reshape(4)
    if np.any(z < 0.0) or not np.all(np.isfinite(z)):
        raise ValueError(f"state must be finite and nonnegative, got {z}")
    s, i, r, b = z
    bs = p.b0 * (1.0 - 2.0 * s / p.k1)
    h1 = b / (b + p.k2)
    dh1 = p.k2 / (b + p.k2) ** 2
    g2s = p.g0 * (1.0 - 2.0 * b / p.k3)
    m = np.array([
        [bs - p.beta1 * i - p.beta2 * h1 - p.d1, -p.beta1 * s, p.sigma, -p.beta2 * s * dh1],
        [p.beta1 * i + p.beta2 * h1, p.beta1 * s - (p.d2 + p.gamma), 0.0, p.beta2 * s * dh1],
        [0.0, p.gamma, -(p.d3 + p.sigma), 0.0],
        [0.0, p.xi, 0.0, g2s - p.d4],
    ])
    return Jacobian4(m, tag)


def mode_matrix(jac: Jacobian4, diff: DiffusionMatrix, lam: float) -> np.ndarray:
    """J - lambda * diag(a) for one Laplacian eigenvalue lambda >= 0."""
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0.0:
        raise ValueError(f"Laplacian eigenvalue must be >= 0, got {lam}")
    return jac.matrix - lam * np.diag(diff.as_array())


def eigenvalues4(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real 4x4 matrix, sorted by real part descending.

    Delegates to LAPACK's balanced reduction and QR iteration through
    numpy; ties in the real part are broken by imaginary part
    descending so the ordering is deterministic.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    eigs = np.linalg.eigvals(m)
    order = np.lexsort((-eigs.imag, -eigs.real))
    return eigs[order]


# ---------------------------------------------------------------------------
# Cubic sign classification
# ---------------------------------------------------------------------------

class CubicClass(str, Enum):
    HAS_POSITIVE_ROOT = "has-positive-root"
    ALL_NEGATIVE = "all-negative-real-parts"
    HAS_POSITIVE_REAL_PART = "has-positive-real-part"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class CubicCoeffs:
    """Monic cubic mu^3 + p*mu^2 + q*mu + h."""

    p: float
    q: float
    h: float

    def roots(self) -> np.ndarray:
        return np.roots([1.0, self.p, self.q, self.h])

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "h": self.h}


def classify_cubic(c: CubicCoeffs) -> CubicClass:
    """Root location of mu^3 + p mu^2 + q mu + h for p > 0 by sign tests.

    The exact boundary p*q = h factors the cubic as (mu + p)(mu^2 + q),
    so the roots are -p and +/- sqrt(-q); it is recognized first, within
    a relative tolerance, because its root formulas stay valid whatever
    the sign of h (h = 0 puts a root at the origin and is boundary too).
    Away from the boundary, h < 0 forces a positive real root (the cubic
    is negative at 0 and grows to +inf) and takes precedence over the
    Routh-Hurwitz product test; otherwise 0 < h < p*q means every root
    has negative real part and p*q < h means a conjugate pair has
    crossed into the right half-plane.
    """
    if not (c.p > 0.0):
        raise ValueError(f"classifier requires p > 0, got p = {c.p!r}")
    pq = c.p * c.q
    tol = MARGINAL_RTOL * (1.0 + abs(pq) + abs(c.h))
    if abs(c.h) <= tol or abs(pq - c.h) <= tol:
        return CubicClass.BOUNDARY
    if c.h < 0.0:
        return CubicClass.HAS_POSITIVE_ROOT
    if c.h < pq:
        return CubicClass.ALL_NEGATIVE
    return CubicClass.HAS_POSITIVE_REAL_PART


# ---------------------------------------------------------------------------
# Damping margins of the linearization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DampingMargins:
    """Decay-condition quantities at a steady state.

    b_slope_max = |b0*(1 - 2 S*/k1)| and g_slope_max = |g0*(1 - 2 B*/k3)|
    bound the self-growth slopes of S and B at the state; the margins
    d1 - b_slope_max and d4 - g_slope_max are positive exactly when
    death outweighs self-growth there. infection_margin is
    (d2 + gamma) - beta1*S* (net removal of infected hosts against
    contact transmission at the state), recovery_rate is d3 + sigma,
    and small_rates collects the coupling rates whose smallness the
    decay argument leans on.
    """

    b_slope_max: float
    g_slope_max: float
    s_margin: float
    b_margin: float
    infection_margin: float
    recovery_rate: float
    small_rates: dict

    @property
    def damped(self) -> bool:
        return self.s_margin > 0.0 and self.b_margin > 0.0

    def to_dict(self) -> dict:
        return {
            "b_slope_max": self.b_slope_max,
            "g_slope_max": self.g_slope_max,
            "s_margin": self.s_margin,
            "b_margin": self.b_margin,
            "infection_margin": self.infection_margin,
            "recovery_rate": self.recovery_rate,
            "small_rates": dict(self.small_rates),
            "damped": self.damped,
        }


def damping_margins(z, p: ModelParams) -> DampingMargins:
    """Evaluate the linear damping quantities at a state."""
    z = np.asarray(z, dtype=float).reshape(4)
    s, b = float(z[0]), float(z[3])
    b0slope = abs(p.b0 * (1.0 - 2.0 * s / p.k1))
    g0slope = abs(p.g0 * (1.0 - 2.0 * b / p.k3))
    return DampingMargins(
        b_slope_max=b0slope,
        g_slope_max=g0slope,
        s_margin=p.d1 - b0slope,
        b_margin=p.d4 - g0slope,
        infection_margin=(p.d2 + p.gamma) - p.beta1 * s,
        recovery_rate=p.d3 + p.sigma,
        small_rates={"sigma": p.sigma, "gamma": p.gamma,
                     "beta1": p.beta1, "beta2": p.beta2},
    )


# ---------------------------------------------------------------------------
# Per-mode verdicts
# ---------------------------------------------------------------------------

@dataclass
class ModeVerdict:
    """Stability call for one Laplacian eigenvalue."""

    j: int
    lam: float
    eigenvalues: np.ndarray
    max_real: float
    tol: float
    classification: str
    cubic: CubicCoeffs | None = None
    cubic_class: str | None = None
    closed_form_eigs: np.ndarray | None = None
    closed_form_class: str | None = None

    def to_dict(self) -> dict:
        d = {
            "j": self.j,
            "lambda": self.lam,
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "max_real": self.max_real,
            "tol": self.tol,
            "classification": self.classification,
        }
        if self.cubic is not None:
            d["cubic"] = self.cubic.to_dict()
            d["cubic_class"] = self.cubic_class
        if self.closed_form_eigs is not None:
            d["closed_form_eigenvalues"] = [
                [float(e.real), float(e.imag)] for e in self.closed_form_eigs
            ]
        if self.closed_form_class is not None:
            d["closed_form_class"] = self.closed_form_class
        return d


@dataclass
class StabilityReport:
    """Full mode-by-mode analysis of one steady state."""

    state: SteadyState
    diffusion: DiffusionMatrix
    per_mode: list
    overall: str
    turing: bool
    aux: dict
    gershgorin_lambda: float
    tail_covered: bool
    margins: DampingMargins

    def to_dict(self) -> dict:
        return {
            "state": self.state.to_dict(),
            "diffusion": self.diffusion.to_dict(),
            "overall": self.overall,
            "turing": self.turing,
            "gershgorin_lambda": self.gershgorin_lambda,
            "tail_covered": self.tail_covered,
            "aux": dict(self.aux),
            "margins": self.margins.to_dict(),
            "per_mode": [v.to_dict() for v in self.per_mode],
        }


def _verdict_from_max_real(max_real: float, tol: float) -> str:
    if abs(max_real) < tol:
        return "marginal"
    return "unstable" if max_real > 0.0 else "stable"


def _match_eigs(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest max pairwise distance over all pairings of two eig lists."""
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        d = max(abs(a[k] - b[perm[k]]) for k in range(len(a)))
        best = min(best, d)
    return best


def _quadratic_roots(m1: float, m2: float):
    """Roots of mu^2 - m1*mu + m2, complex-aware."""
    disc = m1 * m1 - 4.0 * m2
    if disc >= 0.0:
        rt = math.sqrt(disc)
        return complex(0.5 * (m1 + rt)), complex(0.5 * (m1 - rt))
    rt = math.sqrt(-disc)
    return complex(0.5 * m1, 0.5 * rt), complex(0.5 * m1, -0.5 * rt)


def _cubic_of_block(block: np.ndarray) -> CubicCoeffs:
    """Characteristic coefficients of a 3x3 block, det(mu I - block)."""
    tr = block[0, 0] + block[1, 1] + block[2, 2]
    minors = (
        block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0]
        + block[0, 0] * block[2, 2] - block[0, 2] * block[2, 0]
        + block[1, 1] * block[2, 2] - block[1, 2] * block[2, 1]
    )
    det = float(np.linalg.det(block))
    return CubicCoeffs(p=float(-tr), q=float(minors), h=float(-det))


def _cubic_verdict(cubic: CubicCoeffs, extra_real: float, tol: float):
    """Combine a cubic class with one extra real eigenvalue.

    Returns (class_string_for_report, verdict). When p <= 0 the sign
    classifier does not apply, but the trace alone decides: the root
    sum is -p >= 0, so some root has nonnegative real part.
    """
    if cubic.p <= 0.0:
        cls_str = "trace-nonnegative"
        if extra_real > tol or cubic.p < -tol:
            return cls_str, "unstable"
        return cls_str, "marginal"
    cls = classify_cubic(cubic)
    if cls in (CubicClass.HAS_POSITIVE_ROOT, CubicClass.HAS_POSITIVE_REAL_PART):
        return cls.value, "unstable"
    if cls is CubicClass.BOUNDARY and cubic.q < -tol:
        # roots -p, +/- sqrt(-q): the positive branch is a real
        # instability, not a knife edge
        return cls.value, "unstable"
    if extra_real > tol:
        return cls.value, "unstable"
    if cls is CubicClass.BOUNDARY or abs(extra_real) <= tol:
        return cls.value, "marginal"
    return cls.value, "stable"


def _closed_form(tag: str, jac: Jacobian4, diff: DiffusionMatrix, lam: float,
                 m: np.ndarray, tol: float):
    """Closed-form eigenvalues/classification for the known families.

    Returns (eigs or None, cubic or None, cubic_class or None,
    verdict or None, exact: bool). ``exact`` marks families where the
    closed form reproduces the full spectrum and is checked against the
    numeric eigenvalues at CROSSCHECK_RTOL.
    """
    j = jac.matrix
    a = diff.as_array()
    if tag == "Z1":
        eigs = np.array([complex(j[k, k] - lam * a[k]) for k in range(4)])
        order = np.lexsort((-eigs.imag, -eigs.real))
        eigs = eigs[order]
        verdict = _verdict_from_max_real(float(np.max(eigs.real)), tol)
        return eigs, None, None, verdict, True
    if tag == "Z2":
        mu1 = complex(j[0, 0] - lam * a[0])
        mu2 = complex(j[2, 2] - lam * a[2])
        m1 = (j[1, 1] - lam * a[1]) + (j[3, 3] - lam * a[3])
        m2 = (j[1, 1] - lam * a[1]) * (j[3, 3] - lam * a[3]) - j[3, 1] * j[1, 3]
        mu3, mu4 = _quadratic_roots(m1, m2)
        eigs = np.array([mu1, mu2, mu3, mu4])
        order = np.lexsort((-eigs.imag, -eigs.real))
        eigs = eigs[order]
        verdict = _verdict_from_max_real(float(np.max(eigs.real)), tol)
        return eigs, None, None, verdict, True
    if tag == "Z3":
        # B column decouples; (S, I, R) block leaves a cubic.
        block = m[:3, :3]
        cubic = _cubic_of_block(block)
        mu_b = float(m[3, 3])
        cls_str, verdict = _cubic_verdict(cubic, mu_b, tol)
        roots = np.append(cubic.roots().astype(complex), complex(mu_b))
        order = np.lexsort((-roots.imag, -roots.real))
        return roots[order], cubic, cls_str, verdict, True
    if tag.startswith("Z4"):
        # Reduced (S, I, R) cubic plus the B diagonal; drops the B
        # couplings, so only compared at classification level.
        block = m[:3, :3]
        cubic = _cubic_of_block(block)
        mu_b = float(m[3, 3])
        cls_str, verdict = _cubic_verdict(cubic, mu_b, tol)
        return None, cubic, cls_str, verdict, False
    return None, None, None, None, False


def gershgorin_tail(jac: Jacobian4, diff: DiffusionMatrix) -> float:
    """Smallest lambda beyond which all Gershgorin discs are negative.

    Row i of the mode matrix has center J_ii - lambda*a_i and radius
    R_i independent of lambda, so every row bound is negative once
    lambda exceeds (J_ii + R_i)/a_i; the bound is monotone in lambda.
    """
    j = jac.matrix
    a = diff.as_array()
    radii = np.sum(np.abs(j), axis=1) - np.abs(np.diag(j))
    thresholds = (np.diag(j) + radii) / a
    return float(max(0.0, np.max(thresholds)))


def classify_state(state, p: ModelParams, diff: DiffusionMatrix,
                   spectrum) -> StabilityReport:
    """Mode-by-mode linear stability of a steady state.

    state may be a SteadyState or a bare nonnegative 4-vector (treated
    as family 'numeric', without closed forms). spectrum must start at
    the constant mode lambda = 0.

    The overall verdict is 'unstable' if any listed mode is unstable,
    'stable' only when every listed mode is stable and the listed
    lambdas reach the Gershgorin tail threshold, and 'marginal'
    otherwise. The Turing flag marks instability that is invisible to
    well-mixed dynamics: mode 0 stable, some lambda > 0 unstable.
    """
    if isinstance(state, SteadyState):
        st = state
    else:
        arr = np.asarray(state, dtype=float).reshape(4)
        from .steady import residual as _residual
        st = SteadyState("numeric", arr, _residual(arr, p))
    if len(spectrum) < 1 or spectrum[0].lam != 0.0:
        raise ValueError("mode spectrum must start with the constant mode lambda=0")

    jac = jacobian(st.value, p, tag=st.tag)
    base_tag = "Z4" if st.tag.startswith("Z4") else st.tag
    coupling = 0.0
    if base_tag == "Z4":
        jm = jac.matrix
        coupling = math.sqrt(jm[0, 3] ** 2 + jm[1, 3] ** 2 + jm[3, 1] ** 2)

    per_mode = []
    for mode in spectrum.modes if hasattr(spectrum, "modes") else spectrum:
        m = mode_matrix(jac, diff, mode.lam)
        eigs = eigenvalues4(m)
        max_real = float(np.max(eigs.real))
        norm = float(np.linalg.norm(m))
        tol = MARGINAL_RTOL * (1.0 + norm)
        verdict = _verdict_from_max_real(max_real, tol)

        cf_eigs, cubic, cubic_cls, cf_verdict, exact = _closed_form(
            base_tag, jac, diff, mode.lam, m, tol)

        if exact and cf_eigs is not None:
            mismatch = _match_eigs(eigs, cf_eigs)
            if mismatch > CROSSCHECK_RTOL * (1.0 + norm):
                raise ConsistencyError(
                    f"{st.tag} mode {mode.j} (lambda={mode.lam:.6g}): closed-form "
                    f"eigenvalues deviate from numeric ones by {mismatch:.3e}"
                )
        if cf_verdict is not None and cf_verdict != verdict:
            disagree_hard = (
                "marginal" not in (cf_verdict, verdict)
                and abs(max_real) > tol + (0.0 if exact else coupling)
            )
            if disagree_hard:
                raise ConsistencyError(
                    f"{st.tag} mode {mode.j} (lambda={mode.lam:.6g}): closed-form "
                    f"route says {cf_verdict}, numeric eigenvalues say {verdict} "
                    f"(max real part {max_real:.3e})"
                )

        per_mode.append(ModeVerdict(
            j=mode.j, lam=mode.lam, eigenvalues=eigs, max_real=max_real,
            tol=tol, classification=verdict, cubic=cubic, cubic_class=cubic_cls,
            closed_form_eigs=cf_eigs,
            closed_form_class=cf_verdict,
        ))

    lam_g = gershgorin_tail(jac, diff)
    lam_max = max(v.lam for v in per_mode)
    tail_covered = lam_max >= lam_g

    if any(v.classification == "unstable" for v in per_mode):
        overall = "unstable"
    elif all(v.classification == "stable" for v in per_mode) and tail_covered:
        overall = "stable"
    else:
        overall = "marginal"

    turing = (per_mode[0].classification == "stable"
              and any(v.lam > 0.0 and v.classification == "unstable"
                      for v in per_mode))

    margins = damping_margins(st.value, p)
    aux = _aux_quantities(base_tag, st, p, jac, margins)

    return StabilityReport(
        state=st, diffusion=diff, per_mode=per_mode, overall=overall,
        turing=turing, aux=aux, gershgorin_lambda=lam_g,
        tail_covered=tail_covered, margins=margins,
    )


def _aux_quantities(base_tag: str, st: SteadyState, p: ModelParams,
                    jac: Jacobian4, margins: DampingMargins) -> dict:
    """Scalar diagnostics traditionally quoted for each family."""
    aux = {
        "b_slope_max": margins.b_slope_max,
        "g_slope_max": margins.g_slope_max,
        "m0": None, "M1": None, "M2": None,
        "L0": None, "p0": None, "q0": None, "h0": None,
    }
    j = jac.matrix
    if base_tag == "Z2":
        aux["m0"] = p.beta2 * st.s
        aux["M1"] = float(j[1, 1] + j[3, 3])
        aux["M2"] = float(j[1, 1] * j[3, 3] - j[3, 1] * j[1, 3])
    if base_tag == "Z4":
        cubic = _cubic_of_block(j[:3, :3])
        aux["L0"] = float(-j[0, 0])
        aux["p0"] = cubic.p
        aux["q0"] = cubic.q
        aux["h0"] = cubic.h
    return aux
