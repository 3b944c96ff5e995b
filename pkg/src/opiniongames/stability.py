"""Linear stability toolkit for the two-player two-option opinion model.

For two players with two options each, the opinion-coupling matrix has
the closed form Gamma (x) H2 with H2 = [[1, -1], [-1, 1]] and a 2x2
Gamma whose entries combine softmax moments of the nominal opinions
with differences of the per-tuple game values. This module provides
that decomposition, Kronecker/shift spectra, executable checks of the
instability and stability conditions, and the scalar diagnostics used
to reason about them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .opinion import softmax

H2 = np.array([[1.0, -1.0], [-1.0, 1.0]])

MARGINAL_BAND = 1e-9


def _phi_b(zbar):
    s = softmax(zbar)
    return float(s[0] * s[1])


def _phi_a(zbar):
    s = softmax(zbar)
    return float((s[0] - s[1]) * s[0] * s[1])


@dataclass(frozen=True)
class GammaDecomposition:
    """Closed-form factors of the 4x4 opinion-coupling matrix."""

    a1: float
    a2: float
    b1: float
    b2: float

    @property
    def gamma(self) -> np.ndarray:
        return np.array([[self.a1, self.b1], [self.b2, self.a2]])

    def system_matrix(self) -> np.ndarray:
        return np.kron(self.gamma, H2)

    def spectrum(self) -> np.ndarray:
        """Eigenvalues {0, 0, a1+a2 +/- sqrt((a1-a2)^2 + 4 b1 b2)}."""
        disc = complex((self.a1 - self.a2) ** 2 + 4.0 * self.b1 * self.b2) ** 0.5
        s = self.a1 + self.a2
        return np.array([0.0, 0.0, s + disc, s - disc], dtype=complex)


def gamma_decomposition(zbar1, zbar2, v1, v2) -> GammaDecomposition:
    """Decompose the coupling matrix for given nominal opinions and values.

    ``v1``/``v2`` are each player's 2x2 value table indexed
    [own option... when the player is player 1: rows are player 1's
    option, columns player 2's; both tables share that orientation].
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != (2, 2) or v2.shape != (2, 2):
        raise ValueError("the decomposition needs 2x2 value tables")
    s1 = softmax(zbar1)
    s2 = softmax(zbar2)
    if len(s1) != 2 or len(s2) != 2:
        raise ValueError("the decomposition needs two options per player")
    a1 = _phi_a(zbar1) * (s2[0] * (v1[0, 0] - v1[1, 0]) + s2[1] * (v1[0, 1] - v1[1, 1]))
    a2 = _phi_a(zbar2) * (s1[0] * (v2[0, 0] - v2[0, 1]) + s1[1] * (v2[1, 0] - v2[1, 1]))
    pb = _phi_b(zbar1) * _phi_b(zbar2)
    b1 = pb * (-v1[0, 0] - v1[1, 1] + v1[0, 1] + v1[1, 0])
    b2 = pb * (-v2[0, 0] - v2[1, 1] + v2[0, 1] + v2[1, 0])
    return GammaDecomposition(a1=float(a1), a2=float(a2), b1=float(b1), b2=float(b2))


def kron_spectrum(A, B) -> np.ndarray:
    """Spectrum of A (x) B: all pairwise eigenvalue products."""
    A = np.atleast_2d(np.asarray(A))
    B = np.atleast_2d(np.asarray(B))
    if A.shape[0] != A.shape[1] or B.shape[0] != B.shape[1]:
        raise ValueError("kron_spectrum needs square inputs")
    mu = np.linalg.eigvals(A)
    nu = np.linalg.eigvals(B)
    prods = np.array([m * n for m in mu for n in nu])
    return _sorted_complex(prods)


def shifted_spectrum(d, c, H) -> np.ndarray:
    """Spectrum of d*I + c*H."""
    H = np.atleast_2d(np.asarray(H))
    if H.shape[0] != H.shape[1]:
        raise ValueError("shifted_spectrum needs a square matrix")
    return _sorted_complex(d + c * np.linalg.eigvals(H))


def _sorted_complex(vals) -> np.ndarray:
    vals = np.asarray(vals, dtype=complex)
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def closed_loop_matrix(d, lam, dec: GammaDecomposition) -> np.ndarray:
    """Linearized opinion dynamics -D + lam * (Gamma (x) H2) with D = d*I."""
    return -d * np.eye(4) + lam * dec.system_matrix()


@dataclass(frozen=True)
class Theorem1Result:
    condition_holds: bool
    predicted_unstable: bool
    threshold: float          # 2 lam Re(sqrt(b1 b2))
    max_real_part: float      # of -D + lam * coupling, for cross-validation


def check_theorem1(d, lam, dec: GammaDecomposition) -> Theorem1Result:
    """Instability of the neutral-opinion equilibrium.

    With both nominal opinions neutral the equilibrium is unstable iff
    d < 2 lam Re(sqrt(b1 b2)); the eigenvalues of the linearization are
    returned alongside for cross-checking.
    """
    root = complex(dec.b1 * dec.b2) ** 0.5
    threshold = 2.0 * lam * root.real
    condition = d < threshold
    max_re = float(np.max(np.linalg.eigvals(closed_loop_matrix(d, lam, dec)).real))
    return Theorem1Result(
        condition_holds=bool(condition),
        predicted_unstable=bool(condition),
        threshold=float(threshold),
        max_real_part=max_re,
    )


@dataclass(frozen=True)
class Theorem2Result:
    hypotheses_hold: bool
    predicted_stable: bool
    favored: tuple
    max_real_part: float


def check_theorem2(zbar1, zbar2, v1, v2, d=1e-6, lam=1.0) -> Theorem2Result:
    """Stability of formed opinions that agree with the game values.

    Hypotheses: each player strictly favors one option, the favored
    tuple has strictly lower value than switching one's own option away
    from it, and a1 a2 > b1 b2. Ties fail the hypotheses.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    s1, s2 = softmax(zbar1), softmax(zbar2)
    l1 = int(np.argmax(s1))
    l2 = int(np.argmax(s2))
    strict_opinions = s1[l1] > s1[1 - l1] and s2[l2] > s2[1 - l2]
    values_match = (v1[l1, l2] < v1[1 - l1, l2]) and (v2[l1, l2] < v2[l1, 1 - l2])
    dec = gamma_decomposition(zbar1, zbar2, v1, v2)
    saddle_free = dec.a1 * dec.a2 > dec.b1 * dec.b2
    hypotheses = bool(strict_opinions and values_match and saddle_free)
    max_re = float(np.max(np.linalg.eigvals(closed_loop_matrix(d, lam, dec)).real))
    return Theorem2Result(
        hypotheses_hold=hypotheses,
        predicted_stable=hypotheses,
        favored=(l1, l2),
        max_real_part=max_re,
    )


def check_corollary1(v1, v2, tol=1e-9) -> bool:
    """True when neither player's value distinguishes its own options.

    In that case the coupling matrix vanishes and deviations decay at
    the damping rate.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    return bool(
        abs(v1[0, 0] - v1[1, 0]) <= tol and abs(v1[0, 1] - v1[1, 1]) <= tol
        and abs(v2[0, 0] - v2[0, 1]) <= tol and abs(v2[1, 0] - v2[1, 1]) <= tol
    )


@dataclass(frozen=True)
class StabilityReport:
    decomposition: GammaDecomposition
    spectrum: np.ndarray
    max_real_part: float
    verdict: str
    theorem1: Theorem1Result
    theorem2: Theorem2Result
    corollary1: bool
    v_b: float
    v_a: float
    v_prime: float


def stability_report(v1, v2, zbar1, zbar2, d, lam) -> StabilityReport:
    """Evaluate all checks for one value table and nominal opinion pair."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    dec = gamma_decomposition(zbar1, zbar2, v1, v2)
    spec = _sorted_complex(np.linalg.eigvals(closed_loop_matrix(d, lam, dec)))
    max_re = float(spec.real.max())
    if max_re > MARGINAL_BAND:
        verdict = "unstable"
    elif max_re < -MARGINAL_BAND:
        verdict = "stable"
    else:
        verdict = "marginal"
    v_b = float((-v1[0, 0] - v1[1, 1] + v1[0, 1] + v1[1, 0])
                * (-v2[0, 0] - v2[1, 1] + v2[0, 1] + v2[1, 0]))
    v_a = float((v1[0, 0] - v1[1, 0]) * (v2[0, 0] - v2[0, 1]))
    v_prime = v_a / v_b if v_b != 0.0 else float("nan")
    return StabilityReport(
        decomposition=dec,
        spectrum=spec,
        max_real_part=max_re,
        verdict=verdict,
        theorem1=check_theorem1(d, lam, dec),
        theorem2=check_theorem2(zbar1, zbar2, v1, v2, d=d, lam=lam),
        corollary1=check_corollary1(v1, v2),
        v_b=v_b,
        v_a=v_a,
        v_prime=v_prime,
    )


def format_report(report: StabilityReport) -> str:
    dec = report.decomposition
    spec = ", ".join(
        f"{ev.real:+.6g}{ev.imag:+.6g}j" if abs(ev.imag) > 1e-12 else f"{ev.real:+.6g}"
        for ev in report.spectrum
    )
    lines = [
        "opinion stability report",
        f"  gamma entries: a1={dec.a1:.6g} a2={dec.a2:.6g} "
        f"b1={dec.b1:.6g} b2={dec.b2:.6g}",
        f"  spectrum of -D + lam*coupling: [{spec}]",
        f"  max real part: {report.max_real_part:.6g}",
        f"  verdict: {report.verdict}",
        f"  neutral-instability condition d < {report.theorem1.threshold:.6g}: "
        f"{report.theorem1.condition_holds}",
        f"  formed-opinion hypotheses hold: {report.theorem2.hypotheses_hold} "
        f"(favored tuple {report.theorem2.favored})",
        f"  identical-values case: {report.corollary1}",
        f"  diagnostics: V_b={report.v_b:.6g} V_a={report.v_a:.6g} "
        f"V'={report.v_prime:.6g}",
    ]
    return "\n".join(lines)
