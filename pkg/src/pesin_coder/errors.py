"""Exception types shared across the package.

Every error carries enough context (witness point, failing index, violated
bound) to reproduce the failure from a report line.
"""
from __future__ import annotations


class PesinCoderError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------- geometry
class GrazingCollision(PesinCoderError):
    """Ray meets the boundary tangentially (|cos theta'| below tolerance)."""


class CornerHit(PesinCoderError):
    """Traced ray lands on a boundary junction within tolerance."""


class NoIntersection(PesinCoderError):
    """Ray-boundary intersection search failed (geometry inconsistency)."""


class AssumptionViolated(PesinCoderError):
    """A regularity assumption fails at a sampled point.

    Attributes: assumption_id (str, e.g. "A5"), witness (the offending point),
    margin (signed; negative = violated).
    """

    def __init__(self, assumption_id: str, witness, margin: float):
        self.assumption_id = assumption_id
        self.witness = witness
        self.margin = margin
        super().__init__(f"{assumption_id} violated (margin {margin:.3e}) at {witness}")


# ---------------------------------------------------------------- cocycle
class OrbitHitsDiscontinuity(PesinCoderError):
    """Orbit generation failed at step n (grazing/corner/escape)."""

    def __init__(self, n: int, reason: str = ""):
        self.n = n
        self.reason = reason
        super().__init__(f"orbit hits discontinuity at step {n}: {reason}")


class SplittingNotConverged(PesinCoderError):
    """Push-forward directions keep oscillating; no hyperbolic splitting."""


class SeriesDiverging(PesinCoderError):
    """Partial sums of the s/u series grow past the configured cap."""


class DegenerateAngle(PesinCoderError):
    """|sin(angle between e_s and e_u)| below 1e-12."""


class NotDiagonal(PesinCoderError):
    """Reduced cocycle has off-diagonal mass above tolerance."""


class NotHyperbolic(PesinCoderError):
    """Reduced cocycle diagonal fails |A| < e^-chi or |B| > e^chi."""


class InequalityViolated(PesinCoderError):
    """A per-point inequality check failed (carries the witness index)."""

    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


# ---------------------------------------------------------------- charts
class OutOfDomain(PesinCoderError):
    """Chart argument outside R[eta] or point outside the chart image."""


class DomainEscape(PesinCoderError):
    """Image of a chart-coordinate map leaves the target chart domain."""


class BoundViolated(PesinCoderError):
    """A measured norm exceeds its asserted bound.

    Attributes: bound_name, measured, allowed.
    """

    def __init__(self, bound_name: str, measured: float, allowed: float):
        self.bound_name = bound_name
        self.measured = measured
        self.allowed = allowed
        super().__init__(f"{bound_name}: measured {measured:.6e} > allowed {allowed:.6e}")


class OverlapMissing(PesinCoderError):
    """chart_map_fxy called on charts that do not pass the overlap test."""


# ---------------------------------------------------------------- manifolds
class AdmissibilityViolated(PesinCoderError):
    """One of the three admissibility conditions fails.

    Attributes: condition (str: "AM1"|"AM2"|"AM3"), measured, allowed.
    """

    def __init__(self, condition: str, measured: float, allowed: float):
        self.condition = condition
        self.measured = measured
        self.allowed = allowed
        super().__init__(f"{condition}: measured {measured:.6e} > allowed {allowed:.6e}")


class GraphFolded(PesinCoderError):
    """Transformed graph lost monotonicity of the projected coordinate."""


class ContractionViolated(PesinCoderError):
    """Measured graph-transform contraction factor exceeds its bound."""


class NotConverged(PesinCoderError):
    """Manifold iteration did not reach the convergence cutoff."""


class MultipleIntersections(PesinCoderError):
    """Sign scan found more than one stable/unstable crossing."""


class ShadowEscape(PesinCoderError):
    """Shadowed orbit leaves a chart window.

    Attribute: n (first violating index).
    """

    def __init__(self, n: int, message: str = ""):
        self.n = n
        super().__init__(message or f"shadowed orbit escapes chart window at index {n}")


# ---------------------------------------------------------------- coding
class NoBinCenter(PesinCoderError):
    """No selected alphabet center covers this orbit point's bin.

    Attributes: n (orbit index), signature (the missing bin signature).
    """

    def __init__(self, n: int, signature=None):
        self.n = n
        self.signature = signature
        super().__init__(f"no alphabet center covers orbit index {n} (bin {signature})")


class EmptyAlphabet(PesinCoderError):
    """Coarse graining produced no vertices (sampling too sparse)."""


class DiagnosticFailed(PesinCoderError):
    """An inverse-theorem diagnostic item failed.

    Attributes: item (int 1..6 or str), n (index).
    """

    def __init__(self, item, n: int, message: str = ""):
        self.item = item
        self.n = n
        super().__init__(message or f"double-coding diagnostic item {item} failed at index {n}")


# ---------------------------------------------------------------- markov
class EmptyCover(PesinCoderError):
    """No Z-sets could be built from the itinerary corpus."""


class CylinderEmpty(PesinCoderError):
    """A realized word has an empty cylinder at sample resolution."""
