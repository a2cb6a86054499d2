"""Basic COCOMO effort estimation with the four-phase activity split."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonpositiveKloc, UnknownMode

MODES = ("ORGANIC", "SEMI_DETACHED", "EMBEDDED")

# effort = a * kloc ** b. The standard Basic COCOMO constants; deployments
# may override them through server config (cocomo.organic.a etc.).
DEFAULT_COEFFICIENTS: dict[str, tuple[float, float]] = {
    "ORGANIC": (2.4, 1.05),
    "SEMI_DETACHED": (3.0, 1.12),
    "EMBEDDED": (3.6, 1.20),
}

# Fixed 20/20/17/43 split of total effort across activities.
PHASE_SPLIT: tuple[tuple[str, float], ...] = (
    ("Engineering", 0.20),
    ("Design", 0.20),
    ("Code and unit or module test", 0.17),
    ("System Test and Integration", 0.43),
)


@dataclass(frozen=True)
class CocomoEstimate:
    kloc: float
    mode: str
    effort_pm: float
    phases: tuple[tuple[str, float], ...]


def normalize_mode(mode: str) -> str:
    candidate = mode.strip().upper().replace("-", "_").replace(" ", "_")
    if candidate not in MODES:
        raise UnknownMode(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    return candidate


def estimate_effort(kloc: float, mode: str,
                    coefficients: dict[str, tuple[float, float]] | None = None) -> float:
    """Person-months of effort for ``kloc`` thousand delivered source lines."""
    if not kloc > 0:
        raise NonpositiveKloc(f"kloc must be positive, got {kloc}")
    mode = normalize_mode(mode)
    a, b = (coefficients or DEFAULT_COEFFICIENTS)[mode]
    return a * kloc ** b


def phase_breakdown(effort_pm: float) -> tuple[tuple[str, float], ...]:
    """Split total effort across the four activities, in table order."""
    if not effort_pm > 0:
        raise ValueError(f"effort must be positive, got {effort_pm}")
    return tuple((phase, effort_pm * fraction) for phase, fraction in PHASE_SPLIT)


def estimate(kloc: float, mode: str,
             coefficients: dict[str, tuple[float, float]] | None = None) -> CocomoEstimate:
    mode = normalize_mode(mode)
    effort = estimate_effort(kloc, mode, coefficients)
    return CocomoEstimate(kloc=kloc, mode=mode, effort_pm=effort,
                          phases=phase_breakdown(effort))
