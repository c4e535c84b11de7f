"""Detector modeling, Monte Carlo shot sampling, coincidence statistics,
dark-count deduction, and sinusoidal visibility fitting.

A measurement "path" is one analysis port pair (plus/minus detectors behind
one setting).  Path outcomes are summarized by one symbol per shot:
``+`` or ``-`` for exactly one click, ``0`` for no click, ``x`` for a double
click (retained in the table, excluded from estimators).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .photonics import MeasurementSetting, basis_projectors
from .qstate import JointState, QStateError, RegisterLabel, embedded_operator

OUTCOME_SYMBOLS = ("+", "-", "0", "x")


class DetectionError(ValueError):
    """Raised for invalid detector configurations or inconsistent records."""


@dataclass(frozen=True)
class DetectorParams:
    """Single-photon detector figures: efficiency and per-window dark probability."""

    efficiency: float = 1.0
    dark_prob: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise DetectionError(f"efficiency {self.efficiency} outside [0, 1]")
        if not 0.0 <= self.dark_prob <= 1.0:
            raise DetectionError(f"dark_prob {self.dark_prob} outside [0, 1]")


@dataclass(frozen=True)
class PathSpec:
    """One analysis path: its name, detector ids, and detector parameters."""

    name: str
    plus_id: str
    minus_id: str
    plus_det: DetectorParams
    minus_det: DetectorParams

    @property
    def detector_ids(self) -> tuple[str, str]:
        return (self.plus_id, self.minus_id)


@dataclass(frozen=True)
class DetectionRecord:
    """One Monte Carlo shot: per-detector click booleans plus context."""

    shot_index: int
    setting: tuple[str, ...]
    phase: float
    clicks: Mapping[str, bool]


# ---------------------------------------------------------------------------
# quantum outcome probabilities


def path_outcome_probs(
    s: JointState, photon: RegisterLabel, setting: MeasurementSetting
) -> tuple[float, float, float]:
    """(p_plus, p_minus, p_vac) of the photon before the detector layer."""
    probs = []
    for projector in basis_projectors(setting):
        full = embedded_operator(projector, s, (photon,))
        probs.append(float(np.real(np.trace(full @ s.rho))))
    total = sum(probs)
    if abs(total - s.trace()) > 1e-9:
        raise QStateError("projector family does not resolve the state")
    return tuple(max(0.0, p) for p in probs)  # type: ignore[return-value]


def joint_outcome_probs(
    s: JointState,
    paths: Sequence[tuple[RegisterLabel, MeasurementSetting]],
) -> dict[tuple[str, ...], float]:
    """Exact joint distribution of quantum outcomes over several paths.

    Keys are tuples of symbols from ``{"+", "-", "0"}``, one per path, where
    ``0`` stands for the vacuum outcome.
    """
    symbols = ("+", "-", "0")
    projector_sets = []
    for register, setting in paths:
        projs = basis_projectors(setting)
        projector_sets.append(
            [embedded_operator(p, s, (register,)) for p in projs]
        )
    result: dict[tuple[str, ...], float] = {}

    def recurse(depth: int, rho: np.ndarray, outcome: tuple[str, ...]) -> None:
        if depth == len(projector_sets):
            result[outcome] = max(0.0, float(np.real(np.trace(rho))))
            return
        for sym, proj in zip(symbols, projector_sets[depth]):
            recurse(depth + 1, proj @ rho @ proj.conj().T, outcome + (sym,))

    recurse(0, s.rho, ())
    return result


# ---------------------------------------------------------------------------
# detector click layer


def _click_prob(photon_present: bool, det: DetectorParams) -> float:
    quantum = det.efficiency if photon_present else 0.0
    return 1.0 - (1.0 - quantum) * (1.0 - det.dark_prob)


def path_click_distribution(
    quantum_probs: tuple[float, float, float],
    plus_det: DetectorParams,
    minus_det: DetectorParams,
) -> dict[tuple[bool, bool], float]:
    """Joint click pattern distribution (plus, minus) of one path."""
    p_plus_q, p_minus_q, p_vac = quantum_probs
    dist = {pattern: 0.0 for pattern in ((False, False), (False, True), (True, False), (True, True))}
    for weight, at_plus, at_minus in (
        (p_plus_q, True, False),
        (p_minus_q, False, True),
        (p_vac, False, False),
    ):
        cp = _click_prob(at_plus, plus_det)
        cm = _click_prob(at_minus, minus_det)
        dist[(True, True)] += weight * cp * cm
        dist[(True, False)] += weight * cp * (1.0 - cm)
        dist[(False, True)] += weight * (1.0 - cp) * cm
        dist[(False, False)] += weight * (1.0 - cp) * (1.0 - cm)
    return dist


def click_probabilities(
    s: JointState,
    path: RegisterLabel,
    setting: MeasurementSetting,
    det: DetectorParams,
) -> tuple[float, float, float]:
    """Marginal click probabilities (p_plus, p_minus, p_none) of one path.

    ``p_plus``/``p_minus`` follow 1 - (1 - eta_d * p_quantum)(1 - dark) per
    detector; ``p_none`` is the joint probability that neither clicks.  The
    state must be normalized over its retained branches.
    """
    if abs(s.trace() - 1.0) > 1e-6:
        raise QStateError("state must be normalized over retained branches")
    quantum = path_outcome_probs(s, path, setting)
    dist = path_click_distribution(quantum, det, det)
    p_plus = dist[(True, False)] + dist[(True, True)]
    p_minus = dist[(False, True)] + dist[(True, True)]
    return p_plus, p_minus, dist[(False, False)]


@dataclass(frozen=True)
class ClickDistribution:
    """Exact click-pattern distribution over an ordered detector list."""

    detector_ids: tuple[str, ...]
    probabilities: dict[tuple[bool, ...], float]

    def canonical_items(self) -> list[tuple[tuple[bool, ...], float]]:
        return sorted(self.probabilities.items())


def joint_click_distribution(
    outcome_probs: Mapping[tuple[str, ...], float],
    paths: Sequence[PathSpec],
) -> ClickDistribution:
    """Convolve quantum path outcomes with the detector layer of each path."""
    detector_ids: tuple[str, ...] = tuple(
        did for path in paths for did in path.detector_ids
    )
    acc: dict[tuple[bool, ...], float] = {}
    for outcome, weight in outcome_probs.items():
        if len(outcome) != len(paths):
            raise DetectionError("outcome arity does not match path count")
        partial: list[tuple[tuple[bool, ...], float]] = [((), weight)]
        for sym, path in zip(outcome, paths):
            quantum = {
                "+": (1.0, 0.0, 0.0),
                "-": (0.0, 1.0, 0.0),
                "0": (0.0, 0.0, 1.0),
            }[sym]
            dist = path_click_distribution(quantum, path.plus_det, path.minus_det)
            partial = [
                (pattern + pair, w * p)
                for pattern, w in partial
                for pair, p in dist.items()
            ]
        for pattern, w in partial:
            acc[pattern] = acc.get(pattern, 0.0) + w
    return ClickDistribution(detector_ids, acc)


# ---------------------------------------------------------------------------
# sampling


def sample_shots(
    dist: ClickDistribution,
    n: int,
    seed: int,
    setting: tuple[str, ...] = (),
    phase: float = 0.0,
) -> list[DetectionRecord]:
    """Draw ``n`` shots from a click-pattern distribution.

    Uses the counter-based Philox generator, so shot ``i`` depends only on
    ``(seed, i)`` and resampling with the same seed is bit-identical.
    """
    indices = sample_pattern_indices(dist, n, seed)
    patterns = [p for p, _ in dist.canonical_items()]
    records = []
    for shot, idx in enumerate(indices):
        clicks = dict(zip(dist.detector_ids, patterns[idx]))
        records.append(DetectionRecord(shot, setting, phase, clicks))
    return records


def sample_pattern_indices(dist: ClickDistribution, n: int, seed: int) -> np.ndarray:
    """Vectorized pattern sampling; indices refer to ``canonical_items`` order."""
    if n < 0:
        raise DetectionError("trial count must be >= 0")
    items = dist.canonical_items()
    probs = np.array([p for _, p in items])
    if probs.size == 0 or abs(probs.sum() - 1.0) > 1e-9 or np.any(probs < -1e-12):
        raise DetectionError("pattern probabilities must sum to 1")
    edges = np.cumsum(probs)
    edges[-1] = 1.0
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    uniforms = rng.random(n)
    return np.searchsorted(edges, uniforms, side="right")


# ---------------------------------------------------------------------------
# coincidence tables


@dataclass
class PointTally:
    """Counts of joint path-outcome patterns at one (phase, setting) point.

    Keys are one symbol per path (herald path first).  All trials are
    accounted for: heralded coincidences, herald-only, signal-without-herald,
    empty shots, and double-click shots (symbol ``x``).
    """

    counts: dict[tuple[str, ...], float] = field(default_factory=dict)
    trials: float = 0.0

    def add(self, pattern: tuple[str, ...], weight: float = 1.0) -> None:
        self.counts[pattern] = self.counts.get(pattern, 0.0) + weight

    def heralded(self) -> float:
        return sum(w for p, w in self.counts.items() if p[0] in ("+", "-"))

    def coincidences(self) -> dict[tuple[str, ...], float]:
        """Patterns with exactly one click on the herald and every signal path."""
        return {
            p: w
            for p, w in self.counts.items()
            if p[0] in ("+", "-") and all(sym in ("+", "-") for sym in p[1:])
        }


@dataclass
class CoincidenceTable:
    """Per-(phase, setting) outcome tallies for a fixed path list."""

    paths: tuple[str, ...]
    points: dict[tuple[float, str], PointTally] = field(default_factory=dict)

    def point(self, phase: float, setting: str) -> PointTally:
        key = (phase, setting)
        if key not in self.points:
            self.points[key] = PointTally()
        return self.points[key]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["phase_rad", "setting", "pattern", "count", "trials"])
        for (phase, setting) in sorted(self.points):
            tally = self.points[(phase, setting)]
            for pattern in sorted(tally.counts):
                writer.writerow(
                    [
                        repr(float(phase)),
                        setting,
                        "/".join(pattern),
                        repr(float(tally.counts[pattern])),
                        repr(float(tally.trials)),
                    ]
                )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, paths: tuple[str, ...]) -> "CoincidenceTable":
        table = cls(paths)
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != ["phase_rad", "setting", "pattern", "count", "trials"]:
            raise DetectionError("unexpected coincidence CSV header")
        for row in reader:
            phase, setting, pattern, count, trials = row
            tally = table.point(float(phase), setting)
            tally.add(tuple(pattern.split("/")), float(count))
            tally.trials = float(trials)
        return table


def classify_path(plus_click: bool, minus_click: bool) -> str:
    if plus_click and minus_click:
        return "x"
    if plus_click:
        return "+"
    if minus_click:
        return "-"
    return "0"


def pattern_from_clicks(
    clicks: Mapping[str, bool], paths: Sequence[PathSpec]
) -> tuple[str, ...]:
    try:
        return tuple(
            classify_path(clicks[p.plus_id], clicks[p.minus_id]) for p in paths
        )
    except KeyError as exc:
        raise DetectionError(f"unknown detector id {exc}") from None


def coincidence_tally(
    records: Iterable[DetectionRecord],
    paths: Sequence[PathSpec],
    phase: float,
    setting: str,
    table: CoincidenceTable | None = None,
) -> CoincidenceTable:
    """Fold detection records into a coincidence table.

    The herald path is ``paths[0]``.  Trials without a herald click stay in
    the totals (and their signal outcomes are kept for accidental-coincidence
    estimation) but are excluded from coincidence cells by construction.
    """
    if table is None:
        table = CoincidenceTable(tuple(p.name for p in paths))
    tally = table.point(phase, setting)
    for record in records:
        tally.add(pattern_from_clicks(record.clicks, paths))
        tally.trials += 1.0
    return table


def tally_from_click_weights(
    weights: Mapping[tuple[bool, ...], float],
    detector_ids: Sequence[str],
    paths: Sequence[PathSpec],
    trials: float,
    phase: float,
    setting: str,
    table: CoincidenceTable | None = None,
) -> CoincidenceTable:
    """Tally kernel shared by the analytic and the vectorized sampled modes."""
    if table is None:
        table = CoincidenceTable(tuple(p.name for p in paths))
    tally = table.point(phase, setting)
    for click_pattern, weight in sorted(weights.items()):
        clicks = dict(zip(detector_ids, click_pattern))
        tally.add(pattern_from_clicks(clicks, paths), weight)
    tally.trials += trials
    return table


# ---------------------------------------------------------------------------
# dark-count deduction


def _dark_observation_matrix(dark: float) -> np.ndarray:
    """Per-path kernel mapping true outcome symbols to observed ones.

    Column order follows OUTCOME_SYMBOLS; entry [obs, true] is the
    probability that independent dark clicks turn ``true`` into ``obs``.
    """
    d = dark
    m = np.zeros((4, 4))
    m[0, 0] = 1.0 - d          # "+" survives unless the minus detector darks
    m[3, 0] = d
    m[1, 1] = 1.0 - d
    m[3, 1] = d
    m[0, 2] = d * (1.0 - d)    # empty path gains a lone dark click
    m[1, 2] = d * (1.0 - d)
    m[2, 2] = (1.0 - d) ** 2
    m[3, 2] = d * d
    m[3, 3] = 1.0
    return m


def deduct_dark_counts(
    table: CoincidenceTable,
    darks: DetectorParams | Mapping[str, float],
    trials_per_point: float | None = None,
) -> CoincidenceTable:
    """Remove the expected accidental (dark-click) contribution per cell.

    Inverts, path by path, the exact observation kernel of independent dark
    clicks, then floors cells at zero.  With ``dark_prob = 0`` the table is
    returned unchanged (up to copying); totals are preserved because dark
    clicks never change the trial count.
    """
    if isinstance(darks, DetectorParams):
        dark_of = {name: darks.dark_prob for name in table.paths}
    else:
        dark_of = dict(darks)
        missing = set(table.paths) - set(dark_of)
        if missing:
            raise DetectionError(f"missing dark_prob for path(s) {sorted(missing)}")

    sym_index = {sym: i for i, sym in enumerate(OUTCOME_SYMBOLS)}
    corrected = CoincidenceTable(table.paths)
    n_paths = len(table.paths)
    for key, tally in table.points.items():
        # dense tensor over symbol space, one axis per path
        tensor = np.zeros((4,) * n_paths)
        for pattern, count in tally.counts.items():
            tensor[tuple(sym_index[s] for s in pattern)] = count
        for axis, name in enumerate(table.paths):
            inv = np.linalg.inv(_dark_observation_matrix(dark_of[name]))
            tensor = np.tensordot(inv, tensor, axes=([1], [axis]))
            tensor = np.moveaxis(tensor, 0, axis)
        tensor = np.maximum(tensor, 0.0)
        out = corrected.point(*key)
        out.trials = tally.trials if trials_per_point is None else trials_per_point
        for index in np.ndindex(*tensor.shape):
            value = float(tensor[index])
            if value > 0.0:
                out.add(tuple(OUTCOME_SYMBOLS[i] for i in index), value)
    return corrected


# ---------------------------------------------------------------------------
# visibility fitting


def deducted_count_variances(
    table: CoincidenceTable,
    darks: DetectorParams | Mapping[str, float],
) -> CoincidenceTable:
    """Poisson-propagated variances of the dark-deducted counts.

    The deducted table is a fixed linear transform of the observed counts,
    so each corrected cell's variance is the squared-kernel image of the
    observed counts (treating cells as independent Poisson variates).  The
    returned table carries variances in place of counts.
    """
    if isinstance(darks, DetectorParams):
        dark_of = {name: darks.dark_prob for name in table.paths}
    else:
        dark_of = dict(darks)
        missing = set(table.paths) - set(dark_of)
        if missing:
            raise DetectionError(f"missing dark_prob for path(s) {sorted(missing)}")
    sym_index = {sym: i for i, sym in enumerate(OUTCOME_SYMBOLS)}
    out_table = CoincidenceTable(table.paths)
    n_paths = len(table.paths)
    for key, tally in table.points.items():
        tensor = np.zeros((4,) * n_paths)
        for pattern, count in tally.counts.items():
            tensor[tuple(sym_index[s] for s in pattern)] = count
        for axis, name in enumerate(table.paths):
            inv_sq = np.linalg.inv(_dark_observation_matrix(dark_of[name])) ** 2
            tensor = np.tensordot(inv_sq, tensor, axes=([1], [axis]))
            tensor = np.moveaxis(tensor, 0, axis)
        out = out_table.point(*key)
        out.trials = tally.trials
        for index in np.ndindex(*tensor.shape):
            value = float(tensor[index])
            if value > 0.0:
                out.add(tuple(OUTCOME_SYMBOLS[i] for i in index), value)
    return out_table


def fit_visibility(
    series: Sequence[tuple[float, float, float]],
) -> tuple[float, float, float]:
    """Weighted least-squares fit of f(theta) = (1 + V sin(theta + phi))/2.

    ``series`` holds (phase, normalized correlated fraction, trials) points.
    The linear parameterization (a, b) = (V cos phi, V sin phi) enforces
    V >= 0 by construction; weights are binomial.  Returns (V, phi, V_err).
    """
    if len(series) < 4:
        raise DetectionError("need at least 4 phase points")
    phases = np.array([p for p, _, _ in series], dtype=float)
    fractions = np.array([f for _, f, _ in series], dtype=float)
    trials = np.array([t for _, _, t in series], dtype=float)
    if len(np.unique(np.round(phases, 12))) < 4:
        raise DetectionError("need at least 4 distinct phases")
    if np.ptp(phases) <= np.pi:
        raise DetectionError("phase grid must span more than pi")
    if np.any(trials <= 0.0):
        raise DetectionError("trials must be positive")

    # binomial weights with a guard against zero variance at f in {0, 1}
    clipped = np.clip(fractions, 1.0 / (trials + 2.0), 1.0 - 1.0 / (trials + 2.0))
    variance = clipped * (1.0 - clipped) / trials
    weights = 1.0 / variance

    design = np.column_stack([np.sin(phases) / 2.0, np.cos(phases) / 2.0])
    target = fractions - 0.5
    wdesign = design * weights[:, None]
    normal = design.T @ wdesign
    rhs = wdesign.T @ target
    try:
        coeffs = np.linalg.solve(normal, rhs)
        covariance = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise DetectionError(f"singular visibility fit: {exc}") from None
    a, b = coeffs
    v = float(np.hypot(a, b))
    phi = float(np.arctan2(b, a))
    if v > 1e-12:
        grad = np.array([a, b]) / v
        v_var = float(grad @ covariance @ grad)
    else:
        v_var = float(np.max(np.linalg.eigvalsh(covariance)))
    v_clipped = min(v, 1.0)
    return v_clipped, phi, float(np.sqrt(max(v_var, 0.0)))


def herald_efficiency(eta_sr_prime: float, eta_t: float, eta_d: float) -> float:
    """Per-attempt herald detection probability: the product of the three."""
    for name, value in (
        ("eta_sr_prime", eta_sr_prime),
        ("eta_t", eta_t),
        ("eta_d", eta_d),
    ):
        if not 0.0 <= value <= 1.0:
            raise DetectionError(f"{name}={value} outside [0, 1]")
    return eta_sr_prime * eta_t * eta_d


def binomial_stderr(p: float, n: float) -> float:
    """Standard error of a binomial fraction estimate."""
    if n <= 0:
        return float("nan")
    p = min(max(p, 0.0), 1.0)
    return float(np.sqrt(p * (1.0 - p) / n))
