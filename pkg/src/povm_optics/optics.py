"""Optical components, the circuit IR, and lowering of block factorizations.

Circuits index paths from 1 and polarizations as H (0) and V (1); the
amplitude of path ``k`` with polarization ``s`` sits at ``2(k-1) + s``.
Stages are listed in the order light meets them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cossin
from scipy.optimize import least_squares

from .core import (
    STRUCT_TOL,
    DomainError,
    StructureError,
    as_matrix,
    dagger,
    frozen,
    max_abs,
)
from .neumark import SENTINEL, DilationResult
from .synthesis import (
    VERIFY_TOL,
    MzFactorization,
    basis_mapping_unitary,
    input_columns,
    path_slice,
    reconstruct,
)

HWP = "HWP"
QWP = "QWP"
PHASE = "PhaseShifter"
BS = "BeamSplitter5050"
PBS = "PBS"
DETECTOR = "Detector"
STAGE_KINDS = (HWP, QWP, PHASE, BS)

TWO_PI = 2.0 * math.pi
_SQRT_HALF = 1.0 / math.sqrt(2.0)

#: 50:50 path map sending (|1> + i|2>)/sqrt2 to |1> and (|1> - i|2>)/sqrt2 to |2>.
BS_PATH_MATRIX = _SQRT_HALF * np.array([[1, -1j], [1, 1j]])


def rotation(theta_rad: float) -> np.ndarray:
    c, s = math.cos(theta_rad), math.sin(theta_rad)
    return np.array([[c, -s], [s, c]], dtype=complex)


def hwp_matrix(theta_deg: float) -> np.ndarray:
    t = math.radians(2.0 * theta_deg)
    return np.array([[math.cos(t), math.sin(t)], [math.sin(t), -math.cos(t)]], dtype=complex)


def qwp_matrix(theta_deg: float) -> np.ndarray:
    """``R(theta) diag(1, i) R(-theta)``."""
    t = math.radians(theta_deg)
    return rotation(t) @ np.diag([1.0, 1j]) @ rotation(-t)


def _wrap_angle(theta_deg: float) -> float:
    out = float(theta_deg) % 180.0
    return 0.0 if out >= 180.0 else out


def _wrap_phase(phi: float) -> float:
    out = float(phi) % TWO_PI
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class Component:
    """A single optical element.

    Wave plates carry ``theta_deg`` (normalized to [0, 180)), phase shifters
    ``phi_rad`` (normalized to [0, 2pi)). Single-path elements set ``path``;
    the beam splitter sets ``paths``, whose first entry plays the role of
    path 1 in its path map.
    """

    kind: str
    path: int | None = None
    paths: tuple[int, int] | None = None
    theta_deg: float | None = None
    phi_rad: float | None = None

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise StructureError(f"unknown stage kind {self.kind!r}")
        if self.kind == BS:
            if self.paths is None or len(self.paths) != 2 or self.paths[0] == self.paths[1]:
                raise StructureError("a beam splitter needs two distinct paths")
            object.__setattr__(self, "paths", (int(self.paths[0]), int(self.paths[1])))
        elif self.path is None:
            raise StructureError(f"{self.kind} needs a path")
        if self.kind in (HWP, QWP):
            if self.theta_deg is None:
                raise StructureError(f"{self.kind} needs theta_deg")
            object.__setattr__(self, "theta_deg", _wrap_angle(self.theta_deg))
        if self.kind == PHASE:
            if self.phi_rad is None:
                raise StructureError("PhaseShifter needs phi_rad")
            object.__setattr__(self, "phi_rad", _wrap_phase(self.phi_rad))

    @property
    def touched_paths(self) -> tuple[int, ...]:
        return self.paths if self.kind == BS else (self.path,)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind in (HWP, QWP):
            out["theta_deg"] = self.theta_deg
        elif self.kind == PHASE:
            out["phi_rad"] = self.phi_rad
        if self.kind == BS:
            out["paths"] = list(self.paths)
        else:
            out["path"] = self.path
        return out

    @classmethod
    def from_dict(cls, d: dict) -> Component:
        paths = d.get("paths")
        return cls(
            kind=d["kind"],
            path=d.get("path"),
            paths=tuple(paths) if paths is not None else None,
            theta_deg=d.get("theta_deg"),
            phi_rad=d.get("phi_rad"),
        )


def hwp(theta_deg: float, path: int) -> Component:
    return Component(HWP, path=path, theta_deg=theta_deg)


def qwp(theta_deg: float, path: int) -> Component:
    return Component(QWP, path=path, theta_deg=theta_deg)


def phase_shifter(phi_rad: float, path: int) -> Component:
    return Component(PHASE, path=path, phi_rad=phi_rad)


def beam_splitter(first: int, second: int) -> Component:
    return Component(BS, paths=(first, second))


def component_unitary(c: Component) -> np.ndarray:
    """Jones matrix (2x2) of a single-path element, or the 4x4 beam-splitter map."""
    if c.kind == HWP:
        return hwp_matrix(c.theta_deg)
    if c.kind == QWP:
        return qwp_matrix(c.theta_deg)
    if c.kind == PHASE:
        return np.exp(1j * c.phi_rad) * np.eye(2)
    return np.kron(BS_PATH_MATRIX, np.eye(2))


@dataclass(frozen=True)
class Detector:
    path: int
    port: str
    label: str

    @property
    def is_sentinel(self) -> bool:
        return self.label == SENTINEL

    @property
    def index(self) -> int:
        return 2 * (self.path - 1) + (0 if self.port == "H" else 1)


@dataclass(frozen=True)
class OpticalCircuit:
    """Stages followed by one PBS per path whose H and V ports feed labeled detectors."""

    n_paths: int
    stages: tuple[Component, ...]
    detectors: tuple[Detector, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if self.n_paths < 1:
            raise StructureError("a circuit needs at least one path")
        for s in self.stages:
            for k in s.touched_paths:
                if not 1 <= k <= self.n_paths:
                    raise StructureError(f"{s.kind} placed on path {k} of a {self.n_paths}-path circuit")
        ports = sorted((d.path, d.port) for d in self.detectors)
        expected = sorted((k, port) for k in range(1, self.n_paths + 1) for port in "HV")
        if ports != expected:
            raise StructureError("every path must end in a PBS with one H and one V detector")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(d.label for d in self.detectors)

    def count(self, kind: str) -> int:
        return sum(s.kind == kind for s in self.stages)

    def to_dict(self) -> dict:
        out = {
            "n_paths": self.n_paths,
            "stages": [s.to_dict() for s in self.stages],
            "detectors": [{"path": d.path, "port": d.port, "label": d.label} for d in self.detectors],
        }
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> OpticalCircuit:
        try:
            return cls(
                n_paths=int(data["n_paths"]),
                stages=tuple(Component.from_dict(s) for s in data["stages"]),
                detectors=tuple(Detector(int(d["path"]), str(d["port"]), str(d["label"])) for d in data["detectors"]),
                name=str(data.get("name", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, StructureError):
                raise
            raise StructureError(f"malformed circuit document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> OpticalCircuit:
        return cls.from_dict(json.loads(text))


def embed_component(c: Component, n_paths: int) -> np.ndarray:
    dim = 2 * n_paths
    out = np.eye(dim, dtype=complex)
    local = component_unitary(c)
    if c.kind == BS:
        idx = np.r_[path_slice(c.paths[0]), path_slice(c.paths[1])]
    else:
        idx = np.arange(dim)[path_slice(c.path)]
    if idx.max() >= dim:
        raise StructureError(f"{c.kind} placed outside a {n_paths}-path circuit")
    out[np.ix_(idx, idx)] = local
    return out


def circuit_unitary(c: OpticalCircuit) -> np.ndarray:
    out = np.eye(2 * c.n_paths, dtype=complex)
    for s in c.stages:
        out = embed_component(s, c.n_paths) @ out
    return out


def detector_probabilities(c: OpticalCircuit, state, input_path: int = 1) -> np.ndarray:
    """Click probabilities per detector (in ``c.detectors`` order) for a qubit on ``input_path``.

    ``state`` is a 2-vector (pure) or a 2x2 density matrix.
    """
    u = circuit_unitary(c)[:, path_slice(input_path)]
    s = np.asarray(state, dtype=complex)
    rho = np.outer(s, s.conj()) if s.ndim == 1 else s
    out_rho = u @ rho @ dagger(u)
    diag = np.real(np.diag(out_rho))
    return np.array([diag[d.index] for d in c.detectors])


# -- polarization unitaries as wave plates ---------------------------------


def _qhq(params: np.ndarray) -> np.ndarray:
    a, b, c, phi = params
    return np.exp(1j * phi) * qwp_matrix(math.degrees(a)) @ hwp_matrix(math.degrees(b)) @ qwp_matrix(math.degrees(c))


def _qhq_residual(params: np.ndarray, target: np.ndarray) -> np.ndarray:
    r = (_qhq(params) - target).ravel()
    return np.concatenate([r.real, r.imag])


def solve_qhq(v, tol: float = STRUCT_TOL) -> tuple[float, float, float, float]:
    """Angles ``(a, b, c)`` in degrees and phase ``phi`` with ``v = e^{i phi} QWP(a) HWP(b) QWP(c)``.

    Least squares from a grid of starting points; the phase starts from
    ``det(v) = e^{2 i phi}``.
    """
    v = as_matrix(v, square=True)
    phi0 = 0.5 * np.angle(np.linalg.det(v))
    starts = [0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4]
    best, best_err = None, math.inf
    for dphi in (0.0, math.pi):
        for a0 in starts:
            for b0 in starts[:2] + [math.pi / 8, 3 * math.pi / 8]:
                for c0 in starts:
                    x0 = np.array([a0, b0, c0, phi0 + dphi])
                    sol = least_squares(_qhq_residual, x0, args=(v,), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
                    err = max_abs(_qhq(sol.x) - v)
                    if err < best_err:
                        best, best_err = sol.x, err
                    if best_err < 1e-13:
                        break
                if best_err < 1e-13:
                    break
            if best_err < 1e-13:
                break
        if best_err < 1e-13:
            break
    if best_err > tol:
        raise DomainError(f"wave-plate fit failed (residual {best_err:.3e})")
    a, b, c, phi = best
    return math.degrees(a), math.degrees(b), math.degrees(c), float(phi)


def _phase_or_nothing(phi: float, path: int, tol: float) -> list[Component]:
    wrapped = math.remainder(phi, TWO_PI)
    return [] if abs(wrapped) <= tol else [phase_shifter(phi, path)]


def polarization_stages(v, path: int, tol: float = STRUCT_TOL) -> list[Component]:
    """Wave plates (and a phase shifter) realizing the 2x2 unitary ``v`` on ``path``.

    Emits nothing for the identity, a lone phase shifter for ``e^{i phi} I``,
    a single HWP when ``v`` is a half-wave plate up to phase, and otherwise
    QWP, HWP, QWP in the order light meets them.
    """
    v = as_matrix(v, square=True)
    if max_abs(v - v[0, 0] * np.eye(2)) <= tol:
        return _phase_or_nothing(float(np.angle(v[0, 0])), path, tol)
    gamma = 0.5 * float(np.angle(-np.linalg.det(v)))
    h = v * np.exp(-1j * gamma)
    theta = 0.5 * math.degrees(math.atan2(h[1, 0].real, h[0, 0].real))
    if max_abs(h - hwp_matrix(theta)) <= tol:
        return [hwp(theta, path)] + _phase_or_nothing(gamma, path, tol)
    a, b, c, phi = solve_qhq(v, tol)
    return [qwp(c, path), hwp(b, path), qwp(a, path)] + _phase_or_nothing(phi, path, tol)


# -- Mach-Zehnder lowering ---------------------------------------------------


def _diag_phases(z: np.ndarray, c: float, s: float) -> tuple[complex, complex, complex]:
    """Phases ``l1, l2, r2`` with ``z = diag(l1, l2) [[c, -s], [s, c]] diag(1, r2)``."""
    if c >= s:
        l1 = z[0, 0] / c
        l2r2 = z[1, 1] / c
        l2 = z[1, 0] / s if s > 1e-15 else 1.0
        r2 = l2r2 / l2
    else:
        l2 = z[1, 0] / s
        l1r2 = -z[0, 1] / s
        l1 = z[0, 0] / c if c > 1e-15 else 1.0
        r2 = l1r2 / l1
    return l1, l2, r2


def _single_bs_form(m: np.ndarray, tol: float):
    """``(A1, A2, C2)`` with ``m = (A1 (+) A2)(BS (x) I)(I (+) C2)``, or None."""
    a1 = math.sqrt(2.0) * m[:2, :2]
    a2 = math.sqrt(2.0) * m[2:, :2]
    if max_abs(dagger(a1) @ a1 - np.eye(2)) > tol or max_abs(dagger(a2) @ a2 - np.eye(2)) > tol:
        return None
    c2 = 1j * math.sqrt(2.0) * dagger(a1) @ m[:2, 2:]
    if max_abs(1j * _SQRT_HALF * a2 @ c2 - m[2:, 2:]) > tol:
        return None
    return a1, a2, c2


def mz_stages(m, q: int, p: int, tol: float = STRUCT_TOL) -> list[Component]:
    """Stages realizing the 4x4 unitary ``m`` on paths ``(q, p)``.

    A generic block becomes two beam splitters with one polarization
    unitary on path ``p`` before, one in each arm, and one on path ``p``
    after. Blocks with no coupling lower to local rotations and blocks of
    single-splitter form to one beam splitter.
    """
    m = as_matrix(m, square=True)
    if max_abs(m[:2, 2:]) <= tol and max_abs(m[2:, :2]) <= tol:
        return polarization_stages(m[:2, :2], q, tol) + polarization_stages(m[2:, 2:], p, tol)
    single = _single_bs_form(m, tol)
    if single is not None:
        a1, a2, c2 = single
        return (
            polarization_stages(c2, p, tol)
            + [beam_splitter(q, p)]
            + polarization_stages(a1, q, tol)
            + polarization_stages(a2, p, tol)
        )

    (u1, u2), theta, (v1h, v2h) = _cs_parts(m)
    cs, sn = np.cos(theta), np.sin(theta)
    # per polarization, BS diag(1, e^{i phi}) BS has coupling angle theta when phi = pi/2 - 2 theta
    arm = np.exp(1j * (math.pi / 2 - 2 * theta))
    l = np.empty((2, 2), dtype=complex)  # [path, pol]
    r = np.ones((2, 2), dtype=complex)
    for k in range(2):
        z = BS_PATH_MATRIX @ np.diag([1.0, arm[k]]) @ BS_PATH_MATRIX
        l[0, k], l[1, k], r[1, k] = _diag_phases(z, cs[k], sn[k])
    a1 = u1 @ np.diag(l[0].conj())
    a2 = u2 @ np.diag(l[1].conj())
    e1 = np.diag(r[0].conj()) @ v1h
    e2 = np.diag(r[1].conj()) @ v2h
    d = np.diag(arm)
    return (
        polarization_stages(dagger(e1) @ e2, p, tol)
        + [beam_splitter(q, p)]
        + polarization_stages(a1 @ e1, q, tol)
        + polarization_stages(a1 @ d @ e1, p, tol)
        + [beam_splitter(q, p)]
        + polarization_stages(a2 @ dagger(a1), p, tol)
    )


def _cs_parts(m: np.ndarray):
    u, cs, vdh = cossin(m, p=2, q=2)
    theta = np.arctan2(np.array([cs[2, 0].real, cs[3, 1].real]), np.array([cs[0, 0].real, cs[1, 1].real]))
    return (u[:2, :2], u[2:, 2:]), theta, (vdh[:2, :2], vdh[2:, 2:])


# -- circuits from factorizations -------------------------------------------


def detectors_for(d: DilationResult) -> tuple[Detector, ...]:
    return tuple(
        Detector(k // 2 + 1, "H" if k % 2 == 0 else "V", label) for k, label in enumerate(d.labels)
    )


def lower_factorization(
    f: MzFactorization,
    d: DilationResult,
    input_paths: Iterable[int] = (1,),
    name: str = "",
    tol: float = STRUCT_TOL,
) -> OpticalCircuit:
    """Turn each block ``T`` into a Mach-Zehnder stage group realizing ``T^H``.

    ``f`` may be pruned, so it only has to reproduce the basis-mapping
    unitary on the ``input_paths`` columns.
    """
    if f.dim != d.dim:
        raise DomainError("factorization and dilation dimensions differ")
    cols = input_columns(input_paths)
    target = basis_mapping_unitary(d)
    if max_abs(reconstruct(f)[:, cols] - target[:, cols]) > VERIFY_TOL:
        raise DomainError("factorization does not reproduce the dilation's basis-mapping unitary")
    stages: list[Component] = []
    for t in f.factors:
        stages += mz_stages(dagger(t.block), t.q, t.p, tol)
    for loc in f.local_tail:
        stages += polarization_stages(dagger(loc.block), loc.path, tol)
    return OpticalCircuit(d.n_paths, tuple(stages), detectors_for(d), name)


def prune_circuit(c: OpticalCircuit, input_paths: Iterable[int] = (1,)) -> OpticalCircuit:
    """Remove stages that cannot change click statistics for light on ``input_paths``.

    Drops stages met while all their paths are still vacuum, and phase
    shifters after the last beam splitter on their path (a path-wide phase
    is invisible to the detectors).
    """
    active = set(input_paths)
    forward: list[Component] = []
    for s in c.stages:
        touched = set(s.touched_paths)
        if not touched & active:
            continue
        active |= touched
        forward.append(s)
    last_bs: dict[int, int] = {}
    for i, s in enumerate(forward):
        if s.kind == BS:
            for k in s.paths:
                last_bs[k] = i
    kept = [s for i, s in enumerate(forward) if not (s.kind == PHASE and i > last_bs.get(s.path, -1))]
    return OpticalCircuit(c.n_paths, tuple(kept), c.detectors, c.name)


def hexagon_circuit(which: str) -> OpticalCircuit:
    """Single-splitter circuit for the AB, BC or CA hexagon POVM.

    BC puts HWP(15°) on path 1 and HWP(30°) on path 2. AB drops the 30°
    plate, so path 2 reads out A±; CA drops the 15° plate, so path 1 reads
    out A±.
    """
    first = {"AB": "B", "BC": "B", "CA": "A"}
    second = {"AB": "A", "BC": "C", "CA": "C"}
    if which not in first:
        raise DomainError(f"unknown hexagon POVM {which!r}; expected AB, BC or CA")
    stages = [beam_splitter(1, 2)]
    if first[which] == "B":
        stages.append(hwp(15.0, 1))
    if second[which] == "C":
        stages.append(hwp(30.0, 2))
    a, b = first[which], second[which]
    detectors = (
        Detector(1, "H", f"{a}+"),
        Detector(1, "V", f"{a}-"),
        Detector(2, "H", f"{b}+"),
        Detector(2, "V", f"{b}-"),
    )
    return OpticalCircuit(2, tuple(stages), detectors, which)
