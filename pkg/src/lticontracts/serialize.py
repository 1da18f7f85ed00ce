"""Canonical JSON form of systems, contracts and reports."""

import json
import math

import numpy as np

from .errors import InputError
from .model import (Box, Ellipsoid, LtiContract, PerturbationSet, PerturbedLtiSystem, PolytopeH, PolytopeV,
                    Product, Singleton)
from .polyhedra import PolyhedronH

__all__ = [
    "set_to_dict",
    "set_from_dict",
    "system_to_dict",
    "system_from_dict",
    "contract_to_dict",
    "contract_from_dict",
    "model_to_dict",
    "model_from_dict",
    "dumps",
    "loads",
    "load_model",
    "save_model",
    "report_to_dict",
    "encode_real",
    "decode_real",
]


def _rows(M):
    return [[float(v) for v in row] for row in np.asarray(M, dtype=float)]


def _list(v):
    return [float(x) for x in np.asarray(v, dtype=float).ravel()]


def encode_real(x):
    """Finite floats as numbers, infinities as the strings ``"+inf"``/``"-inf"``."""
    x = float(x)
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def decode_real(x):
    if isinstance(x, str):
        return {"+inf": math.inf, "-inf": -math.inf, "nan": math.nan}[x]
    return float(x)


def _get(d, key, where):
    if not isinstance(d, dict):
        raise InputError(f"{where}: expected an object")
    if key not in d:
        raise InputError(f"missing field {where}.{key}")
    return d[key]


def _matrix(obj, where, rows=None, cols=None):
    try:
        M = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: not a numeric matrix ({exc})") from None
    if M.size == 0:
        M = M.reshape(rows if rows is not None else 0, cols if cols is not None else 0)
    if M.ndim != 2:
        raise InputError(f"{where}: expected nested row arrays")
    return M


def _vector(obj, where):
    try:
        v = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: not a numeric vector ({exc})") from None
    if v.ndim != 1:
        raise InputError(f"{where}: expected a flat array")
    return v


def set_to_dict(S: PerturbationSet) -> dict:
    if isinstance(S, Singleton):
        return {"type": "singleton", "v": _list(S.v)}
    if isinstance(S, Box):
        return {"type": "box", "lo": _list(S.lo), "hi": _list(S.hi)}
    if isinstance(S, PolytopeV):
        return {"type": "polytope_v", "F": _rows(S.F)}
    if isinstance(S, PolytopeH):
        return {"type": "polytope_h", "A": _rows(S.P.A), "b": _list(S.P.b)}
    if isinstance(S, Ellipsoid):
        return {"type": "ellipsoid", "H": _rows(S.H), "gamma": float(S.gamma)}
    if isinstance(S, Product):
        return {"type": "product", "blocks": [set_to_dict(b) for b in S.blocks]}
    raise InputError(f"cannot serialize {type(S).__name__}")


def set_from_dict(obj, where="set") -> PerturbationSet:
    kind = _get(obj, "type", where)
    if kind == "singleton":
        return Singleton(_vector(_get(obj, "v", where), f"{where}.v"))
    if kind == "box":
        return Box(_vector(_get(obj, "lo", where), f"{where}.lo"), _vector(_get(obj, "hi", where), f"{where}.hi"))
    if kind == "polytope_v":
        return PolytopeV(_matrix(_get(obj, "F", where), f"{where}.F"))
    if kind == "polytope_h":
        A = _matrix(_get(obj, "A", where), f"{where}.A")
        return PolytopeH(PolyhedronH(A, _vector(_get(obj, "b", where), f"{where}.b")))
    if kind == "ellipsoid":
        return Ellipsoid(_matrix(_get(obj, "H", where), f"{where}.H"), float(_get(obj, "gamma", where)))
    if kind == "product":
        blocks = _get(obj, "blocks", where)
        return Product(tuple(set_from_dict(b, f"{where}.blocks[{i}]") for i, b in enumerate(blocks)))
    raise InputError(f"{where}.type: unknown set type {kind!r}")


def system_to_dict(system) -> dict:
    out = {name: _rows(getattr(system, name)) for name in "ABCD"}
    if isinstance(system, PerturbedLtiSystem):
        out["E"] = _rows(system.E)
        out["F"] = _rows(system.F)
        out["P"] = set_to_dict(system.P)
        out["R"] = set_to_dict(system.R)
    out["w"] = _list(system.w)
    out["v"] = _list(system.v)
    out["x0"] = {"A": _rows(system.X0.A), "b": _list(system.X0.b)}
    return out


def system_from_dict(obj) -> PerturbedLtiSystem:
    """Always returns a :class:`PerturbedLtiSystem`; missing noise channels are empty."""
    w = "system"
    A = _matrix(_get(obj, "A", w), "system.A")
    n_x = A.shape[0]
    B = _matrix(_get(obj, "B", w), "system.B", rows=n_x)
    C = _matrix(_get(obj, "C", w), "system.C", cols=n_x)
    n_y = C.shape[0]
    D = _matrix(_get(obj, "D", w), "system.D", rows=n_y, cols=B.shape[1])
    E = _matrix(obj.get("E", []), "system.E", rows=n_x, cols=0)
    F = _matrix(obj.get("F", []), "system.F", rows=n_y, cols=0)
    P = set_from_dict(obj["P"], "system.P") if "P" in obj else Singleton(np.zeros(E.shape[1]))
    R = set_from_dict(obj["R"], "system.R") if "R" in obj else Singleton(np.zeros(F.shape[1]))
    x0 = _get(obj, "x0", w)
    X0 = PolyhedronH(_matrix(_get(x0, "A", "system.x0"), "system.x0.A", cols=n_x + B.shape[1]),
                     _vector(_get(x0, "b", "system.x0"), "system.x0.b"), dim=n_x + B.shape[1])
    wv = _vector(obj["w"], "system.w") if "w" in obj else None
    vv = _vector(obj["v"], "system.v") if "v" in obj else None
    return PerturbedLtiSystem(A, B, C, D, E, F, X0, P, R, w=wv, v=vv)


def contract_to_dict(contract: LtiContract) -> dict:
    return {
        "m": int(contract.m),
        "assumption_blocks": [_rows(B) for B in contract.assumption_blocks],
        "a0": _list(contract.a0),
        "guarantee_blocks": [_rows(B) for B in contract.guarantee_blocks],
        "g0": _list(contract.g0),
    }


def contract_from_dict(obj) -> LtiContract:
    w = "contract"
    m = _get(obj, "m", w)
    if not isinstance(m, int) or m < 0:
        raise InputError("contract.m: expected a nonnegative integer")
    ab = [_matrix(B, f"contract.assumption_blocks[{r}]") for r, B in enumerate(_get(obj, "assumption_blocks", w))]
    gb = [_matrix(B, f"contract.guarantee_blocks[{r}]") for r, B in enumerate(_get(obj, "guarantee_blocks", w))]
    return LtiContract(m, tuple(ab), _vector(_get(obj, "a0", w), "contract.a0"), tuple(gb),
                       _vector(_get(obj, "g0", w), "contract.g0"))


def model_to_dict(system, contract) -> dict:
    return {"system": system_to_dict(system), "contract": contract_to_dict(contract)}


def model_from_dict(obj):
    if not isinstance(obj, dict):
        raise InputError("top level: expected an object with 'system' and 'contract'")
    return system_from_dict(_get(obj, "system", "model")), contract_from_dict(_get(obj, "contract", "model"))


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def loads(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_model(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return model_from_dict(loads(text))


def save_model(path, system, contract):
    from .simulate import atomic_write_text

    atomic_write_text(path, dumps(model_to_dict(system, contract)))


def report_to_dict(report) -> dict:
    """JSON-ready view of a :class:`~lticontracts.verify.VerificationReport`."""
    out = {
        "verdict": report.verdict,
        "nu": int(report.nu),
        "iota": int(report.iota),
        "lp_count": int(report.lp_count),
        "theta": [{"n": n, "ell": l, "value": encode_real(v)} for (n, l), v in sorted(report.theta_values().items())],
        "theta_records": [
            {"n": r.n, "ell": r.ell, "row": r.row, "value": encode_real(r.value), "status": r.lp_status}
            for r in report.theta_records
        ],
        "diagnostics": list(report.diagnostics),
        "timings": {"wall_time": float(report.wall_time)},
    }
    tau = report.extras.get("tau")
    if tau is not None:
        out["epsilon"] = float(tau.epsilon)
        out["N_per_row"] = [int(v) for v in tau.N_per_row]
        out["tau_eps"] = _list(tau.tau_eps)
        out["tau_R"] = _list(tau.tau_R)
        out["tau_Pe"] = _list(tau.tau_Pe)
    if "spectral_radius" in report.extras:
        out["spectral_radius"] = float(report.extras["spectral_radius"])
    if "unstable_checks" in report.extras:
        out["unstable_checks"] = {k: bool(v) for k, v in report.extras["unstable_checks"].items()}
    return out
