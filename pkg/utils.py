import hashlib
import logging
import math
from typing import Any, Dict, List

import numpy as np
import ujson

from constructions import TensorElement, tensor_term
from fault_tolerance import InputError, OssCalcError
from freeobjects import CofreeTruncation, FreeTruncation, leaf_markers
from ground import INF, GroundSpace, dual_of, lp, opmatrix
from sqoperators import Classification, SeqOperator
from sqspaces import (
    ElementColumn,
    NormEstimate,
    SeqSpaceDesc,
    cstar_diag,
    cstar_matrix,
    hilb_max,
    t2,
)

logger = logging.getLogger("OssCalc.Utils")

_TAG_NAMES = {
    "hilbmax": "HilbMax",
    "min": "Min",
    "max": "Max",
    "cstar_matrix": "CstarMatrix",
    "cstar_diag": "CstarDiag",
    "t2": "T2",
    "dsum_inf": "DSumInf",
    "dsum_one": "DSumOne",
    "dual": "Dual",
    "subspace": "Subspace",
    "quotient": "Quotient",
}
_TAGS_BY_NAME = {name: tag for tag, name in _TAG_NAMES.items()}


# ========== 1. 基础 ==========


def dumps(obj: Any) -> str:
    return ujson.dumps(obj, ensure_ascii=False, escape_forward_slashes=False)


def loads(text: str) -> Any:
    try:
        return ujson.loads(text)
    except ValueError as e:
        raise InputError(f"JSON 解析失败: {e}") from e


def json_float(value: float) -> Any:
    """非有限值写成字符串（JSON 没有 inf / nan）"""
    value = float(value)
    if math.isfinite(value):
        return value
    if math.isnan(value):
        return "nan"
    return "inf" if value > 0 else "-inf"


def inputs_digest(*arrays) -> str:
    """输入数组的 sha256 摘要（形状 + complex128 字节）"""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype=np.complex128))
        h.update(repr(a.shape).encode("utf-8"))
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def _field(data: Dict[str, Any], key: str, what: str):
    if not isinstance(data, dict) or key not in data:
        raise InputError(f"{what} 缺少字段 '{key}'")
    return data[key]


# ========== 2. 矩阵与底空间 ==========


def matrix_to_json(m: np.ndarray) -> Dict[str, Any]:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
    }


def matrix_from_json(data: Dict[str, Any]) -> np.ndarray:
    """{"rows","cols","entries"}，entries 按行优先，每项为 [re, im] 或实数"""
    rows = _field(data, "rows", "矩阵")
    cols = _field(data, "cols", "矩阵")
    entries = _field(data, "entries", "矩阵")
    if not isinstance(rows, int) or not isinstance(cols, int) or rows < 0 or cols < 0:
        raise InputError(f"矩阵尺寸非法: rows={rows}, cols={cols}")
    if not isinstance(entries, list) or len(entries) != rows * cols:
        raise InputError(f"矩阵 entries 长度应为 {rows * cols}")
    values = []
    for entry in entries:
        if isinstance(entry, (int, float)):
            values.append(complex(entry, 0.0))
        elif isinstance(entry, list) and len(entry) == 2:
            values.append(complex(float(entry[0]), float(entry[1])))
        else:
            raise InputError(f"矩阵元素格式非法: {entry!r}")
    m = np.array(values, dtype=np.complex128).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise InputError("矩阵包含 NaN 或 Inf")
    return m


def ground_to_json(space: GroundSpace) -> Dict[str, Any]:
    if space.kind == "lp":
        return {"kind": "lp", "p": "inf" if space.p == INF else int(space.p), "dim": space.dim}
    if space.kind == "opmatrix":
        return {"kind": "opmatrix", "a": space.a, "b": space.b}
    return {"kind": "dual", "base": ground_to_json(space.base)}


def ground_from_json(data: Dict[str, Any]) -> GroundSpace:
    kind = _field(data, "kind", "底空间")
    if kind == "lp":
        return lp(_field(data, "p", "ℓ_p 底空间"), int(_field(data, "dim", "ℓ_p 底空间")))
    if kind == "opmatrix":
        return opmatrix(int(_field(data, "a", "OpMatrix")), int(_field(data, "b", "OpMatrix")))
    if kind == "dual":
        return dual_of(ground_from_json(_field(data, "base", "DualOf")))
    raise InputError(f"未知底空间类型: {kind}")


# ========== 3. 空间、元素、算子、张量 ==========


def space_to_json(space: SeqSpaceDesc) -> Dict[str, Any]:
    name = _TAG_NAMES[space.tag]
    if space.tag in ("hilbmax", "cstar_diag"):
        return {"tag": name, "dim": space.dim}
    if space.tag == "t2":
        return {"tag": name, "n": space.dim}
    if space.tag == "cstar_matrix":
        return {"tag": name, "a": space.ground.a, "b": space.ground.b}
    if space.tag in ("min", "max"):
        return {"tag": name, "ground": ground_to_json(space.ground)}
    if space.tag in ("dsum_inf", "dsum_one"):
        return {"tag": name, "children": [space_to_json(c) for c in space.children]}
    if space.tag == "dual":
        return {"tag": name, "child": space_to_json(space.child)}
    key = "basis" if space.tag == "subspace" else "kernel"
    return {"tag": name, "child": space_to_json(space.child), key: matrix_to_json(space.basis)}


def space_from_json(data: Dict[str, Any]) -> SeqSpaceDesc:
    name = _field(data, "tag", "空间描述符")
    tag = _TAGS_BY_NAME.get(name)
    if tag is None:
        raise InputError(f"未知空间标签: {name}")
    try:
        if tag == "hilbmax":
            return hilb_max(int(_field(data, "dim", name)))
        if tag == "cstar_diag":
            return cstar_diag(int(_field(data, "dim", name)))
        if tag == "t2":
            return t2(int(_field(data, "n", name)))
        if tag == "cstar_matrix":
            a = int(_field(data, "a", name))
            return cstar_matrix(a, int(data.get("b", a)))
        if tag in ("min", "max"):
            return SeqSpaceDesc(tag, ground=ground_from_json(_field(data, "ground", name)))
        if tag in ("dsum_inf", "dsum_one"):
            children = _field(data, "children", name)
            return SeqSpaceDesc(tag, children=tuple(space_from_json(c) for c in children))
        child = space_from_json(_field(data, "child", name))
        if tag == "dual":
            return SeqSpaceDesc("dual", children=(child,))
        key = "basis" if tag == "subspace" else "kernel"
        return SeqSpaceDesc(tag, children=(child,), basis=matrix_from_json(_field(data, key, name)))
    except (TypeError, ValueError) as e:
        raise InputError(f"{name} 描述符解析失败: {e}") from e


def element_from_json(space: SeqSpaceDesc, data: Dict[str, Any]) -> ElementColumn:
    """元素文件可以是矩阵本身，也可以是 {"coords": 矩阵}"""
    matrix = data.get("coords", data) if isinstance(data, dict) else data
    return ElementColumn(space, matrix_from_json(matrix))


def element_to_json(x: ElementColumn) -> Dict[str, Any]:
    return {"space": space_to_json(x.space), "coords": matrix_to_json(x.coords)}


def operator_to_json(phi: SeqOperator) -> Dict[str, Any]:
    return {
        "domain": space_to_json(phi.domain),
        "codomain": space_to_json(phi.codomain),
        "matrix": matrix_to_json(phi.matrix),
    }


def operator_from_json(data: Dict[str, Any]) -> SeqOperator:
    return SeqOperator(
        space_from_json(_field(data, "domain", "算子")),
        space_from_json(_field(data, "codomain", "算子")),
        matrix_from_json(_field(data, "matrix", "算子")),
    )


def tensor_to_json(u: TensorElement) -> Dict[str, Any]:
    return {
        "left": space_to_json(u.left),
        "right": space_to_json(u.right),
        "level": u.level,
        "terms": [
            {
                "alpha": matrix_to_json(term.alpha),
                "x": matrix_to_json(term.x.coords),
                "y": matrix_to_json(term.y.coords),
            }
            for term in u.terms
        ],
    }


def tensor_from_json(data: Dict[str, Any]) -> TensorElement:
    left = space_from_json(_field(data, "left", "张量元素"))
    right = space_from_json(_field(data, "right", "张量元素"))
    terms = [
        tensor_term(
            matrix_from_json(_field(term, "alpha", "张量项")),
            ElementColumn(left, matrix_from_json(_field(term, "x", "张量项"))),
            ElementColumn(right, matrix_from_json(_field(term, "y", "张量项"))),
        )
        for term in _field(data, "terms", "张量元素")
    ]
    return TensorElement(left, right, int(_field(data, "level", "张量元素")), tuple(terms))


# ========== 4. 结果 ==========


def estimate_to_json(estimate: NormEstimate, include_witness: bool = False) -> Dict[str, Any]:
    witness = estimate.witness
    payload: Dict[str, Any] = {
        "kind": witness.kind,
        "digest": inputs_digest(*[witness.data[k] for k in sorted(witness.data)]),
    }
    if include_witness:
        payload["data"] = {k: matrix_to_json(v) for k, v in sorted(witness.data.items())}
    result = {
        "lower": json_float(estimate.lower),
        "upper": json_float(estimate.upper),
        "exact": bool(estimate.exact),
        "witness": payload,
        "certificate": estimate.certificate,
    }
    if estimate.level is not None:
        result["level"] = estimate.level
    return result


def classification_to_json(record: Classification) -> Dict[str, Any]:
    levels = record.levels
    return {
        "operator": record.operator,
        "levels": [level.level for level in levels],
        "norm_lower": [json_float(level.norm.lower) for level in levels],
        "norm_upper": [json_float(level.norm.upper) for level in levels],
        "c_inj": [json_float(level.c_inj) for level in levels],
        "c_inj_certified": [level.c_inj_certified for level in levels],
        "c_surj": [json_float(level.c_surj) for level in levels],
        "c_surj_certified": [level.c_surj_certified for level in levels],
        "contractive": [level.contractive for level in levels],
        "isometric": [level.isometric for level in levels],
        "coisometric": [level.coisometric for level in levels],
    }


def truncation_to_json(truncation) -> Dict[str, Any]:
    kind = "free" if isinstance(truncation, FreeTruncation) else "cofree"
    return {
        "kind": kind,
        "max_level": truncation.max_level,
        "base_size": truncation.base_size,
        "dim": truncation.space.dim,
        "space": space_to_json(truncation.space),
        "leaves": [
            {"base_point": leaf.base_point, "level": leaf.level, "offset": leaf.offset}
            for leaf, _ in leaf_markers(truncation)
        ],
    }


def error_to_json(error: Exception) -> Dict[str, Any]:
    code = error.code if isinstance(error, OssCalcError) else "input_error"
    return {"error": code, "message": str(error)}


class ReportFormatter:
    """日志用的简短摘要"""

    @staticmethod
    def format_estimate(estimate: NormEstimate) -> str:
        flag = "精确" if estimate.exact else f"间隙 {estimate.gap:.3g}"
        return f"[{estimate.lower:.9g}, {estimate.upper:.9g}] ({flag}, {estimate.certificate})"

    @staticmethod
    def format_report(report) -> str:
        status = "✅ 通过" if report.passed else f"❌ {len(report.failures)} 次失败"
        return (
            f"{report.suite_id}: {status}，{report.trials} 次试验，"
            f"最差松弛 {report.worst_slack:.3g}，耗时 {report.elapsed_ms}ms"
        )

    @staticmethod
    def format_summary(reports: List) -> str:
        failed = [r.suite_id for r in reports if not r.passed]
        if not failed:
            return f"✅ 全部 {len(reports)} 个套件通过"
        return f"❌ {len(failed)}/{len(reports)} 个套件失败: {', '.join(failed)}"
