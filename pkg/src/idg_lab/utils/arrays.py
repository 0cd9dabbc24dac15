"""Pydantic field types for numpy arrays and extended reals."""

from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer

from idg_lab.utils.output import decode_extended, encode_extended


def _frozen_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    array.setflags(write=False)
    return array


def _frozen_int_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.int64)
    array.setflags(write=False)
    return array


def _array_to_list(array: np.ndarray) -> list[Any]:
    return [encode_extended(v) if isinstance(v, float) else v for v in array.tolist()]


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen_float_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]
"""Read-only float64 array; serialized as (nested) lists."""

IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen_int_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]
"""Read-only int64 array; serialized as lists."""

ExtendedReal = Annotated[
    float,
    BeforeValidator(decode_extended),
    PlainSerializer(encode_extended),
]
"""Real on the extended line; +inf round-trips through the "inf" sentinel."""

ExtendedMatrix = Annotated[
    np.ndarray,
    BeforeValidator(lambda v: _frozen_float_array([[decode_extended(x) for x in r] for r in v])),
    PlainSerializer(lambda a: [_array_to_list(row) for row in a], return_type=list),
]
"""Read-only float64 matrix that may hold +inf entries."""
