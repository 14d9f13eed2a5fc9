"""CES tensor and higher-order SVD."""
from .hosvd import (
    CESTensor,
    HosvdResult,
    hosvd,
    leading_outer_product,
    left_singular,
    max_cell,
    multilinear_product,
    refold,
    unfold,
    write_hosvd,
)

__all__ = [
    "CESTensor",
    "HosvdResult",
    "hosvd",
    "leading_outer_product",
    "left_singular",
    "max_cell",
    "multilinear_product",
    "refold",
    "unfold",
    "write_hosvd",
]
