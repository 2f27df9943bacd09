"""Python bindings for the hnir iris indexing library."""

from ._hnir import (
    Engine,
    HnirError,
    bench,
    code_distance,
    encode_pnm,
    generate_code,
    generate_gallery,
    load_image,
    process,
)

__all__ = [
    "Engine",
    "HnirError",
    "bench",
    "code_distance",
    "encode_pnm",
    "generate_code",
    "generate_gallery",
    "load_image",
    "process",
]
