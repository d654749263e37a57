"""Exception hierarchy shared across the toolkit.

Exit-code mapping for the CLI lives in cli.py; keep new exceptions
derived from one of the four mid-level classes so the mapping stays total.
"""


class BumpmarkError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(BumpmarkError):
    """Caller passed an out-of-contract value (bad shape, range, layout)."""


class InvalidLayout(InvalidArgument):
    """Grid geometry does not fit the plate."""


class ShapeError(InvalidArgument):
    """Tensor/array shape mismatch."""


class DataError(BumpmarkError):
    """Dataset, manifest or file I/O failure."""


class RenderError(BumpmarkError):
    """Degenerate render request (e.g. camera inside geometry)."""


class RetrievalError(BumpmarkError):
    """Decoding pipeline failure."""


class LandmarkNotFound(RetrievalError):
    def __init__(self, color_id: int):
        self.color_id = color_id
        super().__init__(f"no qualifying pixels for landmark color {color_id}")


class LandmarkAmbiguous(RetrievalError):
    def __init__(self, color_id: int):
        self.color_id = color_id
        super().__init__(f"two comparable far-apart blobs for landmark color {color_id}")


class DegenerateConfiguration(RetrievalError):
    """Homography correspondences are collinear / non-invertible."""


class NumericError(BumpmarkError):
    """Non-finite values where finite ones are required."""
