"""Characteristic forms of flat bundles and Higgs bundles on model manifolds.

Smooth fields are symbolic expressions in ``z`` and ``zbar``; forms,
matrix-valued forms, connections, metrics and Higgs fields are built on top
and evaluated numerically on sample grids.  See the README for a tour.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    HiggsFormsError,
    ParseError,
    ValidationError,
    SingularityError,
)
from .scalar import ChartSpec, parse_expr, evaluate  # noqa: E402
from .forms import Form  # noqa: E402
from .matrices import MatrixForm  # noqa: E402
from .bundles import ConnectionData, HiggsData, MetricField, MetricPath  # noqa: E402

__all__ = [
    "__version__",
    "HiggsFormsError",
    "ParseError",
    "ValidationError",
    "SingularityError",
    "ChartSpec",
    "parse_expr",
    "evaluate",
    "Form",
    "MatrixForm",
    "ConnectionData",
    "HiggsData",
    "MetricField",
    "MetricPath",
]
