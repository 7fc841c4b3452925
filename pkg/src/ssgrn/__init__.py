"""State-space inference of gene regulatory networks from replicated time courses."""

from .datamodel import (
    Dims,
    ExpressionDataset,
    GenomicGraphMatrix,
    ModelParams,
    assemble_graph_matrix,
    disassemble_graph_matrix,
    max_hidden_k,
    param_count,
)
from .errors import DataError, InfeasibleError, NumericalError, SSGRNError, UsageError

__version__ = "0.1.0"
