"""Multi-source retrieval, planning, and refinement core.

Thin re-export of the compiled ``_msrag`` extension. The orchestration
pipeline (staged runs, artifacts, reports) lives behind the ``msrag`` CLI;
this package exposes the operations the pipeline is built from: corpus
loading, plan parsing and validation, BM25 retrieval, relevance quantization,
label math, prompt assembly with segment attention masks, refinement passes,
and the evaluation metrics.
"""

from ._msrag import *  # noqa: F401,F403
from ._msrag import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
