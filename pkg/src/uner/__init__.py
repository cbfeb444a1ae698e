"""uner: toolkit for the UNER universal named-entity hierarchy.

Covers the full corpus workflow: taxonomy validation and queries, annotation
format codecs, recall-priority merging of tagger outputs, knowledge-base label
correction, cross-lingual projection over word alignments, span-level scoring
and distribution profiling, and a human review service with adjudication.
"""

__version__ = "0.1.0"

from .documents import AnnotatedDocument, EntitySpan, Token  # noqa: E402,F401
from .taxonomy import TagPath, Taxonomy, load_bundled_taxonomy, load_taxonomy  # noqa: E402,F401
