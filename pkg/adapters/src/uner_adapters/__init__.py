"""Adapters that turn external tagger output into uner interchange corpora.

The adapters stand entirely on the toolkit's external interfaces: they emit
the line-delimited interchange format and run-manifest TSV rows, never
importing the toolkit itself. Offsets are Unicode code points; each adapter
converts whatever its model natively reports at this boundary.
"""

__version__ = "0.1.0"

from .models import LexiconTagger, ModelLoadError, load_model  # noqa: F401
from .tagging import tag_corpus, write_corpus, manifest_row  # noqa: F401
