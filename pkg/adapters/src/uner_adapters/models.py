"""Model backends behind one small contract.

A model is a callable taking the document text and its tokens (as
(start, end) code-point offset pairs) and returning labeled token spans
(token_start, token_end, external_label). Decoding is temperature-free, so
output is byte-stable for a fixed model version and input.

Model specs:
    lexicon:<path.tsv>   gazetteer tagger; TSV rows ``surface<TAB>label``,
                         longest match wins, case-sensitive
    spacy:<name>         wrap an installed spaCy pipeline (optional extra)
"""
from __future__ import annotations

from pathlib import Path


class ModelLoadError(RuntimeError):
    pass


class LexiconTagger:
    """Deterministic longest-match gazetteer tagger."""

    def __init__(self, entries: dict[tuple[str, ...], str], scheme_id: str = "conll4"):
        self.entries = dict(entries)
        self.scheme_id = scheme_id
        self.max_len = max((len(k) for k in entries), default=1)
        self.labels = sorted(set(entries.values()))

    @classmethod
    def from_tsv(cls, path: "str | Path", scheme_id: str = "conll4") -> "LexiconTagger":
        entries: dict[tuple[str, ...], str] = {}
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ModelLoadError(f"cannot read lexicon {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ModelLoadError(f"{path}:{lineno}: expected 'surface<TAB>label'")
            surface, label = parts
            entries[tuple(surface.split())] = label
        if not entries:
            raise ModelLoadError(f"lexicon {path} is empty")
        return cls(entries, scheme_id)

    def __call__(self, text: str, tokens: list[tuple[int, int]]):
        surfaces = [text[start:end] for start, end in tokens]
        spans = []
        i = 0
        n = len(surfaces)
        while i < n:
            matched = False
            for length in range(min(self.max_len, n - i), 0, -1):
                label = self.entries.get(tuple(surfaces[i : i + length]))
                if label is not None:
                    spans.append((i, i + length, label))
                    i += length
                    matched = True
                    break
            if not matched:
                i += 1
        return spans


class SpacyTagger:
    """Wrap an installed spaCy pipeline; the pipeline's tokenization is kept.

    Python string offsets are already code points, so spaCy's character
    indices pass through unchanged.
    """

    def __init__(self, model_name: str, scheme_id: str = "ontonotes18"):
        try:
            import spacy
        except ImportError as exc:
            raise ModelLoadError("spacy is not installed; install uner-adapters[spacy]") from exc
        try:
            self.nlp = spacy.load(model_name)
        except OSError as exc:
            raise ModelLoadError(f"cannot load spaCy model {model_name!r}: {exc}") from exc
        self.scheme_id = scheme_id
        self.model_name = model_name

    def tokenize(self, text: str) -> list[tuple[int, int]]:
        doc = self.nlp.tokenizer(text)
        return [(t.idx, t.idx + len(t.text)) for t in doc if not t.is_space]

    def __call__(self, text: str, tokens: list[tuple[int, int]]):
        doc = self.nlp(text)
        starts = {start: k for k, (start, _) in enumerate(tokens)}
        ends = {end: k + 1 for k, (_, end) in enumerate(tokens)}
        spans = []
        for ent in doc.ents:
            token_start = starts.get(ent.start_char)
            token_end = ends.get(ent.end_char)
            if token_start is None or token_end is None:
                continue  # entity does not align with the emitted tokens
            spans.append((token_start, token_end, ent.label_))
        return spans


def load_model(spec: str):
    """Instantiate a model from its spec string."""
    kind, sep, rest = spec.partition(":")
    if not sep:
        raise ModelLoadError(f"model spec {spec!r} must look like kind:argument")
    if kind == "lexicon":
        return LexiconTagger.from_tsv(rest)
    if kind == "spacy":
        return SpacyTagger(rest)
    raise ModelLoadError(f"unknown model kind {kind!r} (expected lexicon: or spacy:)")
