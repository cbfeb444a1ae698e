"""Parse, serialize, and interconvert the three annotation formats.

Formats over the shared document model:

* IOB2 tagged tokens: ``B-<path>`` opens a span, ``I-<path>`` continues it,
  ``O`` is outside. Files carry ``surface<TAB>tag`` lines, blank line between
  documents.
* Inline XML-style markup: each span wrapped in ``<path>...</path>`` with the
  dotted path as the tag name (names may contain spaces, so this is our own
  scanner, not a W3C XML parser); ``&``, ``<``, ``>`` escaped in text.
* Interchange records: line-delimited JSON, one document per line, the
  lossless carrier used between pipeline stages.

All functions are pure; documents are independently processable in parallel.
IOB2 and markup are lossy carriers (no span source/confidence/id), so their
round-trip guarantee covers boundaries and labels.
"""
from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .documents import AnnotatedDocument, EntitySpan, Token, require_flat
from .errors import (
    MalformedMarkup,
    NestedSpans,
    OffsetOutOfRange,
    OverlappingSpans,
    SchemaViolation,
    UnknownLabel,
)
from .taxonomy import TagPath, Taxonomy

log = logging.getLogger(__name__)

Tokenizer = Callable[[str], list[Token]]

_WORD = re.compile(r"\S+")


def whitespace_tokenize(text: str) -> list[Token]:
    """Default tokenizer contract: maximal non-space runs, code-point offsets."""
    return [Token(i, m.start(), m.end()) for i, m in enumerate(_WORD.finditer(text))]


def _check_span_ranges(doc: AnnotatedDocument) -> None:
    n = len(doc.tokens)
    for span in doc.spans:
        if not (0 <= span.token_start < span.token_end <= n):
            raise OffsetOutOfRange(
                f"{doc.doc_id}: span [{span.token_start},{span.token_end}) outside 0..{n}"
            )


# -- IOB2 ---------------------------------------------------------------------

def encode_iob2(doc: AnnotatedDocument) -> list[str]:
    """One tag per token; adjacent same-label spans stay separate (B-X, B-X)."""
    _check_span_ranges(doc)
    require_flat(doc)
    tags = ["O"] * len(doc.tokens)
    for span in doc.spans:
        tags[span.token_start] = f"B-{span.label}"
        for i in range(span.token_start + 1, span.token_end):
            tags[i] = f"I-{span.label}"
    return tags


def decode_iob2(
    tags: Iterable[str],
    doc: AnnotatedDocument,
    taxonomy: Taxonomy | None = None,
    source: str = "iob2",
) -> AnnotatedDocument:
    """Rebuild spans from tags over an already-tokenized document.

    A dangling ``I-X`` (no preceding ``B-X``/``I-X`` with the same label) is
    repaired to ``B-X`` with a warning rather than rejected, to tolerate noisy
    tagger output.
    """
    tags = list(tags)
    if len(tags) != len(doc.tokens):
        raise SchemaViolation(
            f"{doc.doc_id}: {len(tags)} tags for {len(doc.tokens)} tokens"
        )
    spans: list[EntitySpan] = []
    open_start: int | None = None
    open_label: str | None = None

    def close(upto: int) -> None:
        nonlocal open_start, open_label
        if open_start is not None:
            spans.append(EntitySpan(open_start, upto, open_label or "", source=source))
        open_start = open_label = None

    for i, tag in enumerate(tags):
        if tag == "O":
            close(i)
            continue
        if len(tag) < 3 or tag[0] not in "BI" or tag[1] != "-":
            raise UnknownLabel(f"{doc.doc_id}: unparseable tag {tag!r} at token {i}")
        label = tag[2:]
        if taxonomy is not None:
            taxonomy.resolve(label)  # raises UnknownPath
        if tag[0] == "B":
            close(i)
            open_start, open_label = i, label
        else:  # I-
            if open_label != label:
                close(i)
                log.warning(
                    "%s: dangling I-%s at token %d repaired to B-%s", doc.doc_id, label, i, label
                )
                open_start, open_label = i, label
    close(len(tags))
    spans = [
        EntitySpan(s.token_start, s.token_end, s.label, source=source, span_id=f"s{k}")
        for k, s in enumerate(spans)
    ]
    return doc.with_spans(spans)


def iter_iob2_lines(doc: AnnotatedDocument) -> Iterator[str]:
    for token, tag in zip(doc.tokens, encode_iob2(doc)):
        yield f"{doc.token_surface(token)}\t{tag}"


def write_iob2(docs: Iterable[AnnotatedDocument], path: "str | Path") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        first = True
        for doc in docs:
            if not first:
                fh.write("\n")
            first = False
            for line in iter_iob2_lines(doc):
                fh.write(line + "\n")


def read_iob2(
    path: "str | Path",
    taxonomy: Taxonomy | None = None,
    lang: str = "und",
    doc_id_prefix: str = "doc",
) -> list[AnnotatedDocument]:
    """Read an IOB2 file back into documents.

    The format carries no doc ids, text, or offsets: text is rebuilt by
    joining surfaces with single spaces and ids are sequential.
    """
    docs: list[AnnotatedDocument] = []
    block: list[tuple[str, str]] = []

    def flush() -> None:
        if not block:
            return
        surfaces = [s for s, _ in block]
        text = " ".join(surfaces)
        tokens = []
        cursor = 0
        for i, surface in enumerate(surfaces):
            tokens.append(Token(i, cursor, cursor + len(surface)))
            cursor += len(surface) + 1
        doc = AnnotatedDocument(f"{doc_id_prefix}-{len(docs):04d}", lang, text, tokens)
        docs.append(decode_iob2([t for _, t in block], doc, taxonomy))
        block.clear()

    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            flush()
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise SchemaViolation(f"{path}:{lineno}: expected 'surface<TAB>tag'")
        block.append((parts[0], parts[1]))
    flush()
    return docs


# -- inline XML-style markup ---------------------------------------------------

_ESCAPES = [("&", "&amp;"), ("<", "&lt;"), (">", "&gt;")]
_LINE_ESCAPES = [("\r", "&#13;"), ("\n", "&#10;")]


def _escape(text: str, for_line: bool = False) -> str:
    for plain, entity in _ESCAPES:
        text = text.replace(plain, entity)
    if for_line:
        for plain, entity in _LINE_ESCAPES:
            text = text.replace(plain, entity)
    return text


_ENTITY = re.compile(r"&(amp|lt|gt|#10|#13);")
_ENTITY_MAP = {"amp": "&", "lt": "<", "gt": ">", "#10": "\n", "#13": "\r"}


def encode_inline_xml(doc: AnnotatedDocument, for_line: bool = False) -> str:
    """Wrap each span's character range in ``<label>...</label>``.

    With ``for_line=True`` newlines are escaped so one document fits one line.
    """
    _check_span_ranges(doc)
    require_flat(doc)
    spans = sorted(doc.spans, key=lambda s: s.token_start)
    parts: list[str] = []
    cursor = 0
    for span in spans:
        start, end = doc.char_range(span)
        parts.append(_escape(doc.text[cursor:start], for_line))
        parts.append(f"<{span.label}>")
        parts.append(_escape(doc.text[start:end], for_line))
        parts.append(f"</{span.label}>")
        cursor = end
    parts.append(_escape(doc.text[cursor:], for_line))
    return "".join(parts)


def decode_inline_xml(
    markup: str,
    tokenizer: Tokenizer = whitespace_tokenize,
    doc_id: str = "doc",
    lang: str = "und",
    taxonomy: Taxonomy | None = None,
    source: str = "xml",
) -> AnnotatedDocument:
    """Scan flat inline markup back into a document.

    Span character boundaries are snapped outward to the enclosing token
    boundaries (warning when a boundary moved); nesting is rejected.
    """
    text_parts: list[str] = []
    char_spans: list[tuple[int, int, str]] = []
    open_label: str | None = None
    open_at = 0
    plain_len = 0
    i = 0
    n = len(markup)
    while i < n:
        ch = markup[i]
        if ch == "<":
            close = markup.find(">", i + 1)
            if close == -1:
                raise MalformedMarkup(f"{doc_id}: unterminated tag at offset {i}")
            body = markup[i + 1 : close]
            if not body:
                raise MalformedMarkup(f"{doc_id}: empty tag at offset {i}")
            if body.startswith("/"):
                label = body[1:]
                if open_label is None or label != open_label:
                    raise MalformedMarkup(
                        f"{doc_id}: closing tag </{label}> without matching opener"
                    )
                char_spans.append((open_at, plain_len, open_label))
                open_label = None
            else:
                if open_label is not None:
                    raise NestedSpans(
                        f"{doc_id}: <{body}> opened inside <{open_label}> (flat spans only)"
                    )
                if "<" in body:
                    raise MalformedMarkup(f"{doc_id}: stray '<' inside tag at offset {i}")
                open_label = body
                open_at = plain_len
            i = close + 1
        elif ch == "&":
            m = _ENTITY.match(markup, i)
            if m:
                text_parts.append(_ENTITY_MAP[m.group(1)])
                plain_len += 1
                i = m.end()
            else:
                text_parts.append(ch)
                plain_len += 1
                i += 1
        elif ch == ">":
            raise MalformedMarkup(f"{doc_id}: unescaped '>' at offset {i}")
        else:
            text_parts.append(ch)
            plain_len += 1
            i += 1
    if open_label is not None:
        raise MalformedMarkup(f"{doc_id}: <{open_label}> never closed")

    text = "".join(text_parts)
    tokens = tokenizer(text)
    spans: list[EntitySpan] = []
    for k, (c_start, c_end, label) in enumerate(char_spans):
        if taxonomy is not None:
            taxonomy.resolve(label)
        else:
            try:
                TagPath.parse(label)
            except Exception:
                raise UnknownLabel(f"{doc_id}: markup label {label!r} is not a valid path")
        covering = [t for t in tokens if t.start < c_end and t.end > c_start]
        if not covering:
            raise MalformedMarkup(
                f"{doc_id}: span <{label}> at chars [{c_start},{c_end}) covers no token"
            )
        t_start, t_end = covering[0].index, covering[-1].index + 1
        if covering[0].start != c_start or covering[-1].end != c_end:
            log.warning(
                "%s: span <%s> snapped from chars [%d,%d) to [%d,%d)",
                doc_id, label, c_start, c_end, covering[0].start, covering[-1].end,
            )
        spans.append(EntitySpan(t_start, t_end, label, source=source, span_id=f"s{k}"))

    spans.sort(key=lambda s: (s.token_start, s.token_end))
    doc = AnnotatedDocument(doc_id, lang, text, tokens, spans)
    require_flat(doc)
    return doc


def write_inline_xml(docs: Iterable[AnnotatedDocument], path: "str | Path") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(encode_inline_xml(doc, for_line=True) + "\n")


def read_inline_xml(
    path: "str | Path",
    tokenizer: Tokenizer = whitespace_tokenize,
    taxonomy: Taxonomy | None = None,
    lang: str = "und",
    doc_id_prefix: str = "doc",
) -> list[AnnotatedDocument]:
    docs = []
    for k, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        docs.append(
            decode_inline_xml(
                line, tokenizer, doc_id=f"{doc_id_prefix}-{k:04d}", lang=lang, taxonomy=taxonomy
            )
        )
    return docs


# -- interchange records -------------------------------------------------------

def encode_spans(doc: AnnotatedDocument) -> dict:
    """Lossless document record with canonical field order (byte-stable)."""
    _check_span_ranges(doc)
    return {
        "doc_id": doc.doc_id,
        "lang": doc.lang,
        "text": doc.text,
        "tokens": [{"i": t.index, "start": t.start, "end": t.end} for t in doc.tokens],
        "spans": [
            {
                "id": s.span_id,
                "token_start": s.token_start,
                "token_end": s.token_end,
                "label": s.label,
                "source": s.source,
                "confidence": s.confidence,
            }
            for s in doc.spans
        ],
    }


def _require(record: dict, key: str, kinds, where: str):
    if key not in record:
        raise SchemaViolation(f"{where}: missing field {key!r}")
    value = record[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise SchemaViolation(f"{where}: field {key!r} has wrong type")
    return value


def decode_spans(record: dict) -> AnnotatedDocument:
    if not isinstance(record, dict):
        raise SchemaViolation("document record must be a JSON object")
    doc_id = _require(record, "doc_id", str, "record")
    where = f"record {doc_id!r}"
    lang = _require(record, "lang", str, where)
    text = _require(record, "text", str, where)
    raw_tokens = _require(record, "tokens", list, where)
    raw_spans = _require(record, "spans", list, where)

    tokens = []
    for raw in raw_tokens:
        if not isinstance(raw, dict):
            raise SchemaViolation(f"{where}: token entries must be objects")
        i = _require(raw, "i", int, where)
        start = _require(raw, "start", int, where)
        end = _require(raw, "end", int, where)
        if not (0 <= start < end <= len(text)):
            raise OffsetOutOfRange(f"{where}: token {i} offsets [{start},{end}) out of range")
        tokens.append(Token(i, start, end))

    spans = []
    for raw in raw_spans:
        if not isinstance(raw, dict):
            raise SchemaViolation(f"{where}: span entries must be objects")
        token_start = _require(raw, "token_start", int, where)
        token_end = _require(raw, "token_end", int, where)
        label = _require(raw, "label", str, where)
        source = raw.get("source", "")
        confidence = raw.get("confidence")
        span_id = raw.get("id", "")
        if not isinstance(source, str) or not isinstance(span_id, str):
            raise SchemaViolation(f"{where}: span 'source' and 'id' must be strings")
        if confidence is not None and not isinstance(confidence, (int, float)):
            raise SchemaViolation(f"{where}: span 'confidence' must be a number or null")
        if token_end <= token_start or token_start < 0 or token_end > len(tokens):
            raise OffsetOutOfRange(
                f"{where}: span token range [{token_start},{token_end}) out of range"
            )
        spans.append(
            EntitySpan(
                token_start,
                token_end,
                label,
                source=source,
                confidence=None if confidence is None else float(confidence),
                span_id=span_id,
            )
        )
    return AnnotatedDocument(doc_id, lang, text, tokens, spans)


def dumps_record(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def write_corpus(docs: Iterable[AnnotatedDocument], path: "str | Path") -> int:
    """Write one interchange record per line; returns the document count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(dumps_record(encode_spans(doc)) + "\n")
            count += 1
    return count


def iter_corpus(path: "str | Path") -> Iterator[AnnotatedDocument]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                yield decode_spans(record)
            except SchemaViolation as exc:
                raise SchemaViolation(f"{path}:{lineno}: {exc}") from None
            except OffsetOutOfRange as exc:
                raise OffsetOutOfRange(f"{path}:{lineno}: {exc}") from None


def read_corpus(path: "str | Path") -> dict[str, AnnotatedDocument]:
    """Load a corpus keyed by doc_id, preserving file order."""
    out: dict[str, AnnotatedDocument] = {}
    for doc in iter_corpus(path):
        if doc.doc_id in out:
            raise SchemaViolation(f"{path}: duplicate doc_id {doc.doc_id!r}")
        out[doc.doc_id] = doc
    return out
