"""Run a model over raw text and emit interchange records + a manifest row."""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Iterator

_WORD = re.compile(r"\S+")


def tokenize(text: str) -> list[tuple[int, int]]:
    """Whitespace tokens as (start, end) code-point offsets."""
    return [(m.start(), m.end()) for m in _WORD.finditer(text)]


def _check_tokens(doc_id: str, tokens: list[tuple[int, int]], text: str) -> None:
    previous_end = -1
    for start, end in tokens:
        if not (0 <= start < end <= len(text)):
            raise ValueError(f"{doc_id}: token offsets [{start},{end}) out of range")
        if start < previous_end:
            raise ValueError(f"{doc_id}: overlapping tokens at offset {start}")
        previous_end = end


def iter_texts(source: "str | Path") -> Iterator[tuple[str, str, str]]:
    """(doc_id, lang, text) triples from a text file or a directory of them.

    One document per non-empty line; the language tag is taken from the file
    stem's trailing ``.lang`` suffix when present (``news.en.txt`` -> en).
    """
    path = Path(source)
    files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
    if not files:
        raise FileNotFoundError(f"no .txt files under {path}")
    for file in files:
        stem = file.stem
        lang = stem.rsplit(".", 1)[1] if "." in stem else "und"
        for lineno, line in enumerate(file.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if line:
                yield f"{stem}:{lineno:06d}", lang, line


def tag_document(model, doc_id: str, lang: str, text: str, model_id: str) -> dict:
    tokens = model.tokenize(text) if hasattr(model, "tokenize") else tokenize(text)
    _check_tokens(doc_id, tokens, text)
    raw_spans = model(text, tokens)
    spans = []
    for k, (token_start, token_end, label) in enumerate(sorted(raw_spans)):
        if not (0 <= token_start < token_end <= len(tokens)):
            raise ValueError(f"{doc_id}: model span [{token_start},{token_end}) out of range")
        spans.append(
            {
                "id": f"s{k}",
                "token_start": token_start,
                "token_end": token_end,
                "label": label,
                "source": model_id,
                "confidence": None,
            }
        )
    return {
        "doc_id": doc_id,
        "lang": lang,
        "text": text,
        "tokens": [{"i": i, "start": start, "end": end} for i, (start, end) in enumerate(tokens)],
        "spans": spans,
    }


def tag_corpus(model, texts: Iterable[tuple[str, str, str]], model_id: str) -> list[dict]:
    return [tag_document(model, doc_id, lang, text, model_id) for doc_id, lang, text in texts]


def write_corpus(records: Iterable[dict], path: "str | Path") -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
            count += 1
    return count


def manifest_row(model_id: str, reported_recall: float, scheme_id: str, corpus_path: str) -> str:
    return f"{model_id}\t{reported_recall}\t{scheme_id}\t{corpus_path}"


def append_manifest(row: str, path: "str | Path") -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(row + "\n")
