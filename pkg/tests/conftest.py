import random

import pytest

from uner import codecs
from uner.documents import AnnotatedDocument, EntitySpan, Token
from uner.taxonomy import load_bundled_scheme_mappings, load_bundled_taxonomy


@pytest.fixture(scope="session")
def taxonomy():
    return load_bundled_taxonomy("uner")


@pytest.fixture(scope="session")
def sekine_taxonomy():
    return load_bundled_taxonomy("sekine")


@pytest.fixture(scope="session")
def scheme_mappings(taxonomy):
    return load_bundled_scheme_mappings(taxonomy)


@pytest.fixture(scope="session")
def label_pool(taxonomy):
    """A spread of valid labels across depths 1-4."""
    return [
        "Name",
        "Numex",
        "Name.Person",
        "Name.Location",
        "Name.Person.Name",
        "Name.Location.City",
        "Name.Organization",
        "Timex TOP.Timex.Date",
        "Name.Event.Historical Event.Other",
        "Numex.Money",
    ]


def make_doc(doc_id, words, span_triples, lang="en", source="m"):
    """Document from surface words plus (token_start, token_end, label) triples."""
    text = " ".join(words)
    tokens = codecs.whitespace_tokenize(text)
    spans = [
        EntitySpan(ts, te, label, source=source, span_id=f"s{k}")
        for k, (ts, te, label) in enumerate(span_triples)
    ]
    return AnnotatedDocument(doc_id, lang, text, tokens, spans)


@pytest.fixture
def clooney_doc():
    return make_doc(
        "d1",
        ["George", "Clooney", "visited", "Zagreb"],
        [(0, 2, "Name.Person.Name"), (3, 4, "Name.Location.City")],
    )


WORD_POOL = [
    "river", "Zagreb", "union", "said", "in", "the", "2003", "été",
    "šuma", "grad", "Ω", "naïve", "euro", "12%", "done", "görüş",
]


def random_flat_spans(rng, n_tokens, labels, max_spans=None):
    """Random non-overlapping (start, end, label) triples over n_tokens."""
    spans = []
    i = 0
    while i < n_tokens:
        if rng.random() < 0.45:
            length = rng.randint(1, min(3, n_tokens - i))
            spans.append((i, i + length, rng.choice(labels)))
            i += length
            if max_spans is not None and len(spans) >= max_spans:
                break
        else:
            i += 1
    return spans


def random_document(rng: random.Random, doc_id, labels, max_tokens=12, multibyte=True):
    pool = WORD_POOL if multibyte else [w for w in WORD_POOL if w.isascii()]
    n_tokens = rng.randint(1, max_tokens)
    words = [rng.choice(pool) for _ in range(n_tokens)]
    return make_doc(doc_id, words, random_flat_spans(rng, n_tokens, labels))
